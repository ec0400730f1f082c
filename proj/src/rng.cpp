#include "eqr/rng.hpp"

#include <cmath>

namespace eqr {

double NormalRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Polar method: rejection-sample a point in the unit disc, then scale.
  for (;;) {
    double u = 2.0 * uniform() - 1.0;
    double v = 2.0 * uniform() - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      double m = std::sqrt(-2.0 * std::log(s) / s);
      spare_ = v * m;
      has_spare_ = true;
      return u * m;
    }
  }
}

Tensor NormalRng::standard_normal(const std::vector<std::size_t>& shape) {
  Tensor out((shape));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal();
  return out;
}

}  // namespace eqr
