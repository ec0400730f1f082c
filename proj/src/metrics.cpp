#include "eqr/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "eqr/errors.hpp"

namespace eqr {

namespace {

Tensor clamped01(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::min(1.0, std::max(0.0, out[i]));
  return out;
}

std::vector<double> ssim_window(SsimWindow kind, std::size_t& side) {
  if (kind == SsimWindow::kMean8) {
    side = 8;
    return std::vector<double>(64, 1.0 / 64.0);
  }
  side = 11;
  const double sigma = 1.5;
  std::vector<double> w(side * side);
  double sum = 0.0;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      double dy = static_cast<double>(i) - 5.0;
      double dx = static_cast<double>(j) - 5.0;
      w[i * side + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      sum += w[i * side + j];
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw InvalidArgumentError("psnr: shape mismatch");
  Tensor ca = clamped01(a), cb = clamped01(b);
  double mse = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    double d = ca[i] - cb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ca.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor& a, const Tensor& b, SsimWindow window) {
  if (!a.same_shape(b)) throw InvalidArgumentError("ssim: shape mismatch");
  Shape3 s = as_shape3(a);
  std::size_t side = 0;
  std::vector<double> w = ssim_window(window, side);
  if (s.h < side || s.w < side)
    throw InvalidArgumentError("ssim: image smaller than the window");

  const double c1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
  const double c2 = 0.03 * 0.03;
  Tensor ca = clamped01(a), cb = clamped01(b);

  double total = 0.0;
  std::size_t count = 0;
  const std::size_t plane = s.h * s.w;
  for (std::size_t c = 0; c < s.c; ++c) {
    const double* pa = ca.data() + c * plane;
    const double* pb = cb.data() + c * plane;
    for (std::size_t i = 0; i + side <= s.h; ++i)
      for (std::size_t j = 0; j + side <= s.w; ++j) {
        double ma = 0.0, mb = 0.0, qa = 0.0, qb = 0.0, qab = 0.0;
        for (std::size_t u = 0; u < side; ++u)
          for (std::size_t v = 0; v < side; ++v) {
            double wt = w[u * side + v];
            double va = pa[(i + u) * s.w + j + v];
            double vb = pb[(i + u) * s.w + j + v];
            ma += wt * va;
            mb += wt * vb;
            qa += wt * va * va;
            qb += wt * vb * vb;
            qab += wt * va * vb;
          }
        double var_a = qa - ma * ma;
        double var_b = qb - mb * mb;
        double cov = qab - ma * mb;
        double val = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        total += val;
        ++count;
      }
  }
  return total / static_cast<double>(count);
}

double consistency(const Tensor& x, const DegradedObservation& obs) {
  if (!(as_shape3(x) == obs.op->in_shape()))
    throw InvalidArgumentError("consistency: shape mismatch");
  Tensor r = obs.op->apply(x) - obs.y;
  return l2_norm_sq(r);
}

}  // namespace eqr
