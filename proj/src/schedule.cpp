#include "eqr/schedule.hpp"

#include <cmath>

#include "eqr/errors.hpp"

namespace eqr {

NoiseSchedule build_schedule(std::size_t base_len, ScheduleKind kind) {
  if (base_len < 2) throw InvalidArgumentError("schedule base_len must be >= 2");
  if (kind != ScheduleKind::kLinear) throw InvalidArgumentError("unknown schedule kind");

  NoiseSchedule s;
  s.base_len = base_len;
  s.betas.resize(base_len);
  s.alphas.resize(base_len);
  s.alpha_bars.resize(base_len);

  const double beta_lo = 1e-4;
  const double beta_hi = 0.02;
  double running = 1.0;
  for (std::size_t t = 0; t < base_len; ++t) {
    double frac = static_cast<double>(t) / static_cast<double>(base_len - 1);
    s.betas[t] = beta_lo + frac * (beta_hi - beta_lo);
    s.alphas[t] = 1.0 - s.betas[t];
    running *= s.alphas[t];
    s.alpha_bars[t] = running;
  }
  return s;
}

TimestepPlan select_timesteps(const NoiseSchedule& schedule, std::size_t T) {
  if (T < 1) throw InvalidArgumentError("plan length T must be >= 1");
  if (T > schedule.base_len)
    throw InvalidArgumentError("plan length T exceeds schedule base_len");

  TimestepPlan plan;
  plan.T = T;
  plan.taus.resize(T);
  const double step = static_cast<double>(schedule.base_len) / static_cast<double>(T);
  for (std::size_t i = 0; i < T; ++i) {
    long long t = std::llround(static_cast<double>(i + 1) * step);
    plan.taus[i] = static_cast<std::size_t>(std::max(1LL, t));
  }
  plan.taus[T - 1] = schedule.base_len;
  // Resolve rounding collisions by pushing earlier entries down.
  for (std::size_t i = T - 1; i-- > 0;) {
    if (plan.taus[i] >= plan.taus[i + 1]) plan.taus[i] = plan.taus[i + 1] - 1;
  }
  if (plan.taus[0] < 1)
    throw InvalidArgumentError("plan length T does not fit the schedule");
  return plan;
}

double posterior_sigma(const NoiseSchedule& schedule, std::size_t t) {
  if (t < 1 || t > schedule.base_len)
    throw InvalidArgumentError("posterior_sigma timestep out of range");
  double abar_prev = schedule.abar(t - 1);
  double abar_t = schedule.abar(t);
  double var = (1.0 - abar_prev) / (1.0 - abar_t) * schedule.betas[t - 1];
  return std::sqrt(std::max(0.0, var));
}

std::string coeff_variant_name(CoeffVariant v) {
  return v == CoeffVariant::kStepAlpha ? "step_alpha" : "alpha_bar";
}

CoeffVariant coeff_variant_from_name(const std::string& name) {
  if (name == "step_alpha") return CoeffVariant::kStepAlpha;
  if (name == "alpha_bar") return CoeffVariant::kAlphaBar;
  throw InvalidArgumentError("unknown coefficient variant: " + name);
}

CoefficientSet prop1_coefficients(const NoiseSchedule& schedule, const TimestepPlan& plan,
                                  double eta, CoeffVariant variant) {
  if (!(eta >= 0.0 && eta < 1.0))
    throw InvalidArgumentError("eta must lie in [0, 1)");

  const std::size_t T = plan.T;
  CoefficientSet c;
  c.eta = eta;
  c.variant = variant;
  c.T = T;
  c.abar.resize(T + 1);
  c.sqrt_abar.resize(T + 1);
  c.c1.resize(T + 1);
  c.c2.resize(T + 1);
  c.c0_scalar.assign(T + 1, 0.0);
  c.c0_proj.assign(T + 1, 0.0);

  const double eta_c = std::sqrt(1.0 - eta * eta);
  for (std::size_t s = 0; s <= T; ++s) {
    c.abar[s] = plan.abar_at(schedule, s);
    c.sqrt_abar[s] = std::sqrt(c.abar[s]);
    double root = std::sqrt(1.0 - c.abar[s]);
    c.c1[s] = root * eta;
    c.c2[s] = root * eta_c;
  }
  for (std::size_t s = 1; s <= T; ++s) {
    c.c0_scalar[s] = c.c2[s - 1];
    double root = std::sqrt(1.0 - c.abar[s]);
    c.c0_proj[s] = variant == CoeffVariant::kStepAlpha
                       ? root * c.sqrt_abar[s - 1] / c.sqrt_abar[s]
                       : root / c.sqrt_abar[s];
  }

  c.abar_ratio.resize(T + 1);
  for (std::size_t k = 1; k <= T; ++k) {
    c.abar_ratio[k].resize(T + 1);
    for (std::size_t s = 0; s <= T; ++s)
      c.abar_ratio[k][s] = c.sqrt_abar[T - k] / c.sqrt_abar[s];
  }
  return c;
}

}  // namespace eqr
