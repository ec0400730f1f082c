#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eqr {

enum class ScheduleKind { kLinear };

/// Per-timestep variance schedule of the forward noising process.
/// alpha_bars[t-1] is the cumulative product of alphas up to timestep t
/// (1-based); by convention the cumulative product at "timestep 0" is 1.
struct NoiseSchedule {
  std::size_t base_len = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  /// Cumulative alpha at 1-based timestep t, with abar(0) = 1.
  double abar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bars[t - 1]; }
};

/// Linear ramp beta_1 = 1e-4 ... beta_base_len = 0.02.
NoiseSchedule build_schedule(std::size_t base_len, ScheduleKind kind);

/// Strictly increasing subsequence of {1..base_len} used as the sampling
/// chain; taus.back() == base_len always.
struct TimestepPlan {
  std::size_t T = 0;
  std::vector<std::size_t> taus;  // 1-based timesteps, length T

  /// Cumulative alpha at plan position s in 0..T (s=0 is the clean end).
  double abar_at(const NoiseSchedule& sched, std::size_t s) const {
    return s == 0 ? 1.0 : sched.abar(taus[s - 1]);
  }
};

/// T uniformly spaced timesteps ending at base_len; nearest rounding,
/// duplicates resolved by decrementing earlier entries.
TimestepPlan select_timesteps(const NoiseSchedule& schedule, std::size_t T);

/// Reverse-posterior standard deviation at 1-based timestep t:
/// sigma_t = sqrt((1 - abar_{t-1}) / (1 - abar_t) * beta_t), abar_0 = 1.
double posterior_sigma(const NoiseSchedule& schedule, std::size_t t);

/// Two readings of the alpha factor inside the projector part of the z-term
/// coefficient. kStepAlpha uses the effective per-plan-step ratio
/// abar_s / abar_{s-1} (the exact value produced by unrolling the sequential
/// recursion; reduces to the raw per-timestep alpha on a full-chain plan).
/// kAlphaBar divides by abar_s itself. The unrolling oracle selects
/// kStepAlpha; kAlphaBar is kept as the rejected candidate behind this switch.
enum class CoeffVariant { kStepAlpha, kAlphaBar };

std::string coeff_variant_name(CoeffVariant v);
CoeffVariant coeff_variant_from_name(const std::string& name);

/// Scalar coefficients of the closed-form parallel update, indexed by plan
/// position. All operator-valued structure (the I - A^+A projector) is applied
/// lazily by the sampler; this type is operator-free.
///
/// Entry layout (s = 0..T; index 0 realizes the abar_0 = 1 convention):
///   c1[s] = sqrt(1 - abar_s) * eta
///   c2[s] = sqrt(1 - abar_s) * sqrt(1 - eta^2)
/// Step s (mapping x_s -> x_{s-1}, s = 1..T) consumes the target-level pair
/// c1[s-1], c2[s-1] together with the current-level projector coefficient
///   c0_proj[s] = sqrt(1 - abar_s) * sqrt_abar[s-1] / sqrt_abar[s]   (kStepAlpha)
/// so the z-term reads  z_s = c2[s-1]*eps - c0_proj[s]*(I - A^+A) eps
///                            + sqrt_abar[s-1]*A^+y + c1[s-1]*noise_s.
/// c0_scalar[s] aliases c2[s-1] for callers that want the pair by step index.
struct CoefficientSet {
  double eta = 0.0;
  CoeffVariant variant = CoeffVariant::kStepAlpha;
  std::size_t T = 0;
  std::vector<double> abar;        // [0..T]
  std::vector<double> sqrt_abar;   // [0..T]
  std::vector<double> c1;          // [0..T]
  std::vector<double> c2;          // [0..T]
  std::vector<double> c0_scalar;   // [0..T], c0_scalar[s] = c2[s-1], [0] unused
  std::vector<double> c0_proj;     // [0..T], [0] unused
  /// abar_ratio[k][s] = sqrt_abar[T-k] / sqrt_abar[s] for k = 1..T, s = 0..T.
  std::vector<std::vector<double>> abar_ratio;
};

CoefficientSet prop1_coefficients(const NoiseSchedule& schedule, const TimestepPlan& plan,
                                  double eta,
                                  CoeffVariant variant = CoeffVariant::kStepAlpha);

}  // namespace eqr
