#pragma once

#include <cstdint>
#include <memory>

#include "eqr/denoiser.hpp"
#include "eqr/operators.hpp"
#include "eqr/schedule.hpp"
#include "eqr/tensor.hpp"

namespace eqr {

/// Degraded observation y = A(x) (+ optional recorded noise level; the
/// projection always treats y as noiseless).
struct DegradedObservation {
  Tensor y;
  OperatorPtr op;
  double noise_level = 0.0;
};

/// The multivariate unknown of the fixed-point system plus its frozen input
/// injections. states[k] holds x_{T-1-k} (row 0 is the noisiest unknown, the
/// last row is x_0). noises[s-1] is the frozen per-step draw consumed by the
/// step x_s -> x_{s-1}; all draws happen once at construction and are never
/// redrawn while solving.
struct SamplingState {
  TensorStack states;
  Tensor x_T;
  TensorStack noises;
  std::uint64_t seed = 0;

  std::size_t rows() const { return states.size(); }
  const Tensor& x0() const { return states.back(); }
};

/// Draws x_T then noise_1..noise_T from one seeded stream and initializes
/// every row to x_T (the default solver initialization).
SamplingState make_sampling_state(Shape3 shape, std::size_t T, std::uint64_t seed);

/// Everything a step evaluation needs, shared read-only across workers.
/// pinv_y caches A^+ y.
struct SamplerContext {
  TimestepPlan plan;
  CoefficientSet coeffs;
  DegradedObservation obs;
  DenoiserPtr denoiser;
  int workers = 1;
  Tensor pinv_y;

  SamplerContext(TimestepPlan plan_, CoefficientSet coeffs_, DegradedObservation obs_,
                 DenoiserPtr denoiser_, int workers_ = 1);
  std::size_t T() const { return plan.T; }
};

/// Clean-image estimate x_{0|t} = (x_t - sqrt(1-abar) eps(x_t)) / sqrt(abar).
Tensor x0_predict(const Tensor& x_t, double abar_t, const Denoiser& denoiser);

/// Range-null-space data consistency: A^+ y + (I - A^+A) x0.
Tensor project(const Tensor& x0, const DegradedObservation& obs);

/// One reverse step x_s -> x_{s-1} (s is the 1-based plan position):
///   x_{s-1} = sqrt(abar_{s-1}) * [A^+y + (I-A^+A) x_{0|s}]
///             + c2[s-1] * eps(x_s) + c1[s-1] * noise.
/// Deterministic given (x_s, noise); eta = 0 makes the noise term vanish and
/// abar_0 = 1 makes the final step land exactly on the projected estimate.
Tensor sequential_step(const Tensor& x_s, std::size_t s, const SamplerContext& ctx,
                       const Tensor& noise);

/// Serial reference rollout from state.x_T using state.noises. Returns the
/// full trajectory stack [x_{T-1}, ..., x_0]; exactly T denoiser evaluations.
TensorStack sequential_sample(const SamplingState& state, const SamplerContext& ctx);

/// The parallel map F over the stacked chain. Every row is computed from the
/// *current* state (Jacobi-style simultaneous update) via the closed form
///   x_{T-k} = (sa_{T-k}/sa_T) P x_T + A^+A z_{T-k+1}
///             + sum_{s=T-k}^{T-1} (sa_{T-k}/sa_s) P z_{s+1},
///   z_s = c0_scalar[s] eps(x_s) - c0_proj[s] P eps(x_s)
///         + sa_{s-1} A^+y + c1[s-1] noise_s,      P = I - A^+A,
/// where sa = sqrt(abar). Exactly T denoiser evaluations per call; rows are
/// bitwise independent of evaluation order and worker count (shared prefix
/// sums are accumulated serially in a fixed order).
TensorStack apply_F(const SamplingState& state, const SamplerContext& ctx);

/// g(x) = F(x) - x over the stack.
TensorStack residual_g(const SamplingState& state, const SamplerContext& ctx);

/// Literal row-by-row evaluation of the closed form using the abar_ratio
/// table and an independent per-row summation. Slower than apply_F; this is
/// the oracle route used to validate the prefix-sum implementation and to
/// select the coefficient variant.
TensorStack closed_form_rows(const SamplingState& state, const SamplerContext& ctx);

}  // namespace eqr
