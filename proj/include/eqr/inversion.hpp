#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eqr/sampler.hpp"
#include "eqr/solver.hpp"
#include "eqr/tensor.hpp"

namespace eqr {

enum class LossKind { kConsistency, kReference };

/// Optional projection applied to both sides of the reference loss.
enum class RefProjection { kNone, kGrayscale, kMask };

/// l = weight * 1/2 ||A x0 - y||^2 (consistency) or
/// l = weight * 1/2 ||P x0 - P ref||^2 (reference, P per projection).
struct LossSpec {
  LossKind kind = LossKind::kConsistency;
  double weight = 1.0;
  Tensor reference;          // required for kReference
  RefProjection projection = RefProjection::kNone;
  Tensor mask;               // (H,W) or (1,H,W) 0/1, required for kMask

  void validate(Shape3 x0_shape) const;
};

double loss_eval(const Tensor& x0, const DegradedObservation& obs, const LossSpec& spec);

/// dL/dx0 for the specs above.
Tensor loss_grad_x0(const Tensor& x0, const DegradedObservation& obs,
                    const LossSpec& spec);

enum class GradientMode { kOneStep, kExactIft };

struct InversionConfig {
  double rate = 0.1;  // lambda
  int steps = 10;     // S
  GradientMode mode = GradientMode::kOneStep;
  bool ascend = false;        // reproduce the raw +lambda*grad update
  bool backtracking = false;  // halving line search, at most backtrack_max trials
  int backtrack_max = 8;

  void validate() const;
};

/// Direct-dependency gradient (inverse Jacobian replaced by identity):
/// (dF/dx_T)^T dL/dx*, where the x_T dependence of every row is the linear
/// (sqrt_abar[T-k]/sqrt_abar[T]) (I - A^+A) term plus the denoiser evaluation
/// eps(x_T, T) inside z_T. Requires the state solved to tolerance
/// (residual <= 10*tol, else NumericError). One denoiser VJP.
Tensor grad_xT_one_step(const SamplingState& solved, const SamplerContext& ctx,
                        const LossSpec& spec, double tol);

/// Full implicit-function-theorem gradient. J_F is strictly lower triangular
/// over the stack, so (I - J_F^T) w = dL/dx* is solved exactly by one
/// back-substitution sweep from the x_0 row upward (T-1 denoiser VJPs), then
/// pushed through dF/dx_T. Matches central finite differences of the whole
/// pipeline.
Tensor grad_xT_exact(const SamplingState& solved, const SamplerContext& ctx,
                     const LossSpec& spec, double tol);

/// The deterministic objective L(root_solve(x_T)) with proto's frozen noises
/// and rows initialized to the broadcast of x_T. Shared by invert_init and
/// the finite-difference oracles.
double inversion_objective(const Tensor& x_T, const SamplingState& proto,
                           const SamplerContext& ctx, const SolverConfig& solver_cfg,
                           const LossSpec& spec,
                           SolverMethod method = SolverMethod::kAnderson);

struct InversionResult {
  Tensor x_T;                  // optimized initialization
  std::vector<double> losses;  // fixed rate: S pre-update losses;
                               // backtracking: initial + S accepted losses
  Tensor last_x0;              // restoration at the last solved x_T
  TensorStack last_stack;
  bool aborted = false;        // loss went non-finite; history kept
  std::string abort_reason;
  std::uint64_t f_evals = 0;   // F applications across all inner solves
};

/// Initialization optimization: S outer steps of (solve the fixed point with
/// gradients disabled, take one gradient step on x_T). The frozen noise draws
/// are shared across all steps so the objective is a deterministic function
/// of x_T. The update minimizes the loss (x_T <- x_T - lambda*grad) unless
/// ascend is set, which reproduces the raw +lambda form. With backtracking, a
/// step that fails to decrease the loss after backtrack_max halvings leaves
/// x_T unchanged, so the recorded losses are non-increasing.
InversionResult invert_init(const SamplerContext& ctx, std::uint64_t seed,
                            const SolverConfig& solver_cfg,
                            const InversionConfig& inv_cfg, const LossSpec& spec,
                            SolverMethod method = SolverMethod::kAnderson);

}  // namespace eqr
