#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eqr/sampler.hpp"
#include "eqr/tensor.hpp"

namespace eqr {

struct SolverConfig {
  int max_iters = 15;   // K
  int history = 5;      // m: residuals combined per update; m = 1 is Picard
  double tol = 1e-6;    // sup-norm residual tolerance
  double ridge = 1e-8;  // Tikhonov term on the difference normal equations
  double mixing = 1.0;  // damping in (0, 1]; 1 = undamped

  void validate() const;
};

enum class SolverMethod { kAnderson, kPicard };

struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;
  std::vector<double> alpha;  // combination weights, sum to 1
  bool picard_fallback = false;
  double wall_ms = 0.0;
  std::vector<double> row_residuals;  // per-row sup norms (stacked solves only)
};

struct SolveHistory {
  std::vector<IterationRecord> records;
  bool converged = false;
  int iterations_used = 0;      // K_used: loop iterations that consumed an F eval
  double final_residual = 0.0;  // residual at the returned state when converged,
                                // else the last measured residual
  std::uint64_t f_evals = 0;    // distinct F applications (caching convention)
};

/// F applications under the naive reading, where every update re-evaluates F
/// on the whole combination window: 1 + sum_{k=1..K_used} min(m, k+1).
std::uint64_t naive_f_applications(int iterations_used, int history);

// ---------------------------------------------------------------------------
// Generic fixed-point core over flat vectors (also the toy-problem surface).

using MapFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct FlatSolveResult {
  std::vector<double> x;
  SolveHistory history;
};

/// Bare Picard baseline: repeat x <- x + mixing*(F(x) - x), at most
/// config.max_iters F applications, stopping early once the measured residual
/// is within tol. K = 1 performs exactly one application and returns F(x0).
/// row_sizes, when non-empty, partitions the flat vector for per-row residual
/// records.
FlatSolveResult picard_iterate(const MapFn& F, std::vector<double> x0,
                               const SolverConfig& config,
                               const std::vector<std::size_t>& row_sizes = {});

/// Windowed Anderson acceleration. Shape of the run: one initial F
/// application (recorded as iteration 0), then up to K loop iterations of one
/// F application each; buffered (x, F(x), g) triples are cached and reused,
/// so f_evals = iterations_used + 1. The constrained least squares
/// min ||sum_i alpha_i g_i||, sum alpha = 1 over the last min(m, k+1)
/// residuals is solved through the difference reformulation with a ridge
/// term; if the normal equations still fail, the iteration falls back to a
/// plain Picard step (flagged in the record). method = kPicard runs the same
/// driver with a window of one (alpha = [1]).
FlatSolveResult anderson_iterate(const MapFn& F, std::vector<double> x0,
                                 const SolverConfig& config,
                                 SolverMethod method = SolverMethod::kAnderson,
                                 const std::vector<std::size_t>& row_sizes = {});

// ---------------------------------------------------------------------------
// Stacked-chain wrappers.

struct SolveResult {
  SamplingState state;
  SolveHistory history;
};

SolveResult picard_solve(const SamplingState& init, const SamplerContext& ctx,
                         const SolverConfig& config);

SolveResult anderson_solve(const SamplingState& init, const SamplerContext& ctx,
                           const SolverConfig& config,
                           SolverMethod method = SolverMethod::kAnderson);

struct RootSolveResult {
  Tensor x0;
  SamplingState state;
  SolveHistory history;
};

/// Draws the injections from seed, initializes every row to x_T (or to the
/// caller-provided warm-start stack standing in for an external prior), and
/// solves the fixed point. No gradients are recorded anywhere in this path.
RootSolveResult root_solve(const SamplerContext& ctx, std::uint64_t seed,
                           const SolverConfig& config,
                           SolverMethod method = SolverMethod::kAnderson,
                           const TensorStack* warm_start = nullptr);

/// root_solve on an existing state (shared frozen injections).
RootSolveResult root_solve_from_state(SamplingState state, const SamplerContext& ctx,
                                      const SolverConfig& config,
                                      SolverMethod method = SolverMethod::kAnderson);

}  // namespace eqr
