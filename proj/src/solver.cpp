#include "eqr/solver.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <deque>

#include "eqr/errors.hpp"

namespace eqr {

namespace {

double flat_sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

bool flat_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct Entry {
  std::vector<double> x;
  std::vector<double> fx;
  std::vector<double> g;
};

std::vector<double> per_row_sup(const std::vector<double>& g,
                                const std::vector<std::size_t>& row_sizes) {
  std::vector<double> out;
  out.reserve(row_sizes.size());
  std::size_t pos = 0;
  for (std::size_t n : row_sizes) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(g[pos + i]));
    out.push_back(m);
    pos += n;
  }
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidArgumentError("solver: max_iters must be >= 1");
  if (history < 1) throw InvalidArgumentError("solver: history m must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgumentError("solver: tol must be positive");
  if (ridge < 0.0) throw InvalidArgumentError("solver: ridge must be >= 0");
  if (!(mixing > 0.0 && mixing <= 1.0))
    throw InvalidArgumentError("solver: mixing must lie in (0, 1]");
}

std::uint64_t naive_f_applications(int iterations_used, int history) {
  std::uint64_t n = 1;
  for (int k = 1; k <= iterations_used; ++k)
    n += static_cast<std::uint64_t>(std::min(history, k + 1));
  return n;
}

FlatSolveResult picard_iterate(const MapFn& F, std::vector<double> x0,
                               const SolverConfig& config,
                               const std::vector<std::size_t>& row_sizes) {
  config.validate();
  FlatSolveResult res;
  res.x = std::move(x0);
  auto t0 = std::chrono::steady_clock::now();

  for (int k = 0; k < config.max_iters; ++k) {
    std::vector<double> fx = F(res.x);
    res.history.f_evals++;
    if (!flat_finite(fx))
      throw NumericError("picard diverged to non-finite values at iteration " +
                         std::to_string(k));
    std::vector<double> g(fx.size());
    for (std::size_t i = 0; i < fx.size(); ++i) g[i] = fx[i] - res.x[i];
    double r = flat_sup_norm(g);
    res.history.records.push_back(
        {k, r, {1.0}, false, ms_since(t0), per_row_sup(g, row_sizes)});
    res.history.final_residual = r;
    if (r <= config.tol) {
      res.history.converged = true;
      res.history.iterations_used = k;
      return res;
    }
    for (std::size_t i = 0; i < fx.size(); ++i)
      res.x[i] += config.mixing * (fx[i] - res.x[i]);
    res.history.iterations_used = k + 1;
  }
  return res;
}

FlatSolveResult anderson_iterate(const MapFn& F, std::vector<double> x0,
                                 const SolverConfig& config, SolverMethod method,
                                 const std::vector<std::size_t>& row_sizes) {
  config.validate();
  const std::size_t n = x0.size();
  const int window = method == SolverMethod::kPicard ? 1 : config.history;
  auto t0 = std::chrono::steady_clock::now();

  FlatSolveResult res;
  res.x = std::move(x0);
  std::deque<Entry> buf;

  auto evaluate = [&](const std::vector<double>& x, int iteration) -> const Entry& {
    std::vector<double> fx = F(x);
    res.history.f_evals++;
    if (!flat_finite(fx))
      throw NumericError("solver diverged to non-finite values at iteration " +
                         std::to_string(iteration));
    Entry e;
    e.x = x;
    e.g.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.g[i] = fx[i] - x[i];
    e.fx = std::move(fx);
    buf.push_back(std::move(e));
    while (static_cast<int>(buf.size()) > window) buf.pop_front();
    return buf.back();
  };

  for (int k = 0; k <= config.max_iters; ++k) {
    const Entry& cur = evaluate(res.x, k);
    double r = flat_sup_norm(cur.g);
    std::vector<double> rows = per_row_sup(cur.g, row_sizes);
    res.history.final_residual = r;
    res.history.iterations_used = k;
    if (r <= config.tol) {
      res.history.records.push_back({k, r, {1.0}, false, ms_since(t0), std::move(rows)});
      res.history.converged = true;
      return res;
    }

    const std::size_t J = buf.size();
    std::vector<double> alpha(J, 0.0);
    bool fallback = false;
    if (J == 1) {
      alpha[0] = 1.0;
    } else {
      // Difference reformulation of  min ||sum alpha_i g_i||, sum alpha = 1:
      // gamma solves (D^T D + ridge I) gamma = D^T g_last with columns
      // d_j = g_{j+1} - g_j, then alpha_0 = gamma_0,
      // alpha_i = gamma_i - gamma_{i-1}, alpha_last = 1 - gamma_{J-2}.
      const std::size_t cols = J - 1;
      Eigen::MatrixXd gram(cols, cols);
      Eigen::VectorXd rhs(cols);
      for (std::size_t a = 0; a < cols; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            acc += (buf[a + 1].g[i] - buf[a].g[i]) * (buf[b + 1].g[i] - buf[b].g[i]);
          gram(a, b) = acc;
          gram(b, a) = acc;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          acc += (buf[a + 1].g[i] - buf[a].g[i]) * buf[J - 1].g[i];
        rhs(a) = acc;
        gram(a, a) += config.ridge;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      Eigen::VectorXd gamma;
      if (ldlt.info() == Eigen::Success) gamma = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success || !gamma.allFinite()) {
        fallback = true;
        alpha.assign(J, 0.0);
        alpha[J - 1] = 1.0;
      } else {
        alpha[0] = gamma(0);
        for (std::size_t i = 1; i + 1 < J; ++i) alpha[i] = gamma(i) - gamma(i - 1);
        alpha[J - 1] = 1.0 - gamma(cols - 1);
      }
    }

    res.history.records.push_back({k, r, alpha, fallback, ms_since(t0), std::move(rows)});

    // x_{k+1} = sum_i alpha_i x_i + mixing * sum_i alpha_i g_i
    std::vector<double> next(n, 0.0);
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t i = 0; i < n; ++i)
        next[i] += alpha[j] * (buf[j].x[i] + config.mixing * buf[j].g[i]);
    res.x = std::move(next);
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

MapFn stack_map(const SamplingState& proto, const SamplerContext& ctx) {
  return [&proto, &ctx](const std::vector<double>& flat) {
    SamplingState st;
    st.x_T = proto.x_T;
    st.noises = proto.noises;
    st.seed = proto.seed;
    st.states = unflatten_stack(flat, proto.states);
    return flatten_stack(apply_F(st, ctx));
  };
}

SolveResult lift(FlatSolveResult flat, const SamplingState& proto) {
  SolveResult out;
  out.state = proto;
  out.state.states = unflatten_stack(flat.x, proto.states);
  out.history = std::move(flat.history);
  return out;
}

}  // namespace

namespace {
std::vector<std::size_t> row_sizes_of(const SamplingState& st) {
  std::vector<std::size_t> sizes;
  sizes.reserve(st.states.size());
  for (const Tensor& t : st.states) sizes.push_back(t.size());
  return sizes;
}
}  // namespace

SolveResult picard_solve(const SamplingState& init, const SamplerContext& ctx,
                         const SolverConfig& config) {
  FlatSolveResult flat = picard_iterate(stack_map(init, ctx), flatten_stack(init.states),
                                        config, row_sizes_of(init));
  return lift(std::move(flat), init);
}

SolveResult anderson_solve(const SamplingState& init, const SamplerContext& ctx,
                           const SolverConfig& config, SolverMethod method) {
  FlatSolveResult flat =
      anderson_iterate(stack_map(init, ctx), flatten_stack(init.states), config, method,
                       row_sizes_of(init));
  return lift(std::move(flat), init);
}

RootSolveResult root_solve(const SamplerContext& ctx, std::uint64_t seed,
                           const SolverConfig& config, SolverMethod method,
                           const TensorStack* warm_start) {
  SamplingState state = make_sampling_state(ctx.obs.op->in_shape(), ctx.T(), seed);
  if (warm_start) {
    if (warm_start->size() != state.states.size())
      throw InvalidArgumentError("warm start row count does not match plan");
    for (std::size_t p = 0; p < state.states.size(); ++p)
      if (!(*warm_start)[p].same_shape(state.states[p]))
        throw InvalidArgumentError("warm start row shape mismatch");
    state.states = *warm_start;
  }
  return root_solve_from_state(std::move(state), ctx, config, method);
}

RootSolveResult root_solve_from_state(SamplingState state, const SamplerContext& ctx,
                                      const SolverConfig& config, SolverMethod method) {
  SolveResult solved = anderson_solve(state, ctx, config, method);
  RootSolveResult out;
  out.x0 = solved.state.x0();
  out.state = std::move(solved.state);
  out.history = std::move(solved.history);
  return out;
}

}  // namespace eqr
