#include "eqr/sampler.hpp"

#include <cmath>

#include "eqr/errors.hpp"
#include "eqr/parallel.hpp"
#include "eqr/rng.hpp"

namespace eqr {

SamplingState make_sampling_state(Shape3 shape, std::size_t T, std::uint64_t seed) {
  if (T < 1) throw InvalidArgumentError("sampling state needs T >= 1");
  NormalRng rng(seed);
  SamplingState st;
  st.seed = seed;
  st.x_T = rng.standard_normal(shape);
  st.noises.reserve(T);
  for (std::size_t s = 1; s <= T; ++s) st.noises.push_back(rng.standard_normal(shape));
  st.states.assign(T, st.x_T);
  return st;
}

SamplerContext::SamplerContext(TimestepPlan plan_, CoefficientSet coeffs_,
                               DegradedObservation obs_, DenoiserPtr denoiser_,
                               int workers_)
    : plan(std::move(plan_)),
      coeffs(std::move(coeffs_)),
      obs(std::move(obs_)),
      denoiser(std::move(denoiser_)),
      workers(workers_) {
  if (plan.T != coeffs.T)
    throw InvalidArgumentError("plan and coefficient set disagree on T");
  if (!denoiser) throw InvalidArgumentError("sampler context needs a denoiser");
  if (!obs.op) throw InvalidArgumentError("sampler context needs an operator");
  if (!(as_shape3(obs.y) == obs.op->out_shape()))
    throw InvalidArgumentError("observation shape does not match operator output");
  pinv_y = obs.op->pinv_apply(obs.y);
}

Tensor x0_predict(const Tensor& x_t, double abar_t, const Denoiser& denoiser) {
  if (!(abar_t > 0.0 && abar_t < 1.0))
    throw InvalidArgumentError("x0_predict needs abar in (0, 1)");
  Tensor e = denoiser.eps(x_t, abar_t);
  const double root = std::sqrt(1.0 - abar_t);
  const double inv_sa = 1.0 / std::sqrt(abar_t);
  Tensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - root * e[i]) * inv_sa;
  return out;
}

Tensor project(const Tensor& x0, const DegradedObservation& obs) {
  if (!(as_shape3(x0) == obs.op->in_shape()))
    throw InvalidArgumentError("project: estimate shape does not match operator input");
  Tensor out = obs.op->null_project(x0);
  add_in_place(out, obs.op->pinv_apply(obs.y));
  return out;
}

Tensor sequential_step(const Tensor& x_s, std::size_t s, const SamplerContext& ctx,
                       const Tensor& noise) {
  if (s < 1 || s > ctx.T())
    throw InvalidArgumentError("sequential_step plan position out of range");
  const CoefficientSet& c = ctx.coeffs;

  Tensor e = ctx.denoiser->eps(x_s, c.abar[s]);
  const double root = std::sqrt(1.0 - c.abar[s]);
  const double inv_sa = 1.0 / c.sqrt_abar[s];
  Tensor x0 = x_s;
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = (x0[i] - root * e[i]) * inv_sa;

  Tensor out = ctx.obs.op->null_project(x0);
  add_in_place(out, ctx.pinv_y);
  scale_in_place(out, c.sqrt_abar[s - 1]);
  axpy(c.c2[s - 1], e, out);
  if (c.c1[s - 1] != 0.0) axpy(c.c1[s - 1], noise, out);
  return out;
}

TensorStack sequential_sample(const SamplingState& state, const SamplerContext& ctx) {
  const std::size_t T = ctx.T();
  if (state.noises.size() != T)
    throw InvalidArgumentError("sampling state noise count does not match plan");
  TensorStack traj;
  traj.reserve(T);
  Tensor x = state.x_T;
  for (std::size_t s = T; s >= 1; --s) {
    x = sequential_step(x, s, ctx, state.noises[s - 1]);
    traj.push_back(x);
  }
  return traj;
}

namespace {

// Per-step pieces shared by apply_F and closed_form_rows: the range part
// A^+A z_s and the projector part (I - A^+A) z_s of every z-term, computed
// from the current state. Row s-1 of the state holds x_s for s <= T-1; x_T is
// the injection. Exactly T denoiser evaluations.
struct ZParts {
  TensorStack range;  // [s-1] = A^+A z_s
  TensorStack null;   // [s-1] = (I-A^+A) z_s
};

ZParts compute_z_parts(const SamplingState& state, const SamplerContext& ctx) {
  const std::size_t T = ctx.T();
  const CoefficientSet& c = ctx.coeffs;
  const LinearOperator& op = *ctx.obs.op;

  if (state.rows() != T)
    throw InvalidArgumentError("state row count does not match plan");
  for (const Tensor& t : state.states)
    if (!t.all_finite()) throw NumericError("state contains non-finite values");

  ZParts parts;
  parts.range.assign(T, Tensor());
  parts.null.assign(T, Tensor());

  par::parallel_for(ctx.workers, T, [&](std::size_t idx) {
    const std::size_t s = idx + 1;
    const Tensor& x_s = s == T ? state.x_T : state.states[T - 1 - s];
    Tensor e = ctx.denoiser->eps(x_s, c.abar[s]);
    Tensor e_range = op.range_project(e);

    // range part: c0_scalar * A^+A eps + sa_{s-1} A^+y + c1[s-1] A^+A noise
    Tensor range = c.c0_scalar[s] * e_range;
    axpy(c.sqrt_abar[s - 1], ctx.pinv_y, range);

    // null part: (c0_scalar - c0_proj) * P eps + c1[s-1] P noise
    Tensor e_null = e;                      // P eps = eps - A^+A eps
    for (std::size_t i = 0; i < e_null.size(); ++i) e_null[i] -= e_range[i];
    Tensor null = (c.c0_scalar[s] - c.c0_proj[s]) * e_null;

    if (c.c1[s - 1] != 0.0) {
      Tensor n_range = op.range_project(state.noises[s - 1]);
      axpy(c.c1[s - 1], n_range, range);
      Tensor n_null = state.noises[s - 1];
      for (std::size_t i = 0; i < n_null.size(); ++i) n_null[i] -= n_range[i];
      axpy(c.c1[s - 1], n_null, null);
    }

    parts.range[s - 1] = std::move(range);
    parts.null[s - 1] = std::move(null);
  });
  return parts;
}

}  // namespace

TensorStack apply_F(const SamplingState& state, const SamplerContext& ctx) {
  const std::size_t T = ctx.T();
  const CoefficientSet& c = ctx.coeffs;

  ZParts z = compute_z_parts(state, ctx);
  Tensor px_T = ctx.obs.op->null_project(state.x_T);

  // Shared prefix sums, accumulated serially in a fixed order so rows are
  // bitwise reproducible for any worker count:
  //   W_k = sum_{s=T-k}^{T-1} (1/sa_s) P z_{s+1},  Q = (1/sa_T) P x_T.
  Tensor q = (1.0 / c.sqrt_abar[T]) * px_T;
  TensorStack prefix(T, Tensor());
  Tensor acc = Tensor::zeros_like(state.x_T);
  for (std::size_t k = 1; k <= T; ++k) {
    axpy(1.0 / c.sqrt_abar[T - k], z.null[T - k], acc);  // z index (T-k+1) - 1
    prefix[k - 1] = acc;
  }

  TensorStack out(T, Tensor());
  par::parallel_for(ctx.workers, T, [&](std::size_t p) {
    const std::size_t k = p + 1;  // row p holds x_{T-k}
    Tensor row = q + prefix[k - 1];
    scale_in_place(row, c.sqrt_abar[T - k]);
    add_in_place(row, z.range[T - k]);  // A^+A z_{T-k+1}
    out[p] = std::move(row);
  });
  return out;
}

TensorStack residual_g(const SamplingState& state, const SamplerContext& ctx) {
  TensorStack g = apply_F(state, ctx);
  for (std::size_t p = 0; p < g.size(); ++p)
    for (std::size_t i = 0; i < g[p].size(); ++i) g[p][i] -= state.states[p][i];
  return g;
}

TensorStack closed_form_rows(const SamplingState& state, const SamplerContext& ctx) {
  const std::size_t T = ctx.T();
  const CoefficientSet& c = ctx.coeffs;

  ZParts z = compute_z_parts(state, ctx);
  Tensor px_T = ctx.obs.op->null_project(state.x_T);

  TensorStack out(T, Tensor());
  for (std::size_t k = 1; k <= T; ++k) {
    Tensor row = c.abar_ratio[k][T] * px_T;
    add_in_place(row, z.range[T - k]);
    for (std::size_t s = T - k; s <= T - 1; ++s)
      axpy(c.abar_ratio[k][s], z.null[s], row);
    out[k - 1] = std::move(row);
  }
  return out;
}

}  // namespace eqr
