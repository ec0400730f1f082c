#include "eqr/inversion.hpp"

#include <cmath>

#include "eqr/errors.hpp"

namespace eqr {

void LossSpec::validate(Shape3 x0_shape) const {
  if (!(weight > 0.0)) throw InvalidArgumentError("loss weight must be positive");
  if (kind == LossKind::kReference) {
    if (reference.size() == 0)
      throw InvalidArgumentError("reference loss requires a reference tensor");
    if (!(as_shape3(reference) == x0_shape))
      throw InvalidArgumentError("reference tensor shape does not match restoration");
    if (projection == RefProjection::kGrayscale && x0_shape.c != 3)
      throw InvalidArgumentError("grayscale projection requires 3 channels");
    if (projection == RefProjection::kMask) {
      if (mask.size() != x0_shape.h * x0_shape.w)
        throw InvalidArgumentError("projection mask must be (H,W)");
    }
  }
}

void InversionConfig::validate() const {
  if (!(rate >= 0.0)) throw InvalidArgumentError("inversion rate must be >= 0");
  if (steps < 1) throw InvalidArgumentError("inversion steps must be >= 1");
  if (backtrack_max < 1) throw InvalidArgumentError("backtrack_max must be >= 1");
}

namespace {

// Difference tensor the loss is quadratic in, mapped back by the adjoint in
// loss_grad_x0. For kMask both sides are multiplied by the 0/1 mask
// (idempotent, self-adjoint); for kGrayscale the channel mean (adjoint
// spreads /3).
Tensor masked(const Tensor& t, const Tensor& mask) {
  Shape3 s = as_shape3(t);
  Tensor out = t;
  const std::size_t plane = s.h * s.w;
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] *= mask[p];
  return out;
}

Tensor channel_mean(const Tensor& t) {
  Shape3 s = as_shape3(t);
  Tensor out({1, s.h, s.w});
  const std::size_t plane = s.h * s.w;
  for (std::size_t p = 0; p < plane; ++p)
    out[p] = (t[p] + t[plane + p] + t[2 * plane + p]) / 3.0;
  return out;
}

Tensor channel_mean_adjoint(const Tensor& g, Shape3 full) {
  Tensor out = make_tensor(full);
  const std::size_t plane = full.h * full.w;
  for (std::size_t p = 0; p < plane; ++p) {
    double v = g[p] / 3.0;
    out[p] = v;
    out[plane + p] = v;
    out[2 * plane + p] = v;
  }
  return out;
}

}  // namespace

double loss_eval(const Tensor& x0, const DegradedObservation& obs, const LossSpec& spec) {
  spec.validate(as_shape3(x0));
  if (spec.kind == LossKind::kConsistency) {
    Tensor r = obs.op->apply(x0) - obs.y;
    return spec.weight * 0.5 * l2_norm_sq(r);
  }
  switch (spec.projection) {
    case RefProjection::kNone: {
      Tensor r = x0 - spec.reference;
      return spec.weight * 0.5 * l2_norm_sq(r);
    }
    case RefProjection::kGrayscale: {
      Tensor r = channel_mean(x0) - channel_mean(spec.reference);
      return spec.weight * 0.5 * l2_norm_sq(r);
    }
    case RefProjection::kMask: {
      Tensor r = masked(x0 - spec.reference, spec.mask);
      return spec.weight * 0.5 * l2_norm_sq(r);
    }
  }
  throw InvalidArgumentError("unknown loss projection");
}

Tensor loss_grad_x0(const Tensor& x0, const DegradedObservation& obs,
                    const LossSpec& spec) {
  spec.validate(as_shape3(x0));
  if (spec.kind == LossKind::kConsistency) {
    Tensor r = obs.op->apply(x0) - obs.y;
    Tensor g = obs.op->adjoint(r);
    scale_in_place(g, spec.weight);
    return g;
  }
  switch (spec.projection) {
    case RefProjection::kNone: {
      Tensor g = x0 - spec.reference;
      scale_in_place(g, spec.weight);
      return g;
    }
    case RefProjection::kGrayscale: {
      Tensor r = channel_mean(x0) - channel_mean(spec.reference);
      Tensor g = channel_mean_adjoint(r, as_shape3(x0));
      scale_in_place(g, spec.weight);
      return g;
    }
    case RefProjection::kMask: {
      Tensor g = masked(x0 - spec.reference, spec.mask);
      scale_in_place(g, spec.weight);
      return g;
    }
  }
  throw InvalidArgumentError("unknown loss projection");
}

// ---------------------------------------------------------------------------

namespace {

void require_solved(const SamplingState& state, const SamplerContext& ctx, double tol) {
  double r = stack_sup_norm(residual_g(state, ctx));
  if (r > 10.0 * tol)
    throw NumericError("gradient requested at a stale state (residual " +
                       std::to_string(r) + " > 10*tol)");
}

// c^0_s applied to a tensor: c0_scalar[s] u - c0_proj[s] (I - A^+A) u.
Tensor apply_c0(const SamplerContext& ctx, std::size_t s, const Tensor& u) {
  Tensor pu = ctx.obs.op->null_project(u);
  Tensor out = ctx.coeffs.c0_scalar[s] * u;
  axpy(-ctx.coeffs.c0_proj[s], pu, out);
  return out;
}

// (dF/dx_T)^T W. Every row p carries the linear term
// (b_p / sa_T) (I - A^+A) x_T with b_p = sqrt_abar[T-1-p], and z_T (the
// injection-step z) reaches row T-1(-k relation): A^+A z_T feeds row 0 only,
// P z_T feeds every row with weight b_p / sa_{T-1}. weighted = sum_p b_p w_p.
Tensor pullback_xT(const SamplingState& solved, const SamplerContext& ctx,
                   const TensorStack& w, const Tensor& weighted) {
  const CoefficientSet& c = ctx.coeffs;
  const std::size_t T = ctx.T();
  Tensor p_weighted = ctx.obs.op->null_project(weighted);

  Tensor grad = (1.0 / c.sqrt_abar[T]) * p_weighted;

  Tensor inner = (1.0 / c.sqrt_abar[T - 1]) * p_weighted;
  add_in_place(inner, ctx.obs.op->range_project(w[0]));
  Tensor vjp = ctx.denoiser->vjp(solved.x_T, c.abar[T], apply_c0(ctx, T, inner));
  add_in_place(grad, vjp);
  return grad;
}

}  // namespace

Tensor grad_xT_one_step(const SamplingState& solved, const SamplerContext& ctx,
                        const LossSpec& spec, double tol) {
  require_solved(solved, ctx, tol);
  const std::size_t T = ctx.T();
  Tensor v = loss_grad_x0(solved.x0(), ctx.obs, spec);

  // Cotangent stack with only the x_0 row populated.
  TensorStack w(T, Tensor::zeros_like(v));
  w[T - 1] = v;
  Tensor weighted = ctx.coeffs.sqrt_abar[0] * v;  // sum_p b_p w_p
  return pullback_xT(solved, ctx, w, weighted);
}

Tensor grad_xT_exact(const SamplingState& solved, const SamplerContext& ctx,
                     const LossSpec& spec, double tol) {
  require_solved(solved, ctx, tol);
  const CoefficientSet& c = ctx.coeffs;
  const std::size_t T = ctx.T();

  // Solve (I - J_F^T) w = v by back-substitution. Position q holds x_j with
  // j = T-1-q; the rows consuming x_j sit strictly below q, so sweeping from
  // the x_0 row upward finalizes each w_q in one pass:
  //   w_q = v_q + J_eps(x_j)^T c^0_j [ A^+A w_{q+1} + (1/sa_{j-1}) P S_q ],
  //   S_q = sum_{p>q} sqrt_abar[T-1-p] w_p.
  TensorStack w(T, Tensor());
  Tensor v = loss_grad_x0(solved.x0(), ctx.obs, spec);
  Tensor accum = Tensor::zeros_like(v);  // S_q, updated as rows finalize

  for (std::size_t q = T; q-- > 0;) {
    const std::size_t j = T - 1 - q;
    if (j == 0) {
      w[q] = v;  // x_0 feeds no other row
    } else {
      Tensor inner = (1.0 / c.sqrt_abar[j - 1]) * ctx.obs.op->null_project(accum);
      add_in_place(inner, ctx.obs.op->range_project(w[q + 1]));
      w[q] = ctx.denoiser->vjp(solved.states[q], c.abar[j], apply_c0(ctx, j, inner));
      // dL/dx* is zero away from the x_0 row for the shipped losses.
    }
    axpy(c.sqrt_abar[j], w[q], accum);
  }

  return pullback_xT(solved, ctx, w, accum);
}

// ---------------------------------------------------------------------------

namespace {

struct SolveOutcome {
  SamplingState state;
  double loss = 0.0;
  std::uint64_t f_evals = 0;
};

SolveOutcome solve_at(const Tensor& x_T, const SamplingState& proto,
                      const SamplerContext& ctx, const SolverConfig& solver_cfg,
                      const LossSpec& spec, SolverMethod method) {
  SamplingState st;
  st.seed = proto.seed;
  st.noises = proto.noises;
  st.x_T = x_T;
  st.states.assign(proto.rows(), x_T);
  SolveResult solved = anderson_solve(st, ctx, solver_cfg, method);
  SolveOutcome out;
  out.loss = loss_eval(solved.state.x0(), ctx.obs, spec);
  out.state = std::move(solved.state);
  out.f_evals = solved.history.f_evals;
  return out;
}

}  // namespace

double inversion_objective(const Tensor& x_T, const SamplingState& proto,
                           const SamplerContext& ctx, const SolverConfig& solver_cfg,
                           const LossSpec& spec, SolverMethod method) {
  return solve_at(x_T, proto, ctx, solver_cfg, spec, method).loss;
}

InversionResult invert_init(const SamplerContext& ctx, std::uint64_t seed,
                            const SolverConfig& solver_cfg,
                            const InversionConfig& inv_cfg, const LossSpec& spec,
                            SolverMethod method) {
  inv_cfg.validate();
  solver_cfg.validate();

  SamplingState proto = make_sampling_state(ctx.obs.op->in_shape(), ctx.T(), seed);
  InversionResult res;
  res.x_T = proto.x_T;

  const double sign = inv_cfg.ascend ? +1.0 : -1.0;
  SolveOutcome cur = solve_at(res.x_T, proto, ctx, solver_cfg, spec, method);
  res.f_evals += cur.f_evals;
  res.losses.push_back(cur.loss);

  auto record_abort = [&](const std::string& why) {
    res.aborted = true;
    res.abort_reason = why;
    res.last_x0 = cur.state.x0();
    res.last_stack = cur.state.states;
  };

  if (!std::isfinite(cur.loss)) {
    record_abort("initial loss is non-finite");
    return res;
  }

  for (int step = 1; step <= inv_cfg.steps; ++step) {
    Tensor grad = inv_cfg.mode == GradientMode::kOneStep
                      ? grad_xT_one_step(cur.state, ctx, spec, solver_cfg.tol)
                      : grad_xT_exact(cur.state, ctx, spec, solver_cfg.tol);

    if (inv_cfg.backtracking) {
      double lam = inv_cfg.rate;
      bool accepted = false;
      for (int trial = 0; trial < inv_cfg.backtrack_max; ++trial) {
        Tensor cand_xT = res.x_T;
        axpy(sign * lam, grad, cand_xT);
        SolveOutcome cand = solve_at(cand_xT, proto, ctx, solver_cfg, spec, method);
        res.f_evals += cand.f_evals;
        if (!std::isfinite(cand.loss)) {
          record_abort("loss became non-finite during line search");
          return res;
        }
        bool better = inv_cfg.ascend ? cand.loss > cur.loss : cand.loss < cur.loss;
        if (better) {
          res.x_T = std::move(cand_xT);
          cur = std::move(cand);
          accepted = true;
          break;
        }
        lam *= 0.5;
      }
      (void)accepted;  // a stalled step keeps x_T and repeats the loss
      res.losses.push_back(cur.loss);
    } else {
      axpy(sign * inv_cfg.rate, grad, res.x_T);
      if (step < inv_cfg.steps) {
        cur = solve_at(res.x_T, proto, ctx, solver_cfg, spec, method);
        res.f_evals += cur.f_evals;
        if (!std::isfinite(cur.loss)) {
          record_abort("loss became non-finite");
          return res;
        }
        res.losses.push_back(cur.loss);
      }
    }
  }

  res.last_x0 = cur.state.x0();
  res.last_stack = cur.state.states;
  return res;
}

}  // namespace eqr
