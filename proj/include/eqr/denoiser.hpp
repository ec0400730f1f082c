#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eqr/tensor.hpp"

namespace eqr {

/// Noise predictor interface. Time is passed as the cumulative signal
/// retention abar in (0, 1) rather than an integer index, decoupling
/// denoisers from schedule internals. eps and vjp are pure and deterministic;
/// implementations must be safe to call from many workers at once.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Predicted noise, same shape as x.
  virtual Tensor eps(const Tensor& x, double abar) const = 0;

  /// (d eps / d x)^T cotangent.
  virtual Tensor vjp(const Tensor& x, double abar, const Tensor& cotangent) const = 0;

  virtual std::string describe() const = 0;

 protected:
  static void validate_inputs(const Tensor& x, double abar);
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

/// Central-difference VJP (step h per probed coordinate). Works for any
/// denoiser; this is the oracle the analytic/manual VJPs are checked against
/// and costs 2*dim eps evaluations.
Tensor fd_vjp(const Denoiser& d, const Tensor& x, double abar, const Tensor& cotangent,
              double step = 1e-5);

// ---------------------------------------------------------------------------

DenoiserPtr make_zero_denoiser();

/// Diagonal-covariance Gaussian mixture prior over clean data. Makes the
/// ideal noise predictor exact: with x = sqrt(abar) x0 + sqrt(1-abar) e and
/// x0 ~ GMM, the posterior mean m(x) is closed-form and
/// eps = (x - sqrt(abar) m(x)) / sqrt(1-abar).
struct GmmParams {
  std::vector<double> weights;              // simplex, length K
  std::vector<std::vector<double>> means;   // K x dim
  std::vector<std::vector<double>> variances;  // K x dim, strictly positive

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means[0].size(); }
  void validate() const;
};

DenoiserPtr make_gmm_denoiser(GmmParams params);

/// JSON document {"weights": [...], "means": [[...]], "variances": [[...]]}.
GmmParams load_gmm_spec(const std::string& path);
void save_gmm_spec(const std::string& path, const GmmParams& params);

/// Draws one sample from the prior (component by weight, then diagonal
/// normal). Used by corpus generation.
class NormalRng;
Tensor sample_gmm(const GmmParams& params, NormalRng& rng, Shape3 shape);

// ---------------------------------------------------------------------------

/// Small dense network operating on the flattened input concatenated with a
/// sinusoidal embedding of abar. Loaded from a model directory containing
/// manifest.json and weights.dqt (concatenated DQT1 records in declared
/// order, w then b per layer; w is (out, in), b is (out)).
struct MlpLayer {
  std::size_t in = 0, out = 0;
  bool tanh_act = false;  // identity otherwise
  std::vector<double> w;  // row-major (out, in)
  std::vector<double> b;
};

struct MlpModel {
  std::size_t embed_dim = 0;  // even; 0 disables the time input
  std::vector<MlpLayer> layers;
  std::size_t data_dim() const { return layers.empty() ? 0 : layers.back().out; }
};

MlpModel load_mlp(const std::string& dir);
DenoiserPtr make_mlp_denoiser(MlpModel model, std::string origin = "");

/// Sinusoidal features of the scalar abar: half sines, half cosines over a
/// geometric frequency ladder 10000^(i/half).
std::vector<double> time_embedding(double abar, std::size_t embed_dim);

// ---------------------------------------------------------------------------

/// Shared instrumentation for NFE accounting.
struct EvalCounter {
  std::atomic<std::uint64_t> eps_calls{0};
  std::atomic<std::uint64_t> vjp_calls{0};
};

/// Transparent wrapper that bumps the counter on every call.
DenoiserPtr make_counting_denoiser(DenoiserPtr inner, std::shared_ptr<EvalCounter> counter);

}  // namespace eqr
