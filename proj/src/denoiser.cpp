#include "eqr/denoiser.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "eqr/errors.hpp"
#include "eqr/io.hpp"
#include "eqr/rng.hpp"

namespace eqr {

void Denoiser::validate_inputs(const Tensor& x, double abar) {
  if (!(abar > 0.0 && abar < 1.0))
    throw InvalidArgumentError("abar must lie strictly inside (0, 1)");
  if (!x.all_finite()) throw NumericError("denoiser input contains non-finite values");
}

Tensor fd_vjp(const Denoiser& d, const Tensor& x, double abar, const Tensor& cotangent,
              double step) {
  Tensor grad = Tensor::zeros_like(x);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    Tensor plus = d.eps(probe, abar);
    probe[i] = x[i] - step;
    Tensor minus = d.eps(probe, abar);
    probe[i] = x[i];
    grad[i] = (dot(plus, cotangent) - dot(minus, cotangent)) / (2.0 * step);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Zero

namespace {

class ZeroDenoiser final : public Denoiser {
 public:
  Tensor eps(const Tensor& x, double abar) const override {
    validate_inputs(x, abar);
    return Tensor::zeros_like(x);
  }
  Tensor vjp(const Tensor& x, double abar, const Tensor&) const override {
    validate_inputs(x, abar);
    return Tensor::zeros_like(x);
  }
  std::string describe() const override { return "zero"; }
};

// ---------------------------------------------------------------------------
// Gaussian mixture

class GmmDenoiser final : public Denoiser {
 public:
  explicit GmmDenoiser(GmmParams params) : p_(std::move(params)) { p_.validate(); }

  Tensor eps(const Tensor& x, double abar) const override {
    validate_inputs(x, abar);
    check_dim(x);
    Posterior post = posterior(x, abar);
    Tensor out = Tensor::zeros_like(x);
    const double sa = std::sqrt(abar);
    const double root = std::sqrt(1.0 - abar);
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = (x[i] - sa * post.mean[i]) / root;
    return out;
  }

  // eps(x) = (x - sqrt(abar) m(x)) / sqrt(1-abar) with
  // m(x) = sum_k r_k(x) E_k(x). The Jacobian splits into the per-component
  // linear part diag(sqrt(abar) v_k / d_k) and the responsibility-softmax
  // part E_k (grad r_k)^T with grad r_k = r_k (s_k - sum_j r_j s_j),
  // s_k = -(x - sqrt(abar) mu_k) / d_k.
  Tensor vjp(const Tensor& x, double abar, const Tensor& cot) const override {
    validate_inputs(x, abar);
    check_dim(x);
    if (!cot.same_shape(x))
      throw InvalidArgumentError("cotangent shape does not match input");
    Posterior post = posterior(x, abar);
    const std::size_t n = x.size();
    const std::size_t K = p_.components();
    const double sa = std::sqrt(abar);
    const double root = std::sqrt(1.0 - abar);

    // s_bar and the responsibility-weighted linear gains.
    std::vector<double> s_bar(n, 0.0), lin(n, 0.0);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        s_bar[i] += post.resp[k] * post.score[k][i];
        lin[i] += post.resp[k] * post.gain[k][i];
      }

    Tensor jm_t_u = Tensor::zeros_like(x);
    for (std::size_t k = 0; k < K; ++k) {
      double ue = 0.0;
      for (std::size_t i = 0; i < n; ++i) ue += cot[i] * post.comp_mean[k][i];
      ue *= post.resp[k];
      for (std::size_t i = 0; i < n; ++i)
        jm_t_u[i] += ue * (post.score[k][i] - s_bar[i]);
    }
    for (std::size_t i = 0; i < n; ++i) jm_t_u[i] += lin[i] * cot[i];

    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < n; ++i) out[i] = (cot[i] - sa * jm_t_u[i]) / root;
    return out;
  }

  std::string describe() const override {
    return "gmm(K=" + std::to_string(p_.components()) +
           ", dim=" + std::to_string(p_.dim()) + ")";
  }

  const GmmParams& params() const { return p_; }

 private:
  struct Posterior {
    std::vector<double> resp;                    // K
    std::vector<std::vector<double>> comp_mean;  // K x n, E[x0 | x, k]
    std::vector<std::vector<double>> score;      // K x n, grad_x log N_k
    std::vector<std::vector<double>> gain;       // K x n, sqrt(abar) v / d
    Tensor mean;                                 // n
  };

  void check_dim(const Tensor& x) const {
    if (x.size() != p_.dim())
      throw InvalidArgumentError("gmm denoiser dimension mismatch: got " +
                                 std::to_string(x.size()) + ", want " +
                                 std::to_string(p_.dim()));
  }

  Posterior posterior(const Tensor& x, double abar) const {
    const std::size_t n = x.size();
    const std::size_t K = p_.components();
    const double sa = std::sqrt(abar);

    Posterior post;
    post.resp.resize(K);
    post.comp_mean.assign(K, std::vector<double>(n));
    post.score.assign(K, std::vector<double>(n));
    post.gain.assign(K, std::vector<double>(n));
    post.mean = Tensor::zeros_like(x);

    // Log responsibilities in the log domain with max subtraction, so tiny
    // 1-abar cannot underflow the softmax.
    std::vector<double> logw(K);
    for (std::size_t k = 0; k < K; ++k) {
      double acc = std::log(p_.weights[k]);
      for (std::size_t i = 0; i < n; ++i) {
        double d = abar * p_.variances[k][i] + (1.0 - abar);
        double r = x[i] - sa * p_.means[k][i];
        acc += -0.5 * std::log(d) - 0.5 * r * r / d;
        post.score[k][i] = -r / d;
        post.gain[k][i] = sa * p_.variances[k][i] / d;
        post.comp_mean[k][i] = p_.means[k][i] + post.gain[k][i] * r;
      }
      logw[k] = acc;
    }

    double lmax = logw[0];
    for (std::size_t k = 1; k < K; ++k) lmax = std::max(lmax, logw[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      post.resp[k] = std::exp(logw[k] - lmax);
      z += post.resp[k];
    }
    for (std::size_t k = 0; k < K; ++k) post.resp[k] /= z;

    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < n; ++i)
        post.mean[i] += post.resp[k] * post.comp_mean[k][i];
    return post;
  }

  GmmParams p_;
};

}  // namespace

void GmmParams::validate() const {
  if (weights.empty()) throw InvalidArgumentError("gmm: no components");
  if (means.size() != weights.size() || variances.size() != weights.size())
    throw InvalidArgumentError("gmm: weights/means/variances count mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InvalidArgumentError("gmm: negative weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw InvalidArgumentError("gmm: weights must sum to 1 within 1e-12");
  const std::size_t n = means[0].size();
  if (n == 0) throw InvalidArgumentError("gmm: zero-dimensional means");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (means[k].size() != n || variances[k].size() != n)
      throw InvalidArgumentError("gmm: component dimension mismatch");
    for (double v : variances[k])
      if (!(v > 0.0)) throw InvalidArgumentError("gmm: variances must be positive");
  }
}

DenoiserPtr make_zero_denoiser() { return std::make_shared<ZeroDenoiser>(); }

DenoiserPtr make_gmm_denoiser(GmmParams params) {
  return std::make_shared<GmmDenoiser>(std::move(params));
}

GmmParams load_gmm_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("gmm spec: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("gmm spec: invalid JSON: ") + e.what());
  }
  GmmParams p;
  try {
    p.weights = doc.at("weights").get<std::vector<double>>();
    p.means = doc.at("means").get<std::vector<std::vector<double>>>();
    p.variances = doc.at("variances").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("gmm spec: bad schema: ") + e.what());
  }
  try {
    p.validate();
  } catch (const InvalidArgumentError& e) {
    throw FormatError(std::string("gmm spec: ") + e.what());
  }
  return p;
}

void save_gmm_spec(const std::string& path, const GmmParams& params) {
  nlohmann::json doc;
  doc["weights"] = params.weights;
  doc["means"] = params.means;
  doc["variances"] = params.variances;
  std::ofstream out(path);
  if (!out) throw FormatError("gmm spec: cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

Tensor sample_gmm(const GmmParams& params, NormalRng& rng, Shape3 shape) {
  if (shape.count() != params.dim())
    throw InvalidArgumentError("gmm sample: shape does not match spec dimension");
  double u = rng.uniform();
  std::size_t k = 0;
  double acc = 0.0;
  for (; k + 1 < params.components(); ++k) {
    acc += params.weights[k];
    if (u < acc) break;
  }
  Tensor x = make_tensor(shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = params.means[k][i] + std::sqrt(params.variances[k][i]) * rng.normal();
  return x;
}

// ---------------------------------------------------------------------------
// MLP

std::vector<double> time_embedding(double abar, std::size_t embed_dim) {
  if (embed_dim % 2 != 0)
    throw InvalidArgumentError("time embedding dimension must be even");
  std::vector<double> emb(embed_dim);
  const std::size_t half = embed_dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(half));
    emb[i] = std::sin(abar * freq);
    emb[half + i] = std::cos(abar * freq);
  }
  return emb;
}

namespace {

class MlpDenoiser final : public Denoiser {
 public:
  MlpDenoiser(MlpModel model, std::string origin)
      : m_(std::move(model)), origin_(std::move(origin)) {}

  Tensor eps(const Tensor& x, double abar) const override {
    validate_inputs(x, abar);
    std::vector<std::vector<double>> acts;
    return forward(x, abar, &acts);
  }

  Tensor vjp(const Tensor& x, double abar, const Tensor& cot) const override {
    validate_inputs(x, abar);
    if (!cot.same_shape(x))
      throw InvalidArgumentError("cotangent shape does not match input");
    std::vector<std::vector<double>> acts;  // post-activation per layer input
    forward(x, abar, &acts);

    std::vector<double> u(cot.values());
    for (std::size_t li = m_.layers.size(); li-- > 0;) {
      const MlpLayer& layer = m_.layers[li];
      if (layer.tanh_act) {
        // acts[li+1] holds tanh(z); tanh' = 1 - tanh^2.
        for (std::size_t o = 0; o < layer.out; ++o) {
          double t = acts[li + 1][o];
          u[o] *= 1.0 - t * t;
        }
      }
      std::vector<double> prev(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = layer.w.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) prev[i] += row[i] * u[o];
      }
      u = std::move(prev);
    }
    // Drop the time-embedding block of the input gradient.
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = u[i];
    return out;
  }

  std::string describe() const override {
    std::string s = "mlp(layers=" + std::to_string(m_.layers.size()) +
                    ", embed=" + std::to_string(m_.embed_dim);
    if (!origin_.empty()) s += ", path=" + origin_;
    return s + ")";
  }

 private:
  Tensor forward(const Tensor& x, double abar,
                 std::vector<std::vector<double>>* acts) const {
    if (m_.layers.empty()) throw InvalidArgumentError("mlp: empty model");
    if (x.size() + m_.embed_dim != m_.layers.front().in)
      throw InvalidArgumentError("mlp: input size " + std::to_string(x.size()) +
                                 " + embed " + std::to_string(m_.embed_dim) +
                                 " does not match first layer in=" +
                                 std::to_string(m_.layers.front().in));
    if (x.size() != m_.data_dim())
      throw InvalidArgumentError("mlp: output layer does not match input size");

    std::vector<double> h(x.values());
    if (m_.embed_dim > 0) {
      std::vector<double> emb = time_embedding(abar, m_.embed_dim);
      h.insert(h.end(), emb.begin(), emb.end());
    }
    acts->push_back(h);
    for (const MlpLayer& layer : m_.layers) {
      std::vector<double> z(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = layer.w.data() + o * layer.in;
        double acc = layer.b[o];
        for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * h[i];
        z[o] = layer.tanh_act ? std::tanh(acc) : acc;
      }
      h = std::move(z);
      acts->push_back(h);
    }
    return Tensor(x.shape(), std::move(h));
  }

  MlpModel m_;
  std::string origin_;
};

}  // namespace

MlpModel load_mlp(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("mlp: cannot open " + manifest_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mlp manifest: invalid JSON: ") + e.what());
  }

  MlpModel m;
  std::vector<std::string> order;
  try {
    m.embed_dim = doc.at("embed_dim").get<std::size_t>();
    for (const auto& l : doc.at("layers")) {
      MlpLayer layer;
      layer.in = l.at("in").get<std::size_t>();
      layer.out = l.at("out").get<std::size_t>();
      std::string act = l.at("activation").get<std::string>();
      if (act == "tanh")
        layer.tanh_act = true;
      else if (act == "identity")
        layer.tanh_act = false;
      else
        throw FormatError("mlp manifest: unknown activation " + act);
      m.layers.push_back(std::move(layer));
    }
    order = doc.at("tensor_order").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mlp manifest: bad schema: ") + e.what());
  }
  if (m.layers.empty()) throw FormatError("mlp manifest: no layers");
  if (m.embed_dim % 2 != 0) throw FormatError("mlp manifest: embed_dim must be even");
  for (std::size_t l = 1; l < m.layers.size(); ++l)
    if (m.layers[l].in != m.layers[l - 1].out)
      throw FormatError("mlp manifest: layer dimensions do not chain at layer " +
                        std::to_string(l));
  if (order.size() != 2 * m.layers.size())
    throw FormatError("mlp manifest: tensor_order must list w and b per layer");

  std::vector<Tensor> blobs = read_dqt1_sequence(dir + "/weights.dqt", order.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const Tensor& w = blobs[2 * l];
    const Tensor& b = blobs[2 * l + 1];
    if (w.ndim() != 2 || w.shape()[0] != m.layers[l].out || w.shape()[1] != m.layers[l].in)
      throw FormatError("mlp weights: tensor " + order[2 * l] +
                        " does not match declared layer shape");
    if (b.ndim() != 1 || b.shape()[0] != m.layers[l].out)
      throw FormatError("mlp weights: tensor " + order[2 * l + 1] +
                        " does not match declared layer shape");
    m.layers[l].w = w.values();
    m.layers[l].b = b.values();
  }
  return m;
}

DenoiserPtr make_mlp_denoiser(MlpModel model, std::string origin) {
  return std::make_shared<MlpDenoiser>(std::move(model), std::move(origin));
}

// ---------------------------------------------------------------------------

namespace {

class CountingDenoiser final : public Denoiser {
 public:
  CountingDenoiser(DenoiserPtr inner, std::shared_ptr<EvalCounter> counter)
      : inner_(std::move(inner)), counter_(std::move(counter)) {}

  Tensor eps(const Tensor& x, double abar) const override {
    counter_->eps_calls.fetch_add(1, std::memory_order_relaxed);
    return inner_->eps(x, abar);
  }
  Tensor vjp(const Tensor& x, double abar, const Tensor& cot) const override {
    counter_->vjp_calls.fetch_add(1, std::memory_order_relaxed);
    return inner_->vjp(x, abar, cot);
  }
  std::string describe() const override { return inner_->describe(); }

 private:
  DenoiserPtr inner_;
  std::shared_ptr<EvalCounter> counter_;
};

}  // namespace

DenoiserPtr make_counting_denoiser(DenoiserPtr inner,
                                   std::shared_ptr<EvalCounter> counter) {
  return std::make_shared<CountingDenoiser>(std::move(inner), std::move(counter));
}

}  // namespace eqr
