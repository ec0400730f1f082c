#include "eqr/operators.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "eqr/errors.hpp"
#include "eqr/rng.hpp"

namespace eqr {

Tensor LinearOperator::null_project(const Tensor& x) const {
  Tensor out = x;
  Tensor rp = range_project(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rp[i];
  return out;
}

double MpReport::max_all() const {
  return std::max({aaa, apa, adjoint, idem, range});
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

Tensor normalized_taps(Tensor taps) {
  double sum = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (taps[i] < 0.0) throw InvalidArgumentError("kernel taps must be non-negative");
    sum += taps[i];
  }
  if (sum <= 0.0) throw InvalidArgumentError("kernel taps sum to zero");
  scale_in_place(taps, 1.0 / sum);
  return taps;
}

void require_odd_side(std::size_t side) {
  if (side % 2 == 0 || side == 0)
    throw InvalidArgumentError("kernel side length must be odd and positive");
}

}  // namespace

BlurKernel gaussian_kernel(std::size_t side, double sigma) {
  require_odd_side(side);
  if (sigma <= 0.0) throw InvalidArgumentError("gaussian sigma must be positive");
  Tensor taps({side, side});
  const double half = (static_cast<double>(side) - 1.0) / 2.0;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      double dy = static_cast<double>(i) - half;
      double dx = static_cast<double>(j) - half;
      taps[i * side + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return BlurKernel{normalized_taps(std::move(taps)), "gaussian"};
}

BlurKernel anisotropic_kernel(std::size_t side, double sigma_x, double sigma_y,
                              double angle_rad) {
  require_odd_side(side);
  if (sigma_x <= 0.0 || sigma_y <= 0.0)
    throw InvalidArgumentError("anisotropic sigmas must be positive");
  Tensor taps({side, side});
  const double half = (static_cast<double>(side) - 1.0) / 2.0;
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      double dy = static_cast<double>(i) - half;
      double dx = static_cast<double>(j) - half;
      double u = ca * dx + sa * dy;
      double v = -sa * dx + ca * dy;
      taps[i * side + j] =
          std::exp(-(u * u / (2.0 * sigma_x * sigma_x) + v * v / (2.0 * sigma_y * sigma_y)));
    }
  return BlurKernel{normalized_taps(std::move(taps)), "anisotropic"};
}

BlurKernel identity_kernel() {
  Tensor taps({1, 1});
  taps[0] = 1.0;
  return BlurKernel{std::move(taps), "identity"};
}

// ---------------------------------------------------------------------------
// Mask

namespace {

class MaskOperator final : public LinearOperator {
 public:
  MaskOperator(const Tensor& mask, std::size_t channels) {
    std::size_t h, w;
    if (mask.ndim() == 2) {
      h = mask.shape()[0];
      w = mask.shape()[1];
    } else if (mask.ndim() == 3 && mask.shape()[0] == 1) {
      h = mask.shape()[1];
      w = mask.shape()[2];
    } else {
      throw InvalidArgumentError("mask must be (H,W) or (1,H,W)");
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
      double v = mask[i];
      if (v != 0.0 && v != 1.0)
        throw InvalidArgumentError("mask entries must be exactly 0 or 1");
      if (v == 1.0) observed_.push_back(i);
    }
    if (observed_.empty())
      throw DegenerateOperatorError("mask observes no pixels");
    in_ = Shape3{channels, h, w};
    out_ = Shape3{channels, 1, observed_.size()};
  }

  Tensor apply(const Tensor& x) const override {
    Tensor y = make_tensor(out_);
    const std::size_t plane = in_.h * in_.w;
    for (std::size_t c = 0; c < in_.c; ++c)
      for (std::size_t m = 0; m < observed_.size(); ++m)
        y[c * observed_.size() + m] = x[c * plane + observed_[m]];
    return y;
  }

  Tensor adjoint(const Tensor& y) const override {
    Tensor x = make_tensor(in_);
    const std::size_t plane = in_.h * in_.w;
    for (std::size_t c = 0; c < in_.c; ++c)
      for (std::size_t m = 0; m < observed_.size(); ++m)
        x[c * plane + observed_[m]] = y[c * observed_.size() + m];
    return x;
  }

  // A A^T = I on the observed subspace, so A^+ = A^T.
  Tensor pinv_apply(const Tensor& y) const override { return adjoint(y); }

  Shape3 in_shape() const override { return in_; }
  Shape3 out_shape() const override { return out_; }
  std::string describe() const override {
    return "mask(observed=" + std::to_string(observed_.size()) + "/" +
           std::to_string(in_.h * in_.w) + ")";
  }

 private:
  Shape3 in_, out_;
  std::vector<std::size_t> observed_;
};

// ---------------------------------------------------------------------------
// Grayscale

class GrayscaleOperator final : public LinearOperator {
 public:
  explicit GrayscaleOperator(Shape3 in) : in_(in), out_{1, in.h, in.w} {
    if (in.c != 3)
      throw InvalidArgumentError("grayscale operator requires 3 channels");
  }

  Tensor apply(const Tensor& x) const override {
    Tensor y = make_tensor(out_);
    const std::size_t plane = in_.h * in_.w;
    for (std::size_t p = 0; p < plane; ++p)
      y[p] = (x[p] + x[plane + p] + x[2 * plane + p]) / 3.0;
    return y;
  }

  Tensor adjoint(const Tensor& y) const override {
    Tensor x = make_tensor(in_);
    const std::size_t plane = in_.h * in_.w;
    for (std::size_t p = 0; p < plane; ++p) {
      double v = y[p] / 3.0;
      x[p] = v;
      x[plane + p] = v;
      x[2 * plane + p] = v;
    }
    return x;
  }

  // A A^T = (1/3) I, hence A^+ = 3 A^T: replicate the mean into all channels.
  Tensor pinv_apply(const Tensor& y) const override {
    Tensor x = make_tensor(in_);
    const std::size_t plane = in_.h * in_.w;
    for (std::size_t p = 0; p < plane; ++p) {
      x[p] = y[p];
      x[plane + p] = y[p];
      x[2 * plane + p] = y[p];
    }
    return x;
  }

  Shape3 in_shape() const override { return in_; }
  Shape3 out_shape() const override { return out_; }
  std::string describe() const override { return "grayscale"; }

 private:
  Shape3 in_, out_;
};

// ---------------------------------------------------------------------------
// Block-average downsampling

class DownsampleOperator final : public LinearOperator {
 public:
  DownsampleOperator(Shape3 in, std::size_t factor) : in_(in), f_(factor) {
    if (factor < 1) throw InvalidArgumentError("downsample factor must be >= 1");
    if (in.h % factor != 0 || in.w % factor != 0)
      throw InvalidArgumentError("image dimensions must be divisible by the factor");
    out_ = Shape3{in.c, in.h / factor, in.w / factor};
  }

  Tensor apply(const Tensor& x) const override {
    Tensor y = make_tensor(out_);
    const double inv = 1.0 / static_cast<double>(f_ * f_);
    for (std::size_t c = 0; c < in_.c; ++c)
      for (std::size_t i = 0; i < out_.h; ++i)
        for (std::size_t j = 0; j < out_.w; ++j) {
          double acc = 0.0;
          for (std::size_t di = 0; di < f_; ++di)
            for (std::size_t dj = 0; dj < f_; ++dj)
              acc += x[(c * in_.h + i * f_ + di) * in_.w + j * f_ + dj];
          y[(c * out_.h + i) * out_.w + j] = acc * inv;
        }
    return y;
  }

  Tensor adjoint(const Tensor& y) const override {
    Tensor x = spread(y);
    scale_in_place(x, 1.0 / static_cast<double>(f_ * f_));
    return x;
  }

  // A A^T = (1/f^2) I, hence A^+ = f^2 A^T: replicate over the block.
  Tensor pinv_apply(const Tensor& y) const override { return spread(y); }

  Shape3 in_shape() const override { return in_; }
  Shape3 out_shape() const override { return out_; }
  std::string describe() const override {
    return "downsample(block-average, factor=" + std::to_string(f_) + ")";
  }

 private:
  Tensor spread(const Tensor& y) const {
    Tensor x = make_tensor(in_);
    for (std::size_t c = 0; c < in_.c; ++c)
      for (std::size_t i = 0; i < out_.h; ++i)
        for (std::size_t j = 0; j < out_.w; ++j) {
          double v = y[(c * out_.h + i) * out_.w + j];
          for (std::size_t di = 0; di < f_; ++di)
            for (std::size_t dj = 0; dj < f_; ++dj)
              x[(c * in_.h + i * f_ + di) * in_.w + j * f_ + dj] = v;
        }
    return x;
  }

  Shape3 in_, out_;
  std::size_t f_;
};

// ---------------------------------------------------------------------------
// Circular blur, diagonal in the frequency basis

// FFTW plan creation is not thread-safe; guard it globally. Execution through
// fftw_execute_dft_r2c on caller-local buffers is safe.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  FftwBuffer(std::size_t n_real, std::size_t n_cplx) {
    real = fftw_alloc_real(n_real);
    cplx = fftw_alloc_complex(n_cplx);
  }
  ~FftwBuffer() {
    fftw_free(real);
    fftw_free(cplx);
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

class BlurOperator final : public LinearOperator {
 public:
  BlurOperator(Shape3 in, const BlurKernel& kernel, double svd_threshold)
      : in_(in), kind_(kernel.kind), threshold_(svd_threshold) {
    const std::size_t kh = kernel.taps.shape()[0];
    const std::size_t kw = kernel.taps.shape()[1];
    if (kh % 2 == 0 || kw % 2 == 0)
      throw InvalidArgumentError("kernel side lengths must be odd");
    if (kh > in.h || kw > in.w)
      throw InvalidArgumentError("kernel larger than image");

    n_cplx_ = in.h * (in.w / 2 + 1);
    FftwBuffer buf(in.h * in.w, n_cplx_);
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex());
      fwd_ = fftw_plan_dft_r2c_2d(static_cast<int>(in.h), static_cast<int>(in.w),
                                  buf.real, buf.cplx, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_2d(static_cast<int>(in.h), static_cast<int>(in.w),
                                  buf.cplx, buf.real, FFTW_ESTIMATE);
    }

    // Embed the kernel with its center at the origin, wrapped circularly.
    std::fill(buf.real, buf.real + in.h * in.w, 0.0);
    const long long ch = static_cast<long long>(kh) / 2;
    const long long cw = static_cast<long long>(kw) / 2;
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        long long dy = static_cast<long long>(i) - ch;
        long long dx = static_cast<long long>(j) - cw;
        std::size_t y = static_cast<std::size_t>(
            ((dy % static_cast<long long>(in.h)) + in.h) % in.h);
        std::size_t x = static_cast<std::size_t>(
            ((dx % static_cast<long long>(in.w)) + in.w) % in.w);
        buf.real[y * in.w + x] += kernel.taps[i * kw + j];
      }
    fftw_execute_dft_r2c(fwd_, buf.real, buf.cplx);
    gains_.resize(n_cplx_);
    for (std::size_t k = 0; k < n_cplx_; ++k)
      gains_[k] = std::complex<double>(buf.cplx[k][0], buf.cplx[k][1]);
  }

  ~BlurOperator() override {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  Tensor apply(const Tensor& x) const override {
    return transform(x, [this](std::complex<double> g) { return g; });
  }

  Tensor adjoint(const Tensor& y) const override {
    return transform(y, [this](std::complex<double> g) { return std::conj(g); });
  }

  Tensor pinv_apply(const Tensor& y) const override {
    return transform(y, [this](std::complex<double> g) {
      return std::abs(g) > threshold_ ? 1.0 / g : std::complex<double>(0.0, 0.0);
    });
  }

  Shape3 in_shape() const override { return in_; }
  Shape3 out_shape() const override { return in_; }
  std::string describe() const override {
    return "blur(" + kind_ + ", circular, threshold=" + std::to_string(threshold_) + ")";
  }

 private:
  template <typename GainFn>
  Tensor transform(const Tensor& x, GainFn gain_of) const {
    if (as_shape3(x).h != in_.h || as_shape3(x).w != in_.w || as_shape3(x).c != in_.c)
      throw InvalidArgumentError("blur operator shape mismatch");
    Tensor out = make_tensor(in_);
    const std::size_t plane = in_.h * in_.w;
    const double norm = 1.0 / static_cast<double>(plane);
    FftwBuffer buf(plane, n_cplx_);
    for (std::size_t c = 0; c < in_.c; ++c) {
      std::copy(x.data() + c * plane, x.data() + (c + 1) * plane, buf.real);
      fftw_execute_dft_r2c(fwd_, buf.real, buf.cplx);
      for (std::size_t k = 0; k < n_cplx_; ++k) {
        std::complex<double> v(buf.cplx[k][0], buf.cplx[k][1]);
        v *= gain_of(gains_[k]);
        buf.cplx[k][0] = v.real();
        buf.cplx[k][1] = v.imag();
      }
      fftw_execute_dft_c2r(bwd_, buf.cplx, buf.real);
      for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = buf.real[p] * norm;
    }
    return out;
  }

  Shape3 in_;
  std::string kind_;
  double threshold_;
  std::size_t n_cplx_;
  std::vector<std::complex<double>> gains_;
  fftw_plan fwd_, bwd_;
};

// ---------------------------------------------------------------------------
// Identity, composite, dense

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Shape3 s) : s_(s) {}
  Tensor apply(const Tensor& x) const override { return x; }
  Tensor adjoint(const Tensor& y) const override { return y; }
  Tensor pinv_apply(const Tensor& y) const override { return y; }
  Shape3 in_shape() const override { return s_; }
  Shape3 out_shape() const override { return s_; }
  std::string describe() const override { return "identity"; }

 private:
  Shape3 s_;
};

class CompositeOperator final : public LinearOperator {
 public:
  CompositeOperator(OperatorPtr outer, OperatorPtr inner)
      : outer_(std::move(outer)), inner_(std::move(inner)) {
    if (!(inner_->out_shape() == outer_->in_shape()))
      throw InvalidArgumentError("composite shapes incompatible: inner out != outer in");
  }

  Tensor apply(const Tensor& x) const override { return outer_->apply(inner_->apply(x)); }
  Tensor adjoint(const Tensor& y) const override {
    return inner_->adjoint(outer_->adjoint(y));
  }
  Tensor pinv_apply(const Tensor& y) const override {
    return inner_->pinv_apply(outer_->pinv_apply(y));
  }
  Shape3 in_shape() const override { return inner_->in_shape(); }
  Shape3 out_shape() const override { return outer_->out_shape(); }
  std::string describe() const override {
    return "composite(" + outer_->describe() + " o " + inner_->describe() + ")";
  }

 private:
  OperatorPtr outer_, inner_;
};

class FactoredDenseOperator final : public LinearOperator {
 public:
  FactoredDenseOperator(std::vector<double> u, std::vector<double> g,
                        std::vector<double> v, Shape3 in, Shape3 out)
      : u_(std::move(u)), g_(std::move(g)), v_(std::move(v)), in_(in), out_(out) {
    n_in_ = in.count();
    n_out_ = out.count();
    r_ = g_.size();
    if (u_.size() != n_out_ * r_ || v_.size() != n_in_ * r_)
      throw InvalidArgumentError("factored operator dimensions inconsistent");
  }

  // A x = U diag(g) V^T x
  Tensor apply(const Tensor& x) const override {
    check(x, n_in_, "apply");
    std::vector<double> t = project(v_, n_in_, x);
    for (std::size_t k = 0; k < r_; ++k) t[k] *= g_[k];
    return expand(u_, n_out_, t, out_);
  }

  Tensor adjoint(const Tensor& y) const override {
    check(y, n_out_, "adjoint");
    std::vector<double> t = project(u_, n_out_, y);
    for (std::size_t k = 0; k < r_; ++k) t[k] *= g_[k];
    return expand(v_, n_in_, t, in_);
  }

  Tensor pinv_apply(const Tensor& y) const override {
    check(y, n_out_, "pinv");
    std::vector<double> t = project(u_, n_out_, y);
    for (std::size_t k = 0; k < r_; ++k) t[k] = g_[k] != 0.0 ? t[k] / g_[k] : 0.0;
    return expand(v_, n_in_, t, in_);
  }

  Shape3 in_shape() const override { return in_; }
  Shape3 out_shape() const override { return out_; }
  std::string describe() const override {
    return "dense(rank<=" + std::to_string(r_) + ")";
  }

 private:
  static void check(const Tensor& t, std::size_t n, const char* what) {
    if (t.size() != n)
      throw InvalidArgumentError(std::string("dense operator ") + what + " size mismatch");
  }
  // cols^T x  (cols stored column-major: cols[k*n + i])
  std::vector<double> project(const std::vector<double>& cols, std::size_t n,
                              const Tensor& x) const {
    std::vector<double> t(r_, 0.0);
    for (std::size_t k = 0; k < r_; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += cols[k * n + i] * x[i];
      t[k] = acc;
    }
    return t;
  }
  Tensor expand(const std::vector<double>& cols, std::size_t n,
                const std::vector<double>& t, Shape3 shape) const {
    Tensor out = make_tensor(shape);
    for (std::size_t k = 0; k < r_; ++k)
      for (std::size_t i = 0; i < n; ++i) out[i] += cols[k * n + i] * t[k];
    return out;
  }

  std::vector<double> u_, g_, v_;
  Shape3 in_, out_;
  std::size_t n_in_, n_out_, r_;
};

// Seeded Gram-Schmidt basis of r orthonormal columns in R^n.
std::vector<double> orthonormal_columns(std::size_t n, std::size_t r, NormalRng& rng) {
  std::vector<double> cols(n * r);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t i = 0; i < n; ++i) cols[k * n + i] = rng.normal();
    for (std::size_t j = 0; j < k; ++j) {
      double proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += cols[k * n + i] * cols[j * n + i];
      for (std::size_t i = 0; i < n; ++i) cols[k * n + i] -= proj * cols[j * n + i];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += cols[k * n + i] * cols[k * n + i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) cols[k * n + i] /= norm;
  }
  return cols;
}

}  // namespace

OperatorPtr make_mask_operator(const Tensor& mask, std::size_t channels) {
  return std::make_shared<MaskOperator>(mask, channels);
}

OperatorPtr make_grayscale_operator(Shape3 in_shape) {
  return std::make_shared<GrayscaleOperator>(in_shape);
}

OperatorPtr make_downsample_operator(Shape3 in_shape, std::size_t factor) {
  return std::make_shared<DownsampleOperator>(in_shape, factor);
}

OperatorPtr make_blur_operator(Shape3 in_shape, const BlurKernel& kernel,
                               double svd_threshold) {
  return std::make_shared<BlurOperator>(in_shape, kernel, svd_threshold);
}

OperatorPtr make_identity_operator(Shape3 shape) {
  return std::make_shared<IdentityOperator>(shape);
}

OperatorPtr make_composite_operator(OperatorPtr outer, OperatorPtr inner) {
  auto op = std::make_shared<CompositeOperator>(std::move(outer), std::move(inner));
  MpReport rep = check_moore_penrose(*op, 16, 0x5eed0c0deULL);
  if (rep.max_all() > 1e-8)
    throw CompositeOperatorError("composite pseudo-inverse candidate is not a pseudo-inverse",
                                 rep.max_all());
  return op;
}

OperatorPtr make_factored_dense_operator(const std::vector<double>& u_cols,
                                         const std::vector<double>& gains,
                                         const std::vector<double>& v_cols,
                                         Shape3 in_shape, Shape3 out_shape) {
  return std::make_shared<FactoredDenseOperator>(u_cols, gains, v_cols, in_shape,
                                                 out_shape);
}

OperatorPtr make_random_dense_operator(std::size_t dim, std::uint64_t seed,
                                       std::size_t zero_gains) {
  if (zero_gains >= dim)
    throw InvalidArgumentError("cannot zero out every gain");
  NormalRng rng(seed);
  std::vector<double> u = orthonormal_columns(dim, dim, rng);
  std::vector<double> v = orthonormal_columns(dim, dim, rng);
  std::vector<double> g(dim);
  for (std::size_t k = 0; k < dim; ++k) g[k] = 0.3 + rng.uniform();
  for (std::size_t k = 0; k < zero_gains; ++k) g[dim - 1 - k] = 0.0;
  Shape3 s{1, 1, dim};
  return make_factored_dense_operator(u, g, v, s, s);
}

MpReport check_moore_penrose(const LinearOperator& op, int probes, std::uint64_t seed) {
  NormalRng rng(seed);
  MpReport rep;
  for (int p = 0; p < probes; ++p) {
    Tensor x = rng.standard_normal(op.in_shape());
    Tensor u = rng.standard_normal(op.out_shape());

    Tensor ax = op.apply(x);
    Tensor aaa = op.apply(op.pinv_apply(ax));
    rep.aaa = std::max(rep.aaa, max_abs_diff(aaa, ax));

    Tensor pu = op.pinv_apply(u);
    Tensor apa = op.pinv_apply(op.apply(pu));
    rep.apa = std::max(rep.apa, max_abs_diff(apa, pu));

    rep.adjoint = std::max(rep.adjoint, std::fabs(dot(ax, u) - dot(x, op.adjoint(u))));

    Tensor n1 = op.null_project(x);
    Tensor n2 = op.null_project(n1);
    rep.idem = std::max(rep.idem, max_abs_diff(n2, n1));

    Tensor range = op.apply(op.pinv_apply(ax));
    rep.range = std::max(rep.range, max_abs_diff(range, ax));
  }
  return rep;
}

}  // namespace eqr
