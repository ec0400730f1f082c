#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eqr/tensor.hpp"

namespace eqr {

/// Linear degradation A with exact adjoint and Moore-Penrose pseudo-inverse.
/// Implementations are immutable after construction; apply/adjoint/pinv are
/// pure and safe to call concurrently.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Tensor apply(const Tensor& x) const = 0;
  virtual Tensor adjoint(const Tensor& y) const = 0;
  virtual Tensor pinv_apply(const Tensor& y) const = 0;

  virtual Shape3 in_shape() const = 0;
  virtual Shape3 out_shape() const = 0;
  virtual std::string describe() const = 0;

  /// A^+ A x (projection onto the row space).
  Tensor range_project(const Tensor& x) const { return pinv_apply(apply(x)); }
  /// (I - A^+ A) x.
  Tensor null_project(const Tensor& x) const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// 2-D convolution kernel; taps are non-negative and sum to one.
struct BlurKernel {
  Tensor taps;  // (kh, kw), odd side lengths
  std::string kind;
};

BlurKernel gaussian_kernel(std::size_t side, double sigma);
BlurKernel anisotropic_kernel(std::size_t side, double sigma_x, double sigma_y,
                              double angle_rad);
/// Single unit center tap (A = I).
BlurKernel identity_kernel();

/// Selection of pixels where mask = 1, replicated per channel.
/// mask: (H,W) or (1,H,W) tensor with entries in {0,1}.
OperatorPtr make_mask_operator(const Tensor& mask, std::size_t channels);

/// Per-pixel channel mean, 3 channels in, 1 out. A^+ replicates.
OperatorPtr make_grayscale_operator(Shape3 in_shape);

/// factor x factor block average; A^+ replicates each value over its block.
OperatorPtr make_downsample_operator(Shape3 in_shape, std::size_t factor);

/// Circular (periodic) convolution, diagonal in the 2-D frequency basis.
/// Frequencies with |gain| <= svd_threshold are treated as null space.
OperatorPtr make_blur_operator(Shape3 in_shape, const BlurKernel& kernel,
                               double svd_threshold = 1e-6);

/// outer o inner with the hand-built pseudo-inverse inner^+ o outer^+.
/// The candidate is probe-checked at construction; throws
/// CompositeOperatorError if the Moore-Penrose residual exceeds 1e-8.
OperatorPtr make_composite_operator(OperatorPtr outer, OperatorPtr inner);

OperatorPtr make_identity_operator(Shape3 shape);

/// Dense matrix operator built from an SVD-like factorization
/// A = U diag(gains) V^T with orthonormal columns; the pseudo-inverse is
/// exact by construction. Test/oracle vehicle for arbitrary operators.
OperatorPtr make_factored_dense_operator(const std::vector<double>& u_cols,
                                         const std::vector<double>& gains,
                                         const std::vector<double>& v_cols,
                                         Shape3 in_shape, Shape3 out_shape);

/// Random diagonalizable operator on dim-element tensors (shape (1,1,dim)):
/// orthonormal U,V from seeded Gram-Schmidt, gains in [0.3, 1.3] with
/// zero_gains of them zeroed (a nontrivial null space).
OperatorPtr make_random_dense_operator(std::size_t dim, std::uint64_t seed,
                                       std::size_t zero_gains = 0);

/// Max deviations over random probes for the operator identities.
struct MpReport {
  double aaa = 0.0;       // ||A A^+ A x - A x||_inf
  double apa = 0.0;       // ||A^+ A A^+ y - A^+ y||_inf
  double adjoint = 0.0;   // |<Ax,u> - <x,A^T u>|
  double idem = 0.0;      // ||(I-A^+A)^2 x - (I-A^+A) x||_inf
  double range = 0.0;     // ||A A^+ (A x) - A x||_inf
  double max_all() const;
};

MpReport check_moore_penrose(const LinearOperator& op, int probes, std::uint64_t seed);

}  // namespace eqr
