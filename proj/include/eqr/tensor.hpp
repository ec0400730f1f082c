#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace eqr {

/// Dense n-dimensional double tensor, row-major. The universal value carrier
/// for images (C,H,W), stacked chains and flat weight blobs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }
  /// 1-D tensor from literal values.
  static Tensor from_values(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Shape of an image-like tensor. Operators speak this.
struct Shape3 {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t count() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
  std::vector<std::size_t> dims() const { return {c, h, w}; }
};

Shape3 as_shape3(const Tensor& t);
Tensor make_tensor(Shape3 s);

// Elementwise helpers. All require matching sizes (unchecked hot paths assert).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
void add_in_place(Tensor& a, const Tensor& b);
void axpy(double alpha, const Tensor& x, Tensor& y);  // y += alpha*x
void scale_in_place(Tensor& a, double s);
double dot(const Tensor& a, const Tensor& b);
double sup_norm(const Tensor& a);
double l2_norm_sq(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Stack of T same-shaped tensors; row k of a sampling stack holds x_{T-1-k}.
using TensorStack = std::vector<Tensor>;

double stack_sup_norm(const TensorStack& s);
double stack_max_abs_diff(const TensorStack& a, const TensorStack& b);
std::vector<double> flatten_stack(const TensorStack& s);
TensorStack unflatten_stack(const std::vector<double>& flat, const TensorStack& like);

}  // namespace eqr
