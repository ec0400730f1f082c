#include "eqr/tensor.hpp"

#include <cassert>
#include <cmath>

#include "eqr/errors.hpp"

namespace eqr {

namespace {
std::size_t shape_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_count(shape_))
    throw InvalidArgumentError("tensor value count does not match shape");
}


bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Shape3 as_shape3(const Tensor& t) {
  if (t.ndim() != 3) throw InvalidArgumentError("expected a (C,H,W) tensor");
  return Shape3{t.shape()[0], t.shape()[1], t.shape()[2]};
}

Tensor make_tensor(Shape3 s) { return Tensor(s.dims()); }

Tensor operator+(const Tensor& a, const Tensor& b) {
  assert(a.size() == b.size());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  assert(a.size() == b.size());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

void add_in_place(Tensor& a, const Tensor& b) {
  assert(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void scale_in_place(Tensor& a, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

double dot(const Tensor& a, const Tensor& b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sup_norm(const Tensor& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

double l2_norm_sq(const Tensor& a) { return dot(a, a); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  assert(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double stack_sup_norm(const TensorStack& s) {
  double m = 0.0;
  for (const Tensor& t : s) m = std::max(m, sup_norm(t));
  return m;
}

double stack_max_abs_diff(const TensorStack& a, const TensorStack& b) {
  assert(a.size() == b.size());
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, max_abs_diff(a[k], b[k]));
  return m;
}

std::vector<double> flatten_stack(const TensorStack& s) {
  std::size_t n = 0;
  for (const Tensor& t : s) n += t.size();
  std::vector<double> flat;
  flat.reserve(n);
  for (const Tensor& t : s) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

TensorStack unflatten_stack(const std::vector<double>& flat, const TensorStack& like) {
  TensorStack out;
  out.reserve(like.size());
  std::size_t pos = 0;
  for (const Tensor& t : like) {
    std::vector<double> chunk(flat.begin() + pos, flat.begin() + pos + t.size());
    out.emplace_back(t.shape(), std::move(chunk));
    pos += t.size();
  }
  assert(pos == flat.size());
  return out;
}

}  // namespace eqr
