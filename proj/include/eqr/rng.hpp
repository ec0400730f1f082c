#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "eqr/tensor.hpp"

namespace eqr {

/// Seeded random stream with a pinned, standard-specified algorithm:
/// mt19937_64 for the raw bits, uniforms as (x >> 11) * 2^-53, and normals via
/// the polar Box-Muller transform. std::normal_distribution is deliberately
/// avoided (its output is implementation-defined); this stream reproduces
/// bit-exactly across compilers and platforms. One instance = one logical
/// stream; never share an instance across threads.
class NormalRng {
 public:
  explicit NormalRng(std::uint64_t seed) : engine_(seed) {}

  static std::string algorithm() { return "mt19937_64/polar-box-muller"; }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform();

  double normal();

  Tensor standard_normal(const std::vector<std::size_t>& shape);
  Tensor standard_normal(Shape3 shape) { return standard_normal(shape.dims()); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace eqr
