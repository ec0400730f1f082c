#pragma once

#include <stdexcept>
#include <string>

namespace eqr {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   InvalidArgumentError -> exit 2 (usage)
//   FormatError / DegenerateOperatorError / CompositeOperatorError -> exit 3 (data)
//   NumericError -> exit 4 (numeric divergence / domain)
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent file content. Carries the byte offset where the
// problem was detected when that is meaningful (-1 otherwise).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, long long byte_offset = -1)
      : Error(byte_offset >= 0 ? what + " (byte offset " + std::to_string(byte_offset) + ")"
                               : what),
        byte_offset_(byte_offset) {}
  long long byte_offset() const { return byte_offset_; }

 private:
  long long byte_offset_;
};

// Operator observes nothing (e.g. all-zero inpainting mask).
class DegenerateOperatorError : public Error {
 public:
  using Error::Error;
};

// Hand-built composite pseudo-inverse failed its Moore-Penrose probe.
class CompositeOperatorError : public Error {
 public:
  CompositeOperatorError(const std::string& what, double residual)
      : Error(what + " (probe residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Non-finite values, divergence, stale solver state, near-singular systems.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace eqr
