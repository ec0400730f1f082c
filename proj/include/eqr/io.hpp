#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eqr/tensor.hpp"

namespace eqr {

// ---------------------------------------------------------------------------
// PNM (binary P5 grayscale / P6 RGB, maxval 255)
//
// Pixels map linearly between 8-bit storage and the internal [-1, 1] range:
// 0 -> -1, 255 -> +1 on read; the inverse with round-half-away on write, so
// write(read(file)) reproduces the file byte for byte.

/// Reads P5 into a (1,H,W) tensor, P6 into (3,H,W).
Tensor read_pnm(const std::string& path);

/// Writes (1,H,W) as P5 and (3,H,W) as P6; values are clamped to [-1, 1].
void write_pnm(const std::string& path, const Tensor& image);

// ---------------------------------------------------------------------------
// DQT1 tensor container
//
// Layout: magic "DQT1" | u8 dtype (1 = float64 little-endian) | u8 ndim |
// 2 reserved zero bytes | ndim x u64 LE dims | row-major float64 payload.
// Round-trips are bitwise; malformed inputs raise FormatError.

Tensor read_dqt1(const std::string& path);
void write_dqt1(const std::string& path, const Tensor& tensor);

/// Stream forms, used for files holding several concatenated records.
Tensor read_dqt1(std::istream& in);
void write_dqt1(std::ostream& out, const Tensor& tensor);

/// Reads exactly `count` concatenated records and requires EOF afterwards.
std::vector<Tensor> read_dqt1_sequence(const std::string& path, std::size_t count);
void write_dqt1_sequence(const std::string& path, const std::vector<Tensor>& tensors);

}  // namespace eqr
