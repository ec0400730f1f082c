#include "eqr/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "eqr/errors.hpp"

namespace eqr {

namespace {

long long stream_offset(std::istream& in) {
  auto pos = in.tellg();
  return pos == std::istream::pos_type(-1) ? -1 : static_cast<long long>(pos);
}

// Skips PNM whitespace and '#' comments, then parses one unsigned decimal.
std::size_t read_pnm_number(std::istream& in, const char* what) {
  int ch = in.get();
  for (;;) {
    while (ch != EOF && std::isspace(ch)) ch = in.get();
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
      continue;
    }
    break;
  }
  if (ch == EOF)
    throw FormatError(std::string("pnm: unexpected end of header before ") + what,
                      stream_offset(in));
  if (!std::isdigit(ch))
    throw FormatError(std::string("pnm: expected digit for ") + what, stream_offset(in));
  std::size_t value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + static_cast<std::size_t>(ch - '0');
    if (value > 1000000000ULL)
      throw FormatError(std::string("pnm: absurd value for ") + what, stream_offset(in));
    ch = in.get();
  }
  if (ch != EOF) in.unget();
  return value;
}

constexpr double kByteToUnit = 2.0 / 255.0;

}  // namespace

Tensor read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("pnm: cannot open " + path);

  char magic[2];
  if (!in.read(magic, 2)) throw FormatError("pnm: truncated magic", 0);
  std::size_t channels;
  if (magic[0] == 'P' && magic[1] == '5')
    channels = 1;
  else if (magic[0] == 'P' && magic[1] == '6')
    channels = 3;
  else
    throw FormatError("pnm: bad magic (want P5 or P6)", 0);

  std::size_t width = read_pnm_number(in, "width");
  std::size_t height = read_pnm_number(in, "height");
  std::size_t maxval = read_pnm_number(in, "maxval");
  if (width == 0 || height == 0)
    throw FormatError("pnm: zero dimension", stream_offset(in));
  if (maxval != 255)
    throw FormatError("pnm: only maxval 255 is supported", stream_offset(in));
  int sep = in.get();
  if (sep == EOF || !std::isspace(sep))
    throw FormatError("pnm: missing whitespace after maxval", stream_offset(in));

  std::size_t count = channels * height * width;
  std::vector<unsigned char> raw(count);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count)))
    throw FormatError("pnm: truncated pixel data", stream_offset(in));

  // Interleaved bytes -> planar (C,H,W) in [-1, 1].
  Tensor img({channels, height, width});
  const std::size_t plane = height * width;
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < channels; ++c)
      img[c * plane + p] = static_cast<double>(raw[p * channels + c]) * kByteToUnit - 1.0;
  return img;
}

void write_pnm(const std::string& path, const Tensor& image) {
  Shape3 s = as_shape3(image);
  if (s.c != 1 && s.c != 3)
    throw InvalidArgumentError("pnm: image must have 1 or 3 channels");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("pnm: cannot open " + path + " for writing");
  out << (s.c == 1 ? "P5" : "P6") << "\n" << s.w << " " << s.h << "\n255\n";

  const std::size_t plane = s.h * s.w;
  std::vector<unsigned char> raw(s.c * plane);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < s.c; ++c) {
      double v = image[c * plane + p];
      double u = (v + 1.0) / 2.0 * 255.0;
      u = std::floor(u + 0.5);  // round half away from zero (u >= 0 here)
      u = std::min(255.0, std::max(0.0, u));
      raw[p * s.c + c] = static_cast<unsigned char>(u);
    }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw FormatError("pnm: write failed for " + path);
}

// ---------------------------------------------------------------------------
// DQT1

namespace {

void put_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw FormatError(std::string("dqt1: truncated ") + what, stream_offset(in));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64_le(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(out, bits);
}

double get_f64_le(std::istream& in) {
  std::uint64_t bits = get_u64_le(in, "payload");
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::size_t kMaxNdim = 8;

}  // namespace

Tensor read_dqt1(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("dqt1: truncated magic", stream_offset(in));
  if (std::memcmp(magic, "DQT1", 4) != 0)
    throw FormatError("dqt1: bad magic", stream_offset(in) - 4);

  unsigned char head[4];
  if (!in.read(reinterpret_cast<char*>(head), 4))
    throw FormatError("dqt1: truncated header", stream_offset(in));
  if (head[0] != kDtypeF64)
    throw FormatError("dqt1: unsupported dtype code " + std::to_string(head[0]), 4);
  std::size_t ndim = head[1];
  if (head[2] != 0 || head[3] != 0)
    throw FormatError("dqt1: reserved header bytes must be zero", 6);
  if (ndim > kMaxNdim)
    throw FormatError("dqt1: ndim " + std::to_string(ndim) + " exceeds limit", 5);

  std::vector<std::size_t> shape(ndim);
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    std::uint64_t dim = get_u64_le(in, "dims");
    if (dim == 0 || dim > (1ULL << 32))
      throw FormatError("dqt1: dimension out of range", stream_offset(in) - 8);
    if (count > std::numeric_limits<std::size_t>::max() / dim)
      throw FormatError("dqt1: dimension product overflows", stream_offset(in) - 8);
    shape[d] = static_cast<std::size_t>(dim);
    count *= shape[d];
  }

  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = get_f64_le(in);
  return Tensor(std::move(shape), std::move(values));
}

void write_dqt1(std::ostream& out, const Tensor& tensor) {
  out.write("DQT1", 4);
  unsigned char head[4] = {kDtypeF64, static_cast<unsigned char>(tensor.ndim()), 0, 0};
  if (tensor.ndim() > kMaxNdim)
    throw InvalidArgumentError("dqt1: tensor rank exceeds format limit");
  out.write(reinterpret_cast<const char*>(head), 4);
  for (std::size_t d : tensor.shape()) put_u64_le(out, d);
  for (std::size_t i = 0; i < tensor.size(); ++i) put_f64_le(out, tensor[i]);
}

Tensor read_dqt1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("dqt1: cannot open " + path);
  Tensor t = read_dqt1(in);
  if (in.peek() != EOF)
    throw FormatError("dqt1: trailing bytes after payload", stream_offset(in));
  return t;
}

void write_dqt1(const std::string& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("dqt1: cannot open " + path + " for writing");
  write_dqt1(out, tensor);
  if (!out) throw FormatError("dqt1: write failed for " + path);
}

std::vector<Tensor> read_dqt1_sequence(const std::string& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("dqt1: cannot open " + path);
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(read_dqt1(in));
  if (in.peek() != EOF)
    throw FormatError("dqt1: trailing bytes after last record", stream_offset(in));
  return out;
}

void write_dqt1_sequence(const std::string& path, const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("dqt1: cannot open " + path + " for writing");
  for (const Tensor& t : tensors) write_dqt1(out, t);
  if (!out) throw FormatError("dqt1: write failed for " + path);
}

}  // namespace eqr
