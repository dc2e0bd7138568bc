#include "reasongr/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "reasongr/error.hpp"

namespace reasongr {
namespace {

// Nibble layout: code + 8, so 1..15 encode -7..7 and 8 encodes zero.
std::uint8_t to_nibble(int code) { return static_cast<std::uint8_t>(code + 8); }
int from_nibble(std::uint8_t nibble) { return static_cast<int>(nibble) - 8; }

}  // namespace

QuantizedMatrix QuantizedMatrix::quantize(const Matrix& w, std::size_t block_size) {
  if (block_size == 0) throw ConfigError("quantization block size must be at least 1");
  QuantizedMatrix q;
  q.rows_ = static_cast<std::size_t>(w.rows());
  q.cols_ = static_cast<std::size_t>(w.cols());
  q.block_size_ = block_size;
  const std::size_t n = q.rows_ * q.cols_;
  const double* data = w.data();  // row-major
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) throw ConfigError("cannot quantize a non-finite weight");
  }
  q.scales_.assign((n + block_size - 1) / block_size, 0.0);
  q.packed_.assign((n + 1) / 2, 0);
  for (std::size_t b = 0; b < q.scales_.size(); ++b) {
    const std::size_t begin = b * block_size;
    const std::size_t end = std::min(n, begin + block_size);
    double absmax = 0.0;
    for (std::size_t i = begin; i < end; ++i) absmax = std::max(absmax, std::abs(data[i]));
    const double scale = absmax / kMaxCode;
    q.scales_[b] = scale;
    for (std::size_t i = begin; i < end; ++i) {
      int code = 0;
      if (scale > 0.0) {
        code = static_cast<int>(std::lround(data[i] / scale));
        code = std::clamp(code, -kMaxCode, kMaxCode);
      }
      std::uint8_t nib = to_nibble(code);
      if (i % 2 == 0) {
        q.packed_[i / 2] = static_cast<std::uint8_t>((q.packed_[i / 2] & 0xF0) | nib);
      } else {
        q.packed_[i / 2] = static_cast<std::uint8_t>((q.packed_[i / 2] & 0x0F) | (nib << 4));
      }
    }
  }
  // Unused high nibble of an odd-length tail stays at the zero code.
  if (n % 2 == 1) q.packed_.back() = static_cast<std::uint8_t>((q.packed_.back() & 0x0F) | 0x80);
  return q;
}

int QuantizedMatrix::code(std::size_t flat_index) const {
  std::uint8_t byte = packed_[flat_index / 2];
  return from_nibble(flat_index % 2 == 0 ? (byte & 0x0F) : (byte >> 4));
}

Matrix QuantizedMatrix::dequantize() const {
  Matrix w(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  double* data = w.data();
  const std::size_t n = rows_ * cols_;
  for (std::size_t i = 0; i < n; ++i) data[i] = code(i) * scales_[i / block_size_];
  return w;
}

QuantizedMatrix QuantizedMatrix::from_parts(std::size_t rows, std::size_t cols,
                                            std::size_t block_size, std::vector<double> scales,
                                            std::vector<std::uint8_t> packed) {
  const std::size_t n = rows * cols;
  if (block_size == 0 || scales.size() != (n + block_size - 1) / block_size ||
      packed.size() != (n + 1) / 2) {
    throw SchemaError("quantized matrix parts have inconsistent sizes");
  }
  QuantizedMatrix q;
  q.rows_ = rows;
  q.cols_ = cols;
  q.block_size_ = block_size;
  q.scales_ = std::move(scales);
  q.packed_ = std::move(packed);
  return q;
}

}  // namespace reasongr
