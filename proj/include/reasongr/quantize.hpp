#pragma once

#include <cstdint>
#include <vector>

#include "reasongr/types.hpp"

namespace reasongr {

// Symmetric block-wise int4 quantization. The matrix is flattened row-major and
// cut into blocks of `block_size` elements; each block stores one scale
// s = absmax / 7 and signed codes in [-7, 7], packed two per byte.
class QuantizedMatrix {
 public:
  static constexpr int kMaxCode = 7;

  QuantizedMatrix() = default;

  static QuantizedMatrix quantize(const Matrix& w, std::size_t block_size = 64);

  Matrix dequantize() const;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t block_count() const { return scales_.size(); }
  const std::vector<double>& scales() const { return scales_; }
  const std::vector<std::uint8_t>& packed_codes() const { return packed_; }

  int code(std::size_t flat_index) const;

  // Reassembles a matrix from serialized parts; validates sizes.
  static QuantizedMatrix from_parts(std::size_t rows, std::size_t cols, std::size_t block_size,
                                    std::vector<double> scales, std::vector<std::uint8_t> packed);

  bool operator==(const QuantizedMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t block_size_ = 64;
  std::vector<double> scales_;
  std::vector<std::uint8_t> packed_;
};

}  // namespace reasongr
