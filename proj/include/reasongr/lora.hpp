#pragma once

#include <optional>
#include <string>

#include "reasongr/quantize.hpp"
#include "reasongr/types.hpp"

namespace reasongr {

// A frozen base matrix W (d x k, maps R^k -> R^d). When quantized, `weight()`
// is the dequantized cache, built once.
class FrozenLinear {
 public:
  FrozenLinear() = default;
  static FrozenLinear from_quantized(QuantizedMatrix q);
  static FrozenLinear from_dense(Matrix w);

  const Matrix& weight() const { return weight_; }
  const std::optional<QuantizedMatrix>& quantized() const { return quantized_; }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight_.rows()); }
  std::size_t in_dim() const { return static_cast<std::size_t>(weight_.cols()); }

 private:
  std::optional<QuantizedMatrix> quantized_;
  Matrix weight_;
};

// Trainable low-rank delta A * B^T for one base matrix W in R^{d x k}.
struct LoraAdapter {
  std::string target;
  Matrix a;  // d x r
  Matrix b;  // k x r
  double alpha = 0.0;

  std::size_t rank() const { return static_cast<std::size_t>(a.cols()); }
  double scale() const { return alpha / static_cast<double>(rank()); }
  Matrix delta() const { return scale() * a * b.transpose(); }
};

// A has orthonormal columns (Gram-Schmidt over Gaussian draws), B = 0, and
// alpha = r. Throws ConfigError when r is 0 or exceeds min(d, k).
LoraAdapter init_lora(std::string target, std::size_t d, std::size_t k, std::size_t r, Rng& rng);

// Least-squares fit of scale * A B^T to `delta` by alternating normal-equation
// solves, starting from init_lora's orthonormal A. Exact (up to rounding) when
// r = min(d, k).
LoraAdapter fit_lora(const Matrix& delta, std::size_t r, Rng& rng, std::size_t iterations = 20);

// deq(Q) x + (alpha/r) A (B^T x), without forming A B^T.
Vector apply_adapted(const QuantizedMatrix& q, const LoraAdapter* adapter, const Vector& x);
Vector apply_adapted(const FrozenLinear& w, const LoraAdapter* adapter, const Vector& x);

// Row-batched form: each row of `x` (n x k) is an input; returns n x d.
Matrix apply_adapted_rows(const FrozenLinear& w, const LoraAdapter* adapter, const Matrix& x);

}  // namespace reasongr
