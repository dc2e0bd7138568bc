#include "reasongr/lora.hpp"

#include <algorithm>

#include "reasongr/error.hpp"

namespace reasongr {
namespace {

void check_dims(const Matrix& w, const LoraAdapter* adapter, Eigen::Index in) {
  if (w.cols() != in) {
    throw DimensionError("input has " + std::to_string(in) + " features, weight expects " +
                         std::to_string(w.cols()));
  }
  if (adapter && (adapter->a.rows() != w.rows() || adapter->b.rows() != w.cols() ||
                  adapter->a.cols() != adapter->b.cols())) {
    throw DimensionError("adapter '" + adapter->target + "' does not match its base matrix");
  }
}

}  // namespace

FrozenLinear FrozenLinear::from_quantized(QuantizedMatrix q) {
  FrozenLinear f;
  f.weight_ = q.dequantize();
  f.quantized_ = std::move(q);
  return f;
}

FrozenLinear FrozenLinear::from_dense(Matrix w) {
  FrozenLinear f;
  f.weight_ = std::move(w);
  return f;
}

LoraAdapter init_lora(std::string target, std::size_t d, std::size_t k, std::size_t r, Rng& rng) {
  if (r == 0 || r > std::min(d, k)) {
    throw ConfigError("LoRA rank " + std::to_string(r) + " invalid for a " + std::to_string(d) +
                      "x" + std::to_string(k) + " target");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  LoraAdapter ad;
  ad.target = std::move(target);
  ad.a = Matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
  for (Eigen::Index j = 0; j < ad.a.cols(); ++j) {
    // Redraw on the (measure-zero) event of a degenerate column.
    while (true) {
      Vector v(static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
      // Modified Gram-Schmidt, two passes for numerical orthogonality.
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index p = 0; p < j; ++p) {
          v -= ad.a.col(p).dot(v) * ad.a.col(p);
        }
      }
      double norm = v.norm();
      if (norm > 1e-8) {
        ad.a.col(j) = v / norm;
        break;
      }
    }
  }
  ad.b = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r));
  ad.alpha = static_cast<double>(r);
  return ad;
}

LoraAdapter fit_lora(const Matrix& delta, std::size_t r, Rng& rng, std::size_t iterations) {
  LoraAdapter ad = init_lora("fit", static_cast<std::size_t>(delta.rows()),
                             static_cast<std::size_t>(delta.cols()), r, rng);
  const double s = ad.scale();
  for (std::size_t it = 0; it < iterations; ++it) {
    // B^T = (A^T A)^-1 A^T delta / s, then A = delta B (B^T B)^-1 / s.
    Matrix bt = (ad.a.transpose() * ad.a).ldlt().solve(ad.a.transpose() * delta) / s;
    ad.b = bt.transpose();
    Matrix at = (ad.b.transpose() * ad.b).ldlt().solve(ad.b.transpose() * delta.transpose()) / s;
    ad.a = at.transpose();
  }
  return ad;
}

Vector apply_adapted(const FrozenLinear& w, const LoraAdapter* adapter, const Vector& x) {
  check_dims(w.weight(), adapter, x.size());
  Vector y = w.weight() * x;
  if (adapter) {
    Vector u = adapter->b.transpose() * x;
    y += adapter->scale() * (adapter->a * u);
  }
  return y;
}

Vector apply_adapted(const QuantizedMatrix& q, const LoraAdapter* adapter, const Vector& x) {
  return apply_adapted(FrozenLinear::from_quantized(q), adapter, x);
}

Matrix apply_adapted_rows(const FrozenLinear& w, const LoraAdapter* adapter, const Matrix& x) {
  check_dims(w.weight(), adapter, x.cols());
  Matrix y = x * w.weight().transpose();
  if (adapter) {
    Matrix u = x * adapter->b;
    y += adapter->scale() * (u * adapter->a.transpose());
  }
  return y;
}

}  // namespace reasongr
