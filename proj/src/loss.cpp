#include "reasongr/loss.hpp"

#include <cmath>
#include <string>

#include "reasongr/error.hpp"
#include "reasongr/metrics.hpp"

namespace reasongr::loss {
namespace {

void check_shapes(const Matrix& logits, std::span<const TokenId> target) {
  if (static_cast<std::size_t>(logits.rows()) != target.size()) {
    throw DimensionError("logits have " + std::to_string(logits.rows()) + " rows but target has " +
                         std::to_string(target.size()) + " tokens");
  }
  for (TokenId t : target) {
    if (t < 0 || t >= logits.cols()) throw DimensionError("target token outside the vocabulary");
  }
}

}  // namespace

void validate(const PenaltyWeights& w) {
  for (double v : {w.em, w.pm, w.sm, w.s}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("penalty weights must be finite and >= 0");
  }
}

double cross_entropy(const Matrix& logits, std::span<const TokenId> target) {
  check_shapes(logits, target);
  if (target.empty()) return 0.0;
  double total = 0.0;
  for (Eigen::Index p = 0; p < logits.rows(); ++p) {
    const double mx = logits.row(p).maxCoeff();
    const double lse = mx + std::log((logits.row(p).array() - mx).exp().sum());
    total += lse - logits(p, target[static_cast<std::size_t>(p)]);
  }
  return total / static_cast<double>(target.size());
}

Matrix cross_entropy_grad(const Matrix& logits, std::span<const TokenId> target) {
  check_shapes(logits, target);
  Matrix g(logits.rows(), logits.cols());
  if (target.empty()) return g.setZero();
  const double inv_t = 1.0 / static_cast<double>(target.size());
  for (Eigen::Index p = 0; p < logits.rows(); ++p) {
    const double mx = logits.row(p).maxCoeff();
    auto e = (logits.row(p).array() - mx).exp();
    g.row(p) = (e / e.sum()) * inv_t;
    g(p, target[static_cast<std::size_t>(p)]) -= inv_t;
  }
  return g;
}

TokenSequence greedy_tokens(const Matrix& logits) {
  TokenSequence out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index p = 0; p < logits.rows(); ++p) {
    Eigen::Index best = 0;
    for (Eigen::Index v = 1; v < logits.cols(); ++v) {
      if (logits(p, v) > logits(p, best)) best = v;
    }
    out[static_cast<std::size_t>(p)] = static_cast<TokenId>(best);
  }
  return out;
}

double penalty_factor(std::span<const TokenId> pred, std::span<const TokenId> target,
                      const PenaltyWeights& w) {
  const auto s = metrics::score(pred, target);
  return 1.0 + w.em * (1.0 - s.em) + w.pm * (1.0 - s.pm) + w.sm * (1.0 - s.sm) +
         w.s * (1.0 - s.s_score);
}

PenalizedLoss penalized_loss(const Matrix& logits, std::span<const TokenId> target,
                             const PenaltyWeights& w) {
  PenalizedLoss out;
  out.cross_entropy = cross_entropy(logits, target);
  const TokenSequence pred = greedy_tokens(logits);
  out.penalty = penalty_factor(pred, target, w);
  out.loss = out.cross_entropy * out.penalty;
  return out;
}

Matrix penalized_loss_grad(const Matrix& logits, std::span<const TokenId> target,
                           const PenaltyWeights& w) {
  const TokenSequence pred = greedy_tokens(logits);
  return penalty_factor(pred, target, w) * cross_entropy_grad(logits, target);
}

}  // namespace reasongr::loss
