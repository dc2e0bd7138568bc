#pragma once

#include <span>

#include "reasongr/types.hpp"

namespace reasongr::loss {

struct PenaltyWeights {
  double em = 0.5;
  double pm = 0.5;
  double sm = 0.5;
  double s = 0.5;

  static PenaltyWeights zero() { return {0.0, 0.0, 0.0, 0.0}; }
  double sum() const { return em + pm + sm + s; }
  bool operator==(const PenaltyWeights&) const = default;
};

// Throws ConfigError unless all weights are finite and nonnegative.
void validate(const PenaltyWeights& w);

// Mean over rows of -log softmax(logits[p])[target[p]], max-subtracted.
double cross_entropy(const Matrix& logits, std::span<const TokenId> target);

// d cross_entropy / d logits.
Matrix cross_entropy_grad(const Matrix& logits, std::span<const TokenId> target);

// Positionwise argmax of each logits row (lowest id on ties).
TokenSequence greedy_tokens(const Matrix& logits);

// P = 1 + w_em (1-EM) + w_pm (1-PM) + w_sm (1-SM) + w_s (1-S).
double penalty_factor(std::span<const TokenId> pred, std::span<const TokenId> target,
                      const PenaltyWeights& w);

struct PenalizedLoss {
  double loss = 0.0;
  double penalty = 1.0;
  double cross_entropy = 0.0;
};

// loss = CE * P with P computed from the greedy prediction of `logits` and
// treated as a constant.
PenalizedLoss penalized_loss(const Matrix& logits, std::span<const TokenId> target,
                             const PenaltyWeights& w);

// P * d CE / d logits.
Matrix penalized_loss_grad(const Matrix& logits, std::span<const TokenId> target,
                           const PenaltyWeights& w);

}  // namespace reasongr::loss
