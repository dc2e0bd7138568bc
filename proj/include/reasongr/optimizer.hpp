#pragma once

#include <map>
#include <string>

#include "json.hpp"

#include "reasongr/model.hpp"

namespace reasongr::optim {

struct AdamConfig {
  double lr_a = 2e-3;
  double lr_ratio = 16.0;  // lr_B = lr_ratio * lr_A
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  double lr_b() const { return lr_ratio * lr_a; }
};

struct Moments {
  Matrix m_a, v_a, m_b, v_b;
};

// Adam moments per adapter plus the shared step count.
struct OptimizerState {
  AdamConfig config;
  std::map<std::string, Moments> moments;
  std::uint64_t step = 0;

  static OptimizerState init(const AdamConfig& config, const model::AdapterSet& adapters);

  nlohmann::json to_json() const;
  static OptimizerState from_json(const nlohmann::json& j);
};

// One Adam step with bias correction; A tensors use lr_A, B tensors lr_B.
// Adapters without a gradient entry are treated as having a zero gradient.
void adam_step(OptimizerState& state, model::AdapterSet& adapters, const model::Gradients& grads);

double global_norm(const model::Gradients& grads);

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_global_norm(model::Gradients& grads, double max_norm);

}  // namespace reasongr::optim
