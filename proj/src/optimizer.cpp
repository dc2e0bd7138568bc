#include "reasongr/optimizer.hpp"

#include <cmath>

#include "reasongr/error.hpp"
#include "reasongr/io.hpp"

namespace reasongr::optim {
namespace {

void update(Matrix& param, Matrix& m, Matrix& v, const Matrix* grad, double lr,
            const AdamConfig& c, double bias1, double bias2) {
  if (grad) {
    m = c.beta1 * m + (1.0 - c.beta1) * *grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad->cwiseAbs2();
  } else {
    m *= c.beta1;
    v *= c.beta2;
  }
  auto m_hat = m.array() / bias1;
  auto v_hat = v.array() / bias2;
  param.array() -= lr * m_hat / (v_hat.sqrt() + c.eps);
}

}  // namespace

OptimizerState OptimizerState::init(const AdamConfig& config, const model::AdapterSet& adapters) {
  OptimizerState s;
  s.config = config;
  for (const auto& [name, ad] : adapters) {
    s.moments[name] = {Matrix::Zero(ad.a.rows(), ad.a.cols()), Matrix::Zero(ad.a.rows(), ad.a.cols()),
                       Matrix::Zero(ad.b.rows(), ad.b.cols()), Matrix::Zero(ad.b.rows(), ad.b.cols())};
  }
  return s;
}

void adam_step(OptimizerState& state, model::AdapterSet& adapters, const model::Gradients& grads) {
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, ad] : adapters) {
    auto mit = state.moments.find(name);
    if (mit == state.moments.end()) throw ConfigError("no optimizer state for adapter '" + name + "'");
    auto git = grads.find(name);
    const model::LoraGrad* g = git == grads.end() ? nullptr : &git->second;
    Moments& mo = mit->second;
    update(ad.a, mo.m_a, mo.v_a, g ? &g->a : nullptr, c.lr_a, c, bias1, bias2);
    update(ad.b, mo.m_b, mo.v_b, g ? &g->b : nullptr, c.lr_b(), c, bias1, bias2);
  }
}

double global_norm(const model::Gradients& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.a.squaredNorm() + g.b.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(model::Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads) {
      g.a *= factor;
      g.b *= factor;
    }
  }
  return norm;
}

nlohmann::json OptimizerState::to_json() const {
  nlohmann::json mom = nlohmann::json::object();
  for (const auto& [name, m] : moments) {
    mom[name] = {{"m_a", io::matrix_to_json(m.m_a)},
                 {"v_a", io::matrix_to_json(m.v_a)},
                 {"m_b", io::matrix_to_json(m.m_b)},
                 {"v_b", io::matrix_to_json(m.v_b)}};
  }
  return {{"lr_a", config.lr_a}, {"lr_ratio", config.lr_ratio}, {"beta1", config.beta1},
          {"beta2", config.beta2}, {"eps", config.eps}, {"step", step}, {"moments", mom}};
}

OptimizerState OptimizerState::from_json(const nlohmann::json& j) {
  OptimizerState s;
  s.config.lr_a = j.at("lr_a").get<double>();
  s.config.lr_ratio = j.at("lr_ratio").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.eps = j.at("eps").get<double>();
  s.step = j.at("step").get<std::uint64_t>();
  for (const auto& [name, m] : j.at("moments").items()) {
    s.moments[name] = {io::matrix_from_json(m.at("m_a")), io::matrix_from_json(m.at("v_a")),
                       io::matrix_from_json(m.at("m_b")), io::matrix_from_json(m.at("v_b"))};
  }
  return s;
}

}  // namespace reasongr::optim
