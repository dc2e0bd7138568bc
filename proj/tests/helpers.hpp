#pragma once

#include <string>
#include <vector>

#include "reasongr/corpus.hpp"
#include "reasongr/model.hpp"
#include "reasongr/types.hpp"

namespace testutil {

inline reasongr::corpus::Document make_doc(std::string raw_id, std::vector<std::string> pre,
                                           std::vector<std::vector<std::string>> table = {},
                                           std::vector<std::string> post = {}) {
  reasongr::corpus::Document d;
  d.raw_id = std::move(raw_id);
  auto slash = d.raw_id.find('/');
  d.company = d.raw_id.substr(0, slash);
  d.year = d.raw_id.substr(slash + 1, 4);
  d.pre_text = std::move(pre);
  d.post_text = std::move(post);
  d.table = std::move(table);
  return d;
}

inline reasongr::Matrix random_matrix(std::size_t r, std::size_t c, reasongr::Rng& rng,
                                      double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  reasongr::Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Adapters with random (nonzero) A and B so every gradient path is live.
inline reasongr::model::AdapterSet random_adapters(const reasongr::model::SeqModel& m,
                                                   std::size_t rank, reasongr::Rng& rng,
                                                   double stddev = 0.3) {
  auto targets = reasongr::model::SeqModel::default_adapter_targets();
  auto set = reasongr::model::init_adapters(m, targets, rank, rng);
  for (auto& [name, ad] : set) {
    ad.a = random_matrix(ad.a.rows(), ad.a.cols(), rng, stddev);
    ad.b = random_matrix(ad.b.rows(), ad.b.cols(), rng, stddev);
  }
  return set;
}

inline reasongr::TokenSequence random_tokens(std::size_t len, std::size_t vocab, reasongr::Rng& rng,
                                             reasongr::TokenId lo = 5) {
  std::uniform_int_distribution<reasongr::TokenId> pick(lo, static_cast<reasongr::TokenId>(vocab) - 1);
  reasongr::TokenSequence out(len);
  for (auto& t : out) t = pick(rng);
  return out;
}

}  // namespace testutil

#include <algorithm>
#include <cmath>

#include "reasongr/loss.hpp"

namespace testutil {

struct FdResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Five-point central differences of P * CE (P frozen at the unperturbed
// prediction) against the analytic adapter gradients, over every A and B entry.
inline FdResult finite_difference_check(const reasongr::model::SeqModel& m,
                                        reasongr::model::AdapterSet adapters,
                                        const reasongr::TokenSequence& src,
                                        const reasongr::TokenSequence& tgt,
                                        const reasongr::loss::PenaltyWeights& w, double h = 1e-3) {
  using namespace reasongr;
  model::TeacherForcedPass pass(m, adapters, src, tgt);
  const double p = loss::penalized_loss(pass.logits(), tgt, w).penalty;
  model::Gradients grads = model::backward(m, adapters, src, tgt, p);

  auto objective = [&](const model::AdapterSet& ads) {
    return p * model::TeacherForcedPass(m, ads, src, tgt).cross_entropy();
  };
  FdResult res;
  for (auto& [name, ad] : adapters) {
    for (int which = 0; which < 2; ++which) {
      Matrix& param = which == 0 ? ad.a : ad.b;
      const Matrix& g = which == 0 ? grads.at(name).a : grads.at(name).b;
      for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        auto at = [&](double offset) {
          param.data()[i] = saved + offset;
          const double v = objective(adapters);
          param.data()[i] = saved;
          return v;
        };
        const double numeric =
            (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        const double analytic = g.data()[i];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        res.max_rel_error = std::max(res.max_rel_error, std::abs(numeric - analytic) / denom);
        ++res.coordinates;
      }
    }
  }
  return res;
}

}  // namespace testutil
