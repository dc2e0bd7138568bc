#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "reasongr/error.hpp"
#include "reasongr/loss.hpp"
#include "reasongr/metrics.hpp"

using namespace reasongr;

namespace {

template <typename T>
metrics::Scores sc(const std::vector<T>& p, const std::vector<T>& g) {
  return metrics::score(std::span<const T>(p), std::span<const T>(g));
}

}  // namespace

TEST_CASE("uniform logits give ln |V|") {
  Matrix logits = Matrix::Zero(3, 10);
  TokenSequence tgt{1, 4, 7};
  CHECK(loss::cross_entropy(logits, tgt) == doctest::Approx(std::log(10.0)));
}

TEST_CASE("penalty factor of a fully wrong prediction") {
  TokenSequence pred{7, 8, 9};
  TokenSequence gold{1, 2, 3};
  CHECK(loss::penalty_factor(pred, gold, {}) == doctest::Approx(2.5));
  // SM is zero; S is one because lengths match.
  CHECK(loss::penalty_factor(pred, gold, {1, 1, 1, 1}) == doctest::Approx(4.0));
}

TEST_CASE("metric worked examples") {
  std::vector<std::string> gold{"a", "b", "c"};
  auto s = sc<std::string>({"a", "b", "x"}, gold);
  CHECK(s.em == 0.0);
  CHECK(s.pm == doctest::Approx(2.0 / 3.0));
  CHECK(s.sm == doctest::Approx(0.5));
  CHECK(s.s_score == 1.0);

  auto t = sc<std::string>({"c", "d"}, {"a", "b", "c"});
  CHECK(t.sm == doctest::Approx(0.25));
  auto u = sc<std::string>({"a"}, {"a", "b"});
  CHECK(u.s_score == doctest::Approx(0.5));
  CHECK(u.pm == doctest::Approx(0.5));

  auto rec = metrics::score_surfaces("q", "acme-2019-revenue", "acme-2019-revenue");
  CHECK(rec.scores.em == 1.0);
  auto rec2 = metrics::score_surfaces("q", "acme-2018", "acme-2019-revenue");
  CHECK(rec2.scores.pm == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("aggregate and csv") {
  std::vector<metrics::QueryRecord> recs;
  recs.push_back(metrics::score_surfaces("a", "x-1", "x-1"));
  recs.push_back(metrics::score_surfaces("b", "y-1", "x-1"));
  auto r = metrics::aggregate(recs);
  CHECK(r.n == 2);
  CHECK(r.em == doctest::Approx(0.5));
  CHECK(r.pm == doctest::Approx(0.75));
  CHECK(metrics::csv_row("m", "test", r).rfind("m,test,0.5", 0) == 0);
  CHECK_THROWS_AS(metrics::aggregate({}), ConfigError);
  CHECK(std::string(metrics::kCsvHeader) == "Model,Split,EM,PM,SM,S");
}

TEST_CASE("metric laws over random pairs") {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  for (int i = 0; i < 2000; ++i) {
    auto g = testutil::random_tokens(len(rng), 9, rng, 0);
    auto p = i % 5 == 0 ? g : testutil::random_tokens(len(rng), 9, rng, 0);
    auto s = sc(p, g);
    for (double v : {s.em, s.pm, s.sm, s.s_score}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (s.em == 1.0) {
      CHECK(s.pm == 1.0);
      CHECK(s.sm == 1.0);
      CHECK(s.s_score == 1.0);
    }
    auto shuffled = p;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(sc(shuffled, g).sm == s.sm);
    const double pf = loss::penalty_factor(p, g, {});
    CHECK(pf >= 1.0);
    CHECK(pf <= 3.0);
  }
}

TEST_CASE("penalized loss with zero weights is exactly cross-entropy") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    Matrix logits = testutil::random_matrix(5, 12, rng, 2.0);
    auto tgt = testutil::random_tokens(5, 12, rng, 0);
    auto pl = loss::penalized_loss(logits, tgt, loss::PenaltyWeights::zero());
    CHECK(pl.penalty == 1.0);
    CHECK(pl.loss == loss::cross_entropy(logits, tgt));
    CHECK(loss::penalized_loss_grad(logits, tgt, loss::PenaltyWeights::zero()) ==
          loss::cross_entropy_grad(logits, tgt));
  }
}

TEST_CASE("penalty uses the greedy prediction and scales the gradient") {
  Rng rng(13);
  Matrix logits = testutil::random_matrix(4, 8, rng);
  auto tgt = testutil::random_tokens(4, 8, rng, 0);
  auto pred = loss::greedy_tokens(logits);
  const double p = loss::penalty_factor(pred, tgt, {});
  auto pl = loss::penalized_loss(logits, tgt, {});
  CHECK(pl.penalty == p);
  CHECK(pl.loss == doctest::Approx(p * pl.cross_entropy));
  CHECK(loss::penalized_loss_grad(logits, tgt, {}).isApprox(p * loss::cross_entropy_grad(logits, tgt)));
  CHECK_THROWS_AS(loss::validate({-1, 0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(loss::validate({NAN, 0, 0, 0}), ConfigError);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  Rng rng(14);
  Matrix logits = testutil::random_matrix(3, 6, rng);
  TokenSequence tgt{0, 3, 5};
  Matrix g = loss::cross_entropy_grad(logits, tgt);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Matrix up = logits, down = logits;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double num = (loss::cross_entropy(up, tgt) - loss::cross_entropy(down, tgt)) / (2 * h);
    CHECK(g.data()[i] == doctest::Approx(num).epsilon(1e-6));
  }
}
