#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "reasongr/bm25.hpp"

using namespace reasongr;
using Docs = std::vector<std::vector<std::string>>;

namespace {

double oracle(const Docs& docs, const std::vector<std::string>& q, std::size_t d, double k1 = 1.5,
              double b = 0.75) {
  const double n = static_cast<double>(docs.size());
  double avg = 0;
  for (const auto& x : docs) avg += static_cast<double>(x.size());
  avg /= n;
  double total = 0;
  for (const auto& t : q) {
    double df = 0;
    for (const auto& x : docs) df += std::count(x.begin(), x.end(), t) > 0 ? 1 : 0;
    const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), t));
    const double len = static_cast<double>(docs[d].size());
    total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
  }
  return total;
}

}  // namespace

TEST_CASE("scores match the formula") {
  Docs docs{{"cash", "flow", "cash"}, {"debt", "ratio"}, {"cash", "debt", "equity", "notes"}};
  auto idx = bm25::InvertedIndex::build_from_tokens(docs);
  CHECK(idx.doc_count() == 3);
  CHECK(idx.average_length() == doctest::Approx(3.0));
  CHECK(idx.idf("cash") == doctest::Approx(std::log(1.5 / 2.5 + 1)));
  std::vector<std::string> q{"cash", "debt", "cash"};
  for (std::size_t d = 0; d < 3; ++d) CHECK(idx.score(q, d) == doctest::Approx(oracle(docs, q, d)).epsilon(1e-12));
}

TEST_CASE("random corpora against the oracle, top-1 tie rule") {
  Rng rng(5);
  std::vector<std::string> lex{"a", "b", "c", "d", "e", "f", "g"};
  std::uniform_int_distribution<std::size_t> nd(1, 12), len(1, 9), w(0, lex.size() - 1);
  for (int trial = 0; trial < 50; ++trial) {
    Docs docs(nd(rng));
    for (auto& d : docs) {
      d.resize(len(rng));
      for (auto& t : d) t = lex[w(rng)];
    }
    auto idx = bm25::InvertedIndex::build_from_tokens(docs);
    std::vector<std::string> q(3);
    for (auto& t : q) t = lex[w(rng)];
    std::size_t best = 0;
    double best_score = -1;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const double o = oracle(docs, q, d);
      CHECK(std::abs(idx.score(q, d) - o) <= 1e-10);
      CHECK(idx.score(q, d) >= 0.0);
      if (o > best_score + 1e-12) {
        best_score = o;
        best = d;
      }
    }
    CHECK(idx.top1(q) == best);
  }
}

TEST_CASE("ties go to the lowest index and unknown terms score zero") {
  Docs docs{{"x", "y"}, {"x", "y"}, {"z"}};
  auto idx = bm25::InvertedIndex::build_from_tokens(docs);
  std::vector<std::string> q{"x"};
  CHECK(idx.top1(q) == 0);
  std::vector<std::string> none{"nothing"};
  CHECK(idx.score(none, 0) == 0.0);
  CHECK(idx.top1(none) == 0);
}

TEST_CASE("longer documents score lower for the same term frequency") {
  Docs docs{{"t", "u"}, {"t", "v", "w", "x", "y"}, {"z"}};
  auto idx = bm25::InvertedIndex::build_from_tokens(docs);
  std::vector<std::string> q{"t"};
  CHECK(idx.score(q, 0) > idx.score(q, 1));
}

TEST_CASE("document retrieval over parsed documents") {
  std::vector<corpus::Document> docs{
      testutil::make_doc("AAA/2010/page_1.pdf", {"revenue grew strongly this year ."}),
      testutil::make_doc("BBB/2011/page_2.pdf", {"hedging programs for currency risk ."},
                         {{"", "2011"}, {"swaps", "12"}})};
  auto idx = bm25::InvertedIndex::build(docs);
  CHECK(bm25::retrieve_top1(idx, docs, "currency hedging") == "BBB/2011/page_2.pdf");
  CHECK(bm25::retrieve_top1(idx, docs, "swaps") == "BBB/2011/page_2.pdf");
  CHECK(bm25::retrieve_top1(idx, docs, "Revenue growth") == "AAA/2010/page_1.pdf");
}
