#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "reasongr/decode.hpp"
#include "reasongr/error.hpp"

using namespace reasongr;
using namespace reasongr::decode;

namespace {

struct Fixture {
  corpus::DocIdRegistry registry;
  tok::Vocab vocab;
  TokenTrie trie;
};

// Random docids over a small component alphabet, so prefixes are shared and
// some docids are prefixes of others.
Fixture random_fixture(Rng& rng, std::size_t n_docs) {
  const std::vector<std::string> alphabet{"acme", "beta", "2010", "2011", "cash", "debt", "swap"};
  std::uniform_int_distribution<std::size_t> len(1, 4), pick(0, alphabet.size() - 1);
  Fixture f;
  std::size_t made = 0;
  for (int attempt = 0; made < n_docs && attempt < 1000; ++attempt) {
    corpus::DocId id;
    const std::size_t l = len(rng);
    for (std::size_t i = 0; i < l; ++i) id.components.push_back(alphabet[pick(rng)]);
    if (f.registry.contains_surface(id.surface())) continue;
    f.registry.insert("doc" + std::to_string(made), id);
    ++made;
  }
  for (const auto& w : alphabet) f.vocab.add(w);
  f.vocab.add("noise");
  f.trie = build_token_trie(f.registry, f.vocab);
  return f;
}

// Deterministic pseudo-random logits keyed by the prefix.
LogitFn random_logits(std::uint64_t seed, std::size_t vocab, double scale = 3.0) {
  return [=](std::span<const TokenId> prefix) {
    std::uint64_t h = seed;
    for (TokenId t : prefix) h = h * 1000003u + static_cast<std::uint64_t>(t) + 1;
    Rng r(h);
    std::normal_distribution<double> n(0.0, scale);
    Vector v(static_cast<Eigen::Index>(vocab));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(r);
    return v;
  };
}

double path_log_prob(const LogitFn& fn, const TokenSequence& tokens) {
  TokenSequence prefix{tok::kBos};
  double total = 0;
  for (TokenId t : tokens) {
    total += log_softmax(fn(prefix))(t);
    prefix.push_back(t);
  }
  return total + log_softmax(fn(prefix))(tok::kEos);
}

}  // namespace

TEST_CASE("token trie mirrors the registry") {
  Rng rng(1);
  auto f = random_fixture(rng, 8);
  CHECK(f.trie.terminal_count() == f.registry.size());
  for (std::size_t i = 0; i < f.registry.size(); ++i) {
    auto node = f.trie.find(tok::encode_docid(f.registry.docid(i), f.vocab));
    REQUIRE(node.has_value());
    CHECK(f.trie.node(*node).payload == i);
  }
  tok::Vocab small;
  CHECK_THROWS_AS(build_token_trie(f.registry, small), SchemaError);
}

TEST_CASE("single-docid registry always decodes that docid") {
  corpus::DocIdRegistry reg;
  reg.insert("only", corpus::DocId::parse("acme-2010-cash"));
  tok::Vocab v;
  for (auto w : {"acme", "2010", "cash", "debt"}) v.add(w);
  auto trie = build_token_trie(reg, v);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    auto fn = random_logits(rng(), v.size());
    auto r = constrained_greedy(fn, trie, 16);
    CHECK(r.docid_index == 0);
    CHECK(r.tokens == tok::encode_docid(reg.docid(0), v));
    for (std::size_t w : {2u, 4u}) CHECK(constrained_beam(fn, trie, w, 16).front().docid_index == 0);
  }
}

TEST_CASE("validity and greedy equivalence over random logits") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    auto f = random_fixture(rng, 1 + trial % 12);
    auto fn = random_logits(rng(), f.vocab.size());
    auto g = constrained_greedy(fn, f.trie, 16);
    CHECK(f.registry.docid(g.docid_index).components.size() == g.tokens.size());
    CHECK(g.tokens == tok::encode_docid(f.registry.docid(g.docid_index), f.vocab));
    CHECK(g.log_prob == doctest::Approx(path_log_prob(fn, g.tokens)).epsilon(1e-12));
    for (std::size_t w : {1u, 2u, 4u}) {
      auto beams = constrained_beam(fn, f.trie, w, 16);
      REQUIRE(!beams.empty());
      CHECK(beams.size() <= w);
      for (const auto& b : beams) {
        CHECK(b.tokens == tok::encode_docid(f.registry.docid(b.docid_index), f.vocab));
      }
      for (std::size_t i = 1; i < beams.size(); ++i) {
        CHECK(beams[i - 1].normalized_score() >= beams[i].normalized_score());
      }
      if (w == 1) CHECK(beams.front() == g);
    }
  }
}

TEST_CASE("greedy picks the best allowed token at every step") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_fixture(rng, 6);
    auto fn = random_logits(rng(), f.vocab.size());
    TokenSequence prefix{tok::kBos};
    std::size_t node = TokenTrie::root();
    TokenSequence expected;
    while (true) {
      Vector lp = log_softmax(fn(prefix));
      TokenId best = tok::kEos;
      double best_lp = f.trie.node(node).terminal() ? lp(tok::kEos) : -INFINITY;
      for (const auto& [t, child] : f.trie.node(node).children) {
        if (lp(t) > best_lp) {
          best_lp = lp(t);
          best = t;
        }
      }
      if (best == tok::kEos) break;
      expected.push_back(best);
      prefix.push_back(best);
      node = *f.trie.child(node, best);
    }
    CHECK(constrained_greedy(fn, f.trie, 16).tokens == expected);
  }
}

TEST_CASE("exhaustive beam matches brute-force ranking") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_fixture(rng, 2 + trial % 8);
    auto fn = random_logits(rng(), f.vocab.size());
    double best = -INFINITY;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < f.registry.size(); ++i) {
      auto toks = tok::encode_docid(f.registry.docid(i), f.vocab);
      const double s = path_log_prob(fn, toks) / static_cast<double>(toks.size() + 1);
      if (s > best) {
        best = s;
        best_index = i;
      }
    }
    auto beams = constrained_beam(fn, f.trie, f.registry.size(), 16);
    CHECK(beams.front().docid_index == best_index);
    CHECK(beams.front().normalized_score() == doctest::Approx(best).epsilon(1e-12));
    CHECK(beams.size() == f.registry.size());
  }
}

TEST_CASE("max_len truncation completes the path") {
  corpus::DocIdRegistry reg;
  reg.insert("x", corpus::DocId::parse("acme-2010-cash-debt"));
  tok::Vocab v;
  for (auto w : {"acme", "2010", "cash", "debt"}) v.add(w);
  auto trie = build_token_trie(reg, v);
  auto r = constrained_greedy(random_logits(9, v.size()), trie, 2);
  CHECK(r.truncated);
  CHECK(r.tokens.size() == 4);
}

TEST_CASE("chain-of-thought decoding") {
  corpus::DocIdRegistry reg;
  reg.insert("x", corpus::DocId::parse("acme-2010"));
  reg.insert("y", corpus::DocId::parse("beta-2011"));
  tok::Vocab v;
  for (auto w : {"acme", "2010", "beta", "2011", "find"}) v.add(w);
  auto trie = build_token_trie(reg, v);
  const TokenId find = v.id("find");
  const TokenId beta = v.id("beta");
  const TokenId y2011 = v.id("2011");

  // Prefers "find" until two have been emitted, then SEP, then beta-2011.
  LogitFn fn = [&](std::span<const TokenId> prefix) {
    Vector l = Vector::Zero(static_cast<Eigen::Index>(v.size()));
    const bool after_sep = std::find(prefix.begin(), prefix.end(), tok::kSep) != prefix.end();
    if (!after_sep) {
      l(prefix.size() < 3 ? find : tok::kSep) = 10;
    } else {
      l(beta) = 10;
      l(y2011) = 9;
      l(tok::kEos) = prefix.back() == y2011 ? 20 : 0;
    }
    return l;
  };
  auto r = cot_decode(fn, trie, v, 24, 16);
  CHECK(r.trace == "find find");
  CHECK(r.docid.docid_index == 1);

  auto forced = cot_decode(fn, trie, v, 0, 16);
  CHECK(forced.trace_tokens.empty());
  CHECK(forced.docid.docid_index == 1);

  LogitFn sep_first = [&](std::span<const TokenId> prefix) {
    Vector l = Vector::Zero(static_cast<Eigen::Index>(v.size()));
    l(tok::kSep) = 5;
    l(v.id("acme")) = 4;
    (void)prefix;
    return l;
  };
  auto s = cot_decode(sep_first, trie, v, 24, 16);
  CHECK(s.trace_tokens.empty());
  CHECK(s.docid.docid_index == 0);
}

TEST_CASE("unconstrained decoding stops at EOS or max_len") {
  LogitFn eos_third = [](std::span<const TokenId> prefix) {
    Vector l = Vector::Zero(8);
    l(prefix.size() >= 3 ? tok::kEos : 6) = 5;
    return l;
  };
  CHECK(unconstrained_greedy(eos_third, 10) == TokenSequence{6, 6});
  LogitFn never = [](std::span<const TokenId>) {
    Vector l = Vector::Zero(8);
    l(7) = 1;
    return l;
  };
  CHECK(unconstrained_greedy(never, 5).size() == 5);
}

TEST_CASE("model-backed logits are consistent with the full forward pass") {
  Rng rng(6);
  model::ModelDims dims{12, 8, 16, 10, 6};
  auto m = model::SeqModel::init(dims, rng);
  auto ads = testutil::random_adapters(m, 2, rng);
  TokenSequence src{5, 6, 7};
  auto fn = model_logits(m, ads, src);
  TokenSequence prefix{tok::kBos, 8, 9};
  Matrix full = model::forward(m, ads, src, prefix);
  CHECK(fn(prefix).isApprox(full.row(2).transpose(), 1e-12));
  TokenSequence long_prefix(20, 5);
  long_prefix[0] = tok::kBos;
  CHECK(fn(long_prefix).size() == 12);
}

TEST_CASE("three docids with beam three returns all of them ranked") {
  corpus::DocIdRegistry reg;
  for (auto s : {"acme-2010", "acme-2011", "beta-2010"}) reg.insert(s, corpus::DocId::parse(s));
  tok::Vocab v;
  for (auto w : {"acme", "beta", "2010", "2011"}) v.add(w);
  auto trie = build_token_trie(reg, v);
  auto fn = random_logits(21, v.size());
  auto beams = constrained_beam(fn, trie, 3, 16);
  REQUIRE(beams.size() == 3);
  std::set<std::size_t> seen;
  for (const auto& b : beams) {
    seen.insert(b.docid_index);
    CHECK(b.normalized_score() ==
          doctest::Approx(path_log_prob(fn, b.tokens) / static_cast<double>(b.tokens.size() + 1)));
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("wider beams never lower the top-1 score on small registries") {
  Rng rng(8);
  std::size_t violations = 0, checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto f = random_fixture(rng, 2 + trial % 5);
    auto fn = random_logits(rng(), f.vocab.size());
    for (std::size_t w = 1; w < f.registry.size(); ++w) {
      const double narrow = constrained_beam(fn, f.trie, w, 16).front().normalized_score();
      const double wide = constrained_beam(fn, f.trie, w + 1, 16).front().normalized_score();
      ++checked;
      violations += wide >= narrow - 1e-12 ? 0 : 1;
    }
  }
  CHECK(checked > 0);
  CHECK(violations == 0);
}
