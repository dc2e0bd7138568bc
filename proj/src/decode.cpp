#include "reasongr/decode.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "reasongr/error.hpp"

namespace reasongr::decode {
namespace {

TokenSequence with_tokens(const TokenSequence& start, const TokenSequence& tokens) {
  TokenSequence prefix = start;
  prefix.insert(prefix.end(), tokens.begin(), tokens.end());
  return prefix;
}

Vector step_log_probs(const LogitFn& logits, const TokenSequence& prefix) {
  return log_softmax(logits(prefix));
}

// Completes a path that ran out of budget: greedy among children until a
// terminal node. EOS is appended implicitly and scored.
void complete_greedily(const LogitFn& logits, const TokenTrie& trie, const TokenSequence& start,
                       std::size_t node, DecodeResult& res) {
  res.truncated = true;
  while (true) {
    const auto& n = trie.node(node);
    Vector lp = step_log_probs(logits, with_tokens(start, res.tokens));
    if (n.children.empty()) {
      res.log_prob += lp(tok::kEos);
      res.docid_index = *n.payload;
      return;
    }
    auto best = n.children.front();
    for (const auto& c : n.children) {
      if (lp(c.first) > lp(best.first)) best = c;
    }
    res.tokens.push_back(best.first);
    res.log_prob += lp(best.first);
    node = best.second;
  }
}

struct Hypothesis {
  TokenSequence tokens;
  double log_prob = 0.0;
  std::size_t node = 0;
};

struct Candidate {
  Hypothesis hyp;
  bool finished = false;
};

}  // namespace

TokenTrie build_token_trie(const corpus::DocIdRegistry& registry, const tok::Vocab& vocab) {
  TokenTrie trie;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    TokenSequence ids;
    for (const auto& c : registry.docid(i).components) {
      if (!vocab.contains(c)) throw SchemaError("docid component '" + c + "' missing from vocab");
      ids.push_back(vocab.id(c));
    }
    if (!trie.insert(std::span<const TokenId>(ids), i)) {
      throw SchemaError("two docids map to the same token sequence");
    }
  }
  return trie;
}

Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

DecodeResult constrained_greedy(const LogitFn& logits, const TokenTrie& trie, std::size_t max_len,
                                const TokenSequence& start) {
  if (trie.empty()) throw ConfigError("cannot decode against an empty docid trie");
  DecodeResult res;
  std::size_t node = TokenTrie::root();
  while (true) {
    if (res.tokens.size() >= max_len && !trie.node(node).terminal()) {
      complete_greedily(logits, trie, start, node, res);
      return res;
    }
    const auto& n = trie.node(node);
    Vector lp = step_log_probs(logits, with_tokens(start, res.tokens));
    // Candidates in ascending id order: EOS (id 2) precedes every component.
    bool have = false;
    TokenId best = tok::kEos;
    std::size_t best_node = node;
    if (n.terminal()) have = true;
    if (res.tokens.size() < max_len) {
      for (const auto& [token, next] : n.children) {
        if (!have || lp(token) > lp(best)) {
          best = token;
          best_node = next;
          have = true;
        }
      }
    }
    res.log_prob += lp(best);
    if (best == tok::kEos) {
      res.docid_index = *n.payload;
      return res;
    }
    res.tokens.push_back(best);
    node = best_node;
  }
}

std::vector<DecodeResult> constrained_beam(const LogitFn& logits, const TokenTrie& trie,
                                           std::size_t beam_width, std::size_t max_len,
                                           const TokenSequence& start) {
  if (beam_width == 0) throw ConfigError("beam width must be at least 1");
  if (trie.empty()) throw ConfigError("cannot decode against an empty docid trie");
  std::vector<DecodeResult> finished;
  std::vector<Hypothesis> active{Hypothesis{}};
  while (!active.empty()) {
    std::vector<Candidate> candidates;
    for (const auto& h : active) {
      const auto& n = trie.node(h.node);
      if (h.tokens.size() >= max_len && !n.terminal()) {
        DecodeResult res{0, h.tokens, h.log_prob, false};
        complete_greedily(logits, trie, start, h.node, res);
        finished.push_back(std::move(res));
        continue;
      }
      Vector lp = step_log_probs(logits, with_tokens(start, h.tokens));
      if (n.terminal()) candidates.push_back({{h.tokens, h.log_prob + lp(tok::kEos), h.node}, true});
      if (h.tokens.size() < max_len) {
        for (const auto& [token, next] : n.children) {
          Candidate c{{h.tokens, h.log_prob + lp(token), next}, false};
          c.hyp.tokens.push_back(token);
          candidates.push_back(std::move(c));
        }
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return a.hyp.log_prob > b.hyp.log_prob;
    });
    if (candidates.size() > beam_width) candidates.resize(beam_width);
    active.clear();
    for (auto& c : candidates) {
      if (c.finished) {
        finished.push_back({*trie.node(c.hyp.node).payload, std::move(c.hyp.tokens), c.hyp.log_prob, false});
      } else {
        active.push_back(std::move(c.hyp));
      }
    }
  }
  std::stable_sort(finished.begin(), finished.end(), [](const DecodeResult& a, const DecodeResult& b) {
    return a.normalized_score() > b.normalized_score();
  });
  if (finished.size() > beam_width) finished.resize(beam_width);
  return finished;
}

CotResult cot_decode(const LogitFn& logits, const TokenTrie& trie, const tok::Vocab& vocab,
                     std::size_t free_budget, std::size_t max_len) {
  CotResult out;
  TokenSequence prefix{tok::kBos};
  for (std::size_t i = 0; i < free_budget; ++i) {
    Vector lp = step_log_probs(logits, prefix);
    TokenId best = tok::kSep;
    for (Eigen::Index v = 0; v < lp.size(); ++v) {
      auto id = static_cast<TokenId>(v);
      if (id == tok::kPad || id == tok::kBos || id == tok::kEos || id == tok::kUnk) continue;
      if (lp(v) > lp(best)) best = id;
    }
    if (best == tok::kSep) break;
    out.trace_tokens.push_back(best);
    prefix.push_back(best);
  }
  prefix.push_back(tok::kSep);
  out.trace = tok::decode(out.trace_tokens, vocab);
  out.docid = constrained_greedy(logits, trie, max_len, prefix);
  return out;
}

TokenSequence unconstrained_greedy(const LogitFn& logits, std::size_t max_len,
                                   const TokenSequence& start) {
  TokenSequence out;
  while (out.size() < max_len) {
    Vector lp = step_log_probs(logits, with_tokens(start, out));
    TokenId best = tok::kEos;
    for (Eigen::Index v = 0; v < lp.size(); ++v) {
      auto id = static_cast<TokenId>(v);
      if (id == tok::kPad || id == tok::kBos) continue;
      if (lp(v) > lp(best)) best = id;
    }
    if (best == tok::kEos) break;
    out.push_back(best);
  }
  return out;
}

LogitFn model_logits(const model::SeqModel& model, const model::AdapterSet& adapters,
                     std::span<const TokenId> src) {
  auto encoded = std::make_shared<model::EncodedSource>(model::encode_source(model, adapters, src));
  const std::size_t limit = model.dims().max_tgt_len;
  return [&model, &adapters, encoded, limit](std::span<const TokenId> prefix) -> Vector {
    if (prefix.size() <= limit) {
      Matrix l = model::decoder_logits(model, adapters, *encoded, prefix);
      return l.row(l.rows() - 1).transpose();
    }
    TokenSequence window{prefix.front()};
    window.insert(window.end(), prefix.end() - static_cast<std::ptrdiff_t>(limit - 1), prefix.end());
    Matrix l = model::decoder_logits(model, adapters, *encoded, window);
    return l.row(l.rows() - 1).transpose();
  };
}

}  // namespace reasongr::decode
