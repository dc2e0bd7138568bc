#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reasongr/corpus.hpp"
#include "reasongr/model.hpp"
#include "reasongr/tokenizer.hpp"
#include "reasongr/trie.hpp"

namespace reasongr::decode {

// Next-token logits (size |V|) given the decoder prefix, which starts with BOS.
using LogitFn = std::function<Vector(std::span<const TokenId> prefix)>;

using TokenTrie = PrefixTrie<TokenId>;

// Trie over the token ids of every registered docid; payload = registry index.
// Throws SchemaError when a component is missing from the vocabulary.
TokenTrie build_token_trie(const corpus::DocIdRegistry& registry, const tok::Vocab& vocab);

struct DecodeResult {
  std::size_t docid_index = 0;
  TokenSequence tokens;   // docid tokens, without EOS
  double log_prob = 0.0;  // summed full-vocabulary log-probabilities, EOS included
  bool truncated = false; // max_len was hit and the path was completed greedily

  // Length-normalized score used to rank beams: log_prob / (tokens + EOS).
  double normalized_score() const { return log_prob / static_cast<double>(tokens.size() + 1); }
  bool operator==(const DecodeResult&) const = default;
};

Vector log_softmax(const Vector& logits);

// Greedy decoding restricted at every step to the current trie node's children,
// plus EOS when the node is terminal. When `max_len` docid tokens have been
// emitted without finishing, the path is completed greedily among children.
DecodeResult constrained_greedy(const LogitFn& logits, const TokenTrie& trie, std::size_t max_len,
                                const TokenSequence& start = {tok::kBos});

// Beam search over the same allowed sets. Every beam step keeps the
// `beam_width` best candidates by cumulative log-probability; finished
// hypotheses are ranked by normalized_score() and the best `beam_width` are
// returned. Width 1 reproduces constrained_greedy() exactly.
std::vector<DecodeResult> constrained_beam(const LogitFn& logits, const TokenTrie& trie,
                                           std::size_t beam_width, std::size_t max_len,
                                           const TokenSequence& start = {tok::kBos});

struct CotResult {
  TokenSequence trace_tokens;
  std::string trace;
  DecodeResult docid;
};

// Phase 1: free greedy decoding until SEP or `free_budget` tokens (SEP is then
// forced). Phase 2: constrained greedy docid decoding after the SEP.
CotResult cot_decode(const LogitFn& logits, const TokenTrie& trie, const tok::Vocab& vocab,
                     std::size_t free_budget, std::size_t max_len);

// Unconstrained greedy decoding until EOS or max_len; the output may not be a
// registered docid.
TokenSequence unconstrained_greedy(const LogitFn& logits, std::size_t max_len,
                                   const TokenSequence& start = {tok::kBos});

// Logit source backed by a model: encodes `src` once. Prefixes longer than the
// model's max_tgt_len keep BOS plus the most recent tokens.
LogitFn model_logits(const model::SeqModel& model, const model::AdapterSet& adapters,
                     std::span<const TokenId> src);

}  // namespace reasongr::decode
