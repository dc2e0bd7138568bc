#include "reasongr/bm25.hpp"

#include <algorithm>
#include <cmath>

#include "reasongr/error.hpp"
#include "reasongr/text.hpp"

namespace reasongr::bm25 {

InvertedIndex InvertedIndex::build(std::span<const corpus::Document> docs, Bm25Params params) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(docs.size());
  for (const auto& d : docs) tokens.push_back(corpus::KeywordExtractor::candidates(corpus::document_text(d)));
  return build_from_tokens(tokens, params);
}

InvertedIndex InvertedIndex::build_from_tokens(const std::vector<std::vector<std::string>>& docs,
                                               Bm25Params params) {
  if (docs.empty()) throw ConfigError("cannot index an empty corpus");
  InvertedIndex idx;
  idx.params_ = params;
  idx.lengths_.reserve(docs.size());
  double total = 0.0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : docs[d]) ++tf[t];
    for (const auto& [term, count] : tf) idx.postings_[term].push_back({d, count});
    // An empty document keeps length 1 so the length normalizer stays finite.
    std::size_t len = std::max<std::size_t>(docs[d].size(), 1);
    idx.lengths_.push_back(len);
    total += static_cast<double>(len);
  }
  idx.avgdl_ = total / static_cast<double>(docs.size());
  return idx;
}

double InvertedIndex::idf(const std::string& term) const {
  const auto* p = postings(term);
  const double df = p ? static_cast<double>(p->size()) : 0.0;
  const double n = static_cast<double>(doc_count());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

std::vector<double> InvertedIndex::score_all(std::span<const std::string> query_tokens) const {
  std::vector<double> scores(doc_count(), 0.0);
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto& term : query_tokens) {
    const auto* plist = postings(term);
    if (!plist) continue;
    const double w = idf(term);
    for (const Posting& p : *plist) {
      const double tf = static_cast<double>(p.tf);
      const double norm = k1 * (1.0 - b + b * static_cast<double>(lengths_[p.doc]) / avgdl_);
      scores[p.doc] += w * tf * (k1 + 1.0) / (tf + norm);
    }
  }
  return scores;
}

double InvertedIndex::score(std::span<const std::string> query_tokens, std::size_t doc) const {
  if (doc >= doc_count()) throw ConfigError("document index out of range");
  return score_all(query_tokens)[doc];
}

double InvertedIndex::score(const std::string& query, std::size_t doc) const {
  auto tokens = corpus::KeywordExtractor::candidates(query);
  return score(std::span<const std::string>(tokens), doc);
}

std::size_t InvertedIndex::top1(std::span<const std::string> query_tokens) const {
  auto scores = score_all(query_tokens);
  std::size_t best = 0;
  for (std::size_t d = 1; d < scores.size(); ++d) {
    if (scores[d] > scores[best]) best = d;
  }
  return best;
}

std::size_t InvertedIndex::top1(const std::string& query) const {
  auto tokens = corpus::KeywordExtractor::candidates(query);
  return top1(std::span<const std::string>(tokens));
}

std::string retrieve_top1(const InvertedIndex& index, std::span<const corpus::Document> docs,
                          const std::string& query) {
  return docs[index.top1(query)].raw_id;
}

}  // namespace reasongr::bm25
