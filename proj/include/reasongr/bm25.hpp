#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "reasongr/corpus.hpp"

namespace reasongr::bm25 {

struct Posting {
  std::size_t doc;
  std::size_t tf;
};

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

// Okapi BM25 over tokenized documents. Scores are
//   sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl))
// with idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1), summed over query tokens
// (repeated query tokens count again).
class InvertedIndex {
 public:
  // Documents and string queries are tokenized exactly like keyword
  // extraction (stopwords dropped). Document text is pre_text,
  // post_text and flattened table segments.
  static InvertedIndex build(std::span<const corpus::Document> docs, Bm25Params params = {});

  // For already-tokenized documents.
  static InvertedIndex build_from_tokens(const std::vector<std::vector<std::string>>& docs,
                                         Bm25Params params = {});

  double score(std::span<const std::string> query_tokens, std::size_t doc) const;
  double score(const std::string& query, std::size_t doc) const;

  // Highest-scoring document index; ties go to the lowest index.
  std::size_t top1(std::span<const std::string> query_tokens) const;
  std::size_t top1(const std::string& query) const;

  double idf(const std::string& term) const;
  const std::vector<Posting>* postings(const std::string& term) const;
  std::size_t doc_count() const { return lengths_.size(); }
  std::size_t doc_length(std::size_t doc) const { return lengths_.at(doc); }
  double average_length() const { return avgdl_; }
  std::size_t term_count() const { return postings_.size(); }
  const Bm25Params& params() const { return params_; }

 private:
  // All query-term contributions for every document, accumulated via postings.
  std::vector<double> score_all(std::span<const std::string> query_tokens) const;

  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::size_t> lengths_;
  double avgdl_ = 0.0;
};

// Top-1 raw id for `query`.
std::string retrieve_top1(const InvertedIndex& index, std::span<const corpus::Document> docs,
                          const std::string& query);

}  // namespace reasongr::bm25
