#pragma once

#include <cstdint>
#include <vector>

#include "reasongr/corpus.hpp"

namespace reasongr::synthetic {

struct CorpusOptions {
  std::size_t documents = 50;
  // Distinct issuers; documents cycle through them with increasing years.
  // 0 means one issuer per document.
  std::size_t companies = 0;
  std::size_t table_rows = 3;  // including the header row
  std::size_t table_cols = 3;  // including the row-header column
  std::uint64_t seed = 7;
};

// FinQA-shaped documents: made-up issuer names, topic sentences, a small
// numeric table, and one gold question per document.
std::vector<corpus::Document> generate_corpus(const CorpusOptions& options);

}  // namespace reasongr::synthetic
