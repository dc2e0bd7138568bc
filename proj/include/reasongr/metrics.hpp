#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace reasongr::metrics {

// All four measures compare docid token sequences and expect a nonempty gold.

// 1 iff pred and gold are identical in length and order.
template <typename T>
double em(std::span<const T> pred, std::span<const T> gold) {
  return std::equal(pred.begin(), pred.end(), gold.begin(), gold.end()) ? 1.0 : 0.0;
}

// Positionwise matches over the common prefix length, divided by the longer
// length.
template <typename T>
double pm(std::span<const T> pred, std::span<const T> gold) {
  const std::size_t longest = std::max(pred.size(), gold.size());
  if (longest == 0) return 0.0;
  const std::size_t common = std::min(pred.size(), gold.size());
  std::size_t hits = 0;
  for (std::size_t p = 0; p < common; ++p) hits += pred[p] == gold[p] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(longest);
}

// Jaccard similarity of the token sets.
template <typename T>
double sm(std::span<const T> pred, std::span<const T> gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  std::set<T> a(pred.begin(), pred.end());
  std::set<T> b(gold.begin(), gold.end());
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.contains(x) ? 1 : 0;
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// 1 - | |pred| - |gold| | / max(|pred|, |gold|).
template <typename T>
double s_score(std::span<const T> pred, std::span<const T> gold) {
  const std::size_t longest = std::max(pred.size(), gold.size());
  if (longest == 0) return 0.0;
  const std::size_t diff = pred.size() > gold.size() ? pred.size() - gold.size()
                                                     : gold.size() - pred.size();
  return 1.0 - static_cast<double>(diff) / static_cast<double>(longest);
}

struct Scores {
  double em = 0.0;
  double pm = 0.0;
  double sm = 0.0;
  double s_score = 0.0;
};

template <typename T>
Scores score(std::span<const T> pred, std::span<const T> gold) {
  return {em(pred, gold), pm(pred, gold), sm(pred, gold), s_score(pred, gold)};
}

struct QueryRecord {
  std::string query_id;
  std::string pred_surface;
  std::string gold_surface;
  Scores scores;
};

// Scores two docid surfaces by their hyphen-separated components.
QueryRecord score_surfaces(std::string query_id, const std::string& pred_surface,
                           const std::string& gold_surface);

struct MetricsReport {
  double em = 0.0;
  double pm = 0.0;
  double sm = 0.0;
  double s_score = 0.0;
  std::size_t n = 0;
  std::vector<QueryRecord> records;

  nlohmann::json to_json() const;
};

// Arithmetic means over the records. Throws ConfigError when empty.
MetricsReport aggregate(std::vector<QueryRecord> records);

inline constexpr const char* kCsvHeader = "Model,Split,EM,PM,SM,S";

std::string csv_row(const std::string& model, const std::string& split, const MetricsReport& r);

}  // namespace reasongr::metrics
