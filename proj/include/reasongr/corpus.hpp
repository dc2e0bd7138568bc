#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "reasongr/trie.hpp"

namespace reasongr::corpus {

// One financial-report excerpt. Row 0 of `table` holds the column headers and
// column 0 of every row holds the row header.
struct Document {
  std::string raw_id;
  std::string company;
  std::string year;
  std::vector<std::string> pre_text;
  std::vector<std::string> post_text;
  std::vector<std::vector<std::string>> table;
  std::optional<std::string> question;
};

// Raised (as a record, not an exception) when a raw id does not follow the
// "<company>/<year>/..." layout and placeholder values were substituted.
struct IngestWarning {
  std::size_t index;
  std::string raw_id;
  std::string message;
};

inline constexpr std::string_view kUnknownCompany = "unk";
inline constexpr std::string_view kUnknownYear = "0000";

// Parses a JSON array of FinQA-style records. Throws ParseError (with byte
// offset), SchemaError (naming the key and element index) or UniquenessError.
std::vector<Document> parse_corpus(std::string_view json_text,
                                   std::vector<IngestWarning>* warnings = nullptr);

std::vector<Document> ingest_corpus(const std::filesystem::path& path,
                                    std::vector<IngestWarning>* warnings = nullptr);

nlohmann::json to_json(const Document& doc);
nlohmann::json to_json(std::span<const Document> docs);

struct TableSegment {
  std::string text;
  std::string parent_raw_id;
};

// One segment per interior cell in row-major order. Tables with fewer than two
// rows or columns have no interior cells and yield an empty list.
std::vector<TableSegment> flatten_table(const Document& doc);

// All text of a document: pre_text, post_text, then flattened table segments.
std::string document_text(const Document& doc);

// TF-IDF keyword extraction with idf = ln((N+1)/(df+1)) + 1, document
// frequencies taken over document_text() of every corpus document.
class KeywordExtractor {
 public:
  explicit KeywordExtractor(std::span<const Document> docs);

  std::vector<std::string> extract(std::string_view text, std::size_t k) const;

  double idf(const std::string& term) const;
  std::size_t document_count() const { return doc_count_; }
  std::size_t document_frequency(const std::string& term) const;

  // Candidate tokens of `text` after normalization and stopword removal.
  static std::vector<std::string> candidates(std::string_view text);

 private:
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

struct DocId {
  std::vector<std::string> components;

  std::string surface() const;
  static DocId parse(std::string_view surface);

  bool operator==(const DocId&) const = default;
};

// components = [normalize(company), year] ++ keywords. Surfaces already in
// `taken` get an ordinal component "2", "3", ... appended until unique.
DocId build_docid(const Document& doc, const std::vector<std::string>& keywords,
                  const std::unordered_set<std::string>& taken);

// Bidirectional raw_id <-> DocId map plus a trie over component sequences.
// Immutable once built.
class DocIdRegistry {
 public:
  static DocIdRegistry build(std::span<const Document> docs, std::size_t keywords_per_docid = 3);

  void insert(const std::string& raw_id, DocId docid);

  std::size_t size() const { return raw_ids_.size(); }
  const DocId& docid(std::size_t index) const { return docids_[index]; }
  const std::string& raw_id(std::size_t index) const { return raw_ids_[index]; }

  const DocId& docid_for(const std::string& raw_id) const;
  const std::string& raw_id_for(const std::string& surface) const;
  std::optional<std::size_t> index_of_raw_id(const std::string& raw_id) const;
  std::optional<std::size_t> index_of_surface(const std::string& surface) const;
  bool contains_surface(const std::string& surface) const {
    return by_surface_.contains(surface);
  }

  const PrefixTrie<std::string>& trie() const { return trie_; }

  // {surface -> raw_id}
  nlohmann::json export_json() const;
  // Ordered [[raw_id, surface], ...]; loses nothing, unlike export_json().
  nlohmann::json to_json() const;
  static DocIdRegistry from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> raw_ids_;
  std::vector<DocId> docids_;
  std::unordered_map<std::string, std::size_t> by_raw_id_;
  std::unordered_map<std::string, std::size_t> by_surface_;
  PrefixTrie<std::string> trie_;
};

}  // namespace reasongr::corpus
