#include "reasongr/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "reasongr/error.hpp"
#include "reasongr/text.hpp"

namespace reasongr::corpus {
namespace {

std::string element_context(std::size_t index) {
  return "element " + std::to_string(index);
}

const nlohmann::json& require_key(const nlohmann::json& obj, const char* key,
                                  std::size_t index) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError("missing key '" + std::string(key) + "' in " + element_context(index));
  }
  return *it;
}

std::vector<std::string> string_list(const nlohmann::json& value, const char* key,
                                     std::size_t index) {
  if (!value.is_array()) {
    throw SchemaError("key '" + std::string(key) + "' in " + element_context(index) +
                      " must be an array of strings");
  }
  std::vector<std::string> out;
  out.reserve(value.size());
  for (const auto& item : value) {
    if (!item.is_string()) {
      throw SchemaError("key '" + std::string(key) + "' in " + element_context(index) +
                        " must contain only strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

bool valid_year(const std::string& year) {
  if (year.size() != 4) return false;
  int value = 0;
  auto [ptr, ec] = std::from_chars(year.data(), year.data() + year.size(), value);
  if (ec != std::errc() || ptr != year.data() + year.size()) return false;
  return value >= 1900 && value <= 2100;
}

void assign_company_year(Document& doc, std::size_t index, std::vector<IngestWarning>* warnings) {
  auto parts = text::split(doc.raw_id, "/");
  bool ok = parts.size() >= 2 && !text::normalize_component(parts[0]).empty() &&
            valid_year(parts[1]);
  if (ok) {
    doc.company = parts[0];
    doc.year = parts[1];
    return;
  }
  doc.company = std::string(kUnknownCompany);
  doc.year = std::string(kUnknownYear);
  if (warnings) {
    warnings->push_back({index, doc.raw_id,
                         "raw id does not match <company>/<year>/...; using placeholders"});
  }
}

}  // namespace

std::vector<Document> parse_corpus(std::string_view json_text,
                                   std::vector<IngestWarning>* warnings) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text.begin(), json_text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " +
                         e.what(),
                     e.byte);
  }
  if (!root.is_array()) throw SchemaError("corpus root must be a JSON array");

  std::vector<Document> docs;
  docs.reserve(root.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& obj = root[i];
    if (!obj.is_object()) throw SchemaError(element_context(i) + " is not an object");
    Document doc;
    const auto& id = require_key(obj, "id", i);
    if (!id.is_string()) throw SchemaError("key 'id' in " + element_context(i) + " must be a string");
    doc.raw_id = id.get<std::string>();
    doc.pre_text = string_list(require_key(obj, "pre_text", i), "pre_text", i);
    doc.post_text = string_list(require_key(obj, "post_text", i), "post_text", i);
    const auto& table = require_key(obj, "table", i);
    if (!table.is_array()) throw SchemaError("key 'table' in " + element_context(i) + " must be an array");
    for (const auto& row : table) doc.table.push_back(string_list(row, "table", i));
    for (const auto& row : doc.table) {
      if (row.empty() || row.size() != doc.table.front().size()) {
        throw SchemaError("key 'table' in " + element_context(i) +
                          " must have rows of equal nonzero length");
      }
    }
    if (auto qa = obj.find("qa"); qa != obj.end() && qa->is_object()) {
      if (auto q = qa->find("question"); q != qa->end() && q->is_string()) {
        doc.question = q->get<std::string>();
      }
    }
    if (!seen.insert(doc.raw_id).second) {
      throw UniquenessError("duplicate id '" + doc.raw_id + "' at " + element_context(i));
    }
    assign_company_year(doc, i, warnings);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> ingest_corpus(const std::filesystem::path& path,
                                    std::vector<IngestWarning>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), warnings);
}

nlohmann::json to_json(const Document& doc) {
  nlohmann::json j = {{"id", doc.raw_id},
                      {"pre_text", doc.pre_text},
                      {"post_text", doc.post_text},
                      {"table", doc.table}};
  if (doc.question) j["qa"] = {{"question", *doc.question}};
  return j;
}

nlohmann::json to_json(std::span<const Document> docs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : docs) arr.push_back(to_json(d));
  return arr;
}

std::vector<TableSegment> flatten_table(const Document& doc) {
  std::vector<TableSegment> out;
  const auto& t = doc.table;
  if (t.size() < 2 || t.front().size() < 2) return out;
  for (std::size_t r = 1; r < t.size(); ++r) {
    for (std::size_t c = 1; c < t[r].size(); ++c) {
      if (t[r][c].empty()) continue;
      out.push_back({t[r][0] + " | " + t[0][c] + " | " + t[r][c], doc.raw_id});
    }
  }
  return out;
}

std::string document_text(const Document& doc) {
  std::string out;
  auto append = [&out](const std::string& s) {
    if (!out.empty()) out += ' ';
    out += s;
  };
  for (const auto& s : doc.pre_text) append(s);
  for (const auto& s : doc.post_text) append(s);
  for (const auto& seg : flatten_table(doc)) append(seg.text);
  return out;
}

KeywordExtractor::KeywordExtractor(std::span<const Document> docs) : doc_count_(docs.size()) {
  for (const auto& doc : docs) {
    auto tokens = candidates(document_text(doc));
    std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
    for (const auto& t : unique) ++df_[t];
  }
}

std::vector<std::string> KeywordExtractor::candidates(std::string_view text) {
  auto tokens = text::word_tokens(text);
  std::erase_if(tokens, [](const std::string& t) { return text::is_stopword(t); });
  return tokens;
}

std::size_t KeywordExtractor::document_frequency(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double KeywordExtractor::idf(const std::string& term) const {
  double n = static_cast<double>(doc_count_);
  double df = static_cast<double>(document_frequency(term));
  return std::log((n + 1.0) / (df + 1.0)) + 1.0;
}

std::vector<std::string> KeywordExtractor::extract(std::string_view text, std::size_t k) const {
  auto tokens = candidates(text);
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> tf;
  for (const auto& t : tokens) {
    if (tf[t]++ == 0) order.push_back(t);
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    scored.emplace_back(static_cast<double>(tf[order[i]]) * idf(order[i]), i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && out.size() < k; ++i) {
    out.push_back(order[scored[i].second]);
  }
  return out;
}

std::string DocId::surface() const { return text::join(components, "-"); }

DocId DocId::parse(std::string_view surface) { return DocId{text::split(surface, "-")}; }

DocId build_docid(const Document& doc, const std::vector<std::string>& keywords,
                  const std::unordered_set<std::string>& taken) {
  std::string company = text::normalize_component(doc.company);
  std::string year = text::normalize_component(doc.year);
  if (company.empty() || year.empty()) {
    throw SchemaError("cannot build docid for '" + doc.raw_id + "': empty company or year");
  }
  DocId id{{company, year}};
  for (const auto& kw : keywords) {
    if (kw.empty() || kw.find('-') != std::string::npos ||
        std::any_of(kw.begin(), kw.end(), [](unsigned char c) { return std::isspace(c); })) {
      throw SchemaError("keyword '" + kw + "' is not a valid docid component");
    }
    id.components.push_back(kw);
  }
  if (!taken.contains(id.surface())) return id;
  for (std::size_t ordinal = 2;; ++ordinal) {
    DocId candidate = id;
    candidate.components.push_back(std::to_string(ordinal));
    if (!taken.contains(candidate.surface())) return candidate;
  }
}

DocIdRegistry DocIdRegistry::build(std::span<const Document> docs, std::size_t keywords_per_docid) {
  if (docs.empty()) throw SchemaError("cannot build a registry from an empty corpus");
  KeywordExtractor extractor(docs);
  DocIdRegistry reg;
  std::unordered_set<std::string> taken;
  for (const auto& doc : docs) {
    std::string company = text::normalize_component(doc.company);
    std::string year = text::normalize_component(doc.year);
    // Extra candidates so that dropping the prefix tokens still leaves k.
    auto raw = extractor.extract(document_text(doc), keywords_per_docid + 2);
    std::vector<std::string> keywords;
    for (auto& kw : raw) {
      if (keywords.size() == keywords_per_docid) break;
      if (kw == company || kw == year) continue;
      keywords.push_back(std::move(kw));
    }
    DocId id = build_docid(doc, keywords, taken);
    taken.insert(id.surface());
    reg.insert(doc.raw_id, std::move(id));
  }
  return reg;
}

void DocIdRegistry::insert(const std::string& raw_id, DocId docid) {
  std::string surface = docid.surface();
  if (by_raw_id_.contains(raw_id)) throw UniquenessError("raw id '" + raw_id + "' already registered");
  if (by_surface_.contains(surface)) throw UniquenessError("docid '" + surface + "' already registered");
  std::size_t index = raw_ids_.size();
  trie_.insert(std::span<const std::string>(docid.components), index);
  raw_ids_.push_back(raw_id);
  by_raw_id_.emplace(raw_id, index);
  by_surface_.emplace(std::move(surface), index);
  docids_.push_back(std::move(docid));
}

const DocId& DocIdRegistry::docid_for(const std::string& raw_id) const {
  auto it = by_raw_id_.find(raw_id);
  if (it == by_raw_id_.end()) throw SchemaError("unknown raw id '" + raw_id + "'");
  return docids_[it->second];
}

const std::string& DocIdRegistry::raw_id_for(const std::string& surface) const {
  auto it = by_surface_.find(surface);
  if (it == by_surface_.end()) throw SchemaError("unknown docid '" + surface + "'");
  return raw_ids_[it->second];
}

std::optional<std::size_t> DocIdRegistry::index_of_raw_id(const std::string& raw_id) const {
  auto it = by_raw_id_.find(raw_id);
  if (it == by_raw_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> DocIdRegistry::index_of_surface(const std::string& surface) const {
  auto it = by_surface_.find(surface);
  if (it == by_surface_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json DocIdRegistry::export_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < size(); ++i) j[docids_[i].surface()] = raw_ids_[i];
  return j;
}

nlohmann::json DocIdRegistry::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < size(); ++i) arr.push_back({raw_ids_[i], docids_[i].surface()});
  return arr;
}

DocIdRegistry DocIdRegistry::from_json(const nlohmann::json& j) {
  DocIdRegistry reg;
  for (const auto& entry : j) {
    reg.insert(entry.at(0).get<std::string>(), DocId::parse(entry.at(1).get<std::string>()));
  }
  return reg;
}

}  // namespace reasongr::corpus
