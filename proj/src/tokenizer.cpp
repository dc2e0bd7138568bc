#include "reasongr/tokenizer.hpp"

#include "reasongr/error.hpp"
#include "reasongr/text.hpp"

namespace reasongr::tok {

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<s>", "</s>", "<unk>"}) add(s);
  add(std::string(text::kSepMarker));
}

TokenId Vocab::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DimensionError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab Vocab::build(std::span<const corpus::Document> docs, const corpus::DocIdRegistry& registry,
                   std::span<const std::string> prompt_texts) {
  Vocab v;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    for (const auto& c : registry.docid(i).components) v.add(c);
  }
  for (const auto& doc : docs) {
    for (const auto& t : text::tokenize(corpus::document_text(doc))) v.add(t);
  }
  for (const auto& p : prompt_texts) {
    for (const auto& t : text::tokenize(p)) v.add(t);
  }
  return v;
}

nlohmann::json Vocab::to_json() const { return tokens_; }

Vocab Vocab::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() < kSpecialCount) throw SchemaError("vocab must be a token list");
  Vocab v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string t = j[i].get<std::string>();
    if (i < kSpecialCount) {
      if (t != v.tokens_[i]) throw SchemaError("vocab specials out of place");
      continue;
    }
    if (v.add(t) != static_cast<TokenId>(i)) throw SchemaError("duplicate vocab token '" + t + "'");
  }
  return v;
}

TokenSequence encode(std::string_view text, const Vocab& vocab) {
  TokenSequence out;
  for (const auto& t : text::tokenize(text)) out.push_back(vocab.id(t));
  return out;
}

std::string decode(std::span<const TokenId> ids, const Vocab& vocab, std::string_view sep) {
  std::string out;
  bool first = true;
  for (TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!first) out += sep;
    out += vocab.token(id);
    first = false;
  }
  return out;
}

TokenSequence encode_docid(const corpus::DocId& docid, const Vocab& vocab) {
  TokenSequence out;
  out.reserve(docid.components.size());
  for (const auto& c : docid.components) out.push_back(vocab.id(c));
  return out;
}

}  // namespace reasongr::tok
