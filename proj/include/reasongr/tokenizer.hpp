#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "reasongr/corpus.hpp"
#include "reasongr/types.hpp"

namespace reasongr::tok {

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kSep = 4;
inline constexpr std::size_t kSpecialCount = 5;

// Word-level vocabulary. Ids are dense, specials occupy 0..4 and every other
// token gets the next id on first occurrence.
class Vocab {
 public:
  Vocab();

  // Specials, then every docid component in registry order, then the tokens
  // of each document's text, then the tokens of `prompt_texts`.
  static Vocab build(std::span<const corpus::Document> docs, const corpus::DocIdRegistry& registry,
                     std::span<const std::string> prompt_texts);

  TokenId add(const std::string& token);
  TokenId id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Normalized tokens of `text` mapped to ids; "=>" maps to kSep. BOS/EOS are
// the caller's business.
TokenSequence encode(std::string_view text, const Vocab& vocab);

// Tokens joined by `sep`. PAD, BOS and EOS are skipped.
std::string decode(std::span<const TokenId> ids, const Vocab& vocab, std::string_view sep = " ");

TokenSequence encode_docid(const corpus::DocId& docid, const Vocab& vocab);

}  // namespace reasongr::tok
