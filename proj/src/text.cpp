#include "reasongr/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace reasongr::text {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Normalizes one whitespace/hyphen-free piece.
std::string clean_piece(std::string_view piece) {
  std::string out;
  out.reserve(piece.size());
  for (std::size_t i = 0; i < piece.size(); ++i) {
    char c = piece[i];
    if (is_alnum(c)) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (c == '.' && i > 0 && i + 1 < piece.size() && is_digit(piece[i - 1]) &&
               is_digit(piece[i + 1])) {
      out.push_back('.');
    }
  }
  return out;
}

const std::unordered_set<std::string_view>& stopword_set() {
  static const std::unordered_set<std::string_view> set(stopwords().begin(),
                                                        stopwords().end());
  return set;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < input.size()) {
    while (i < input.size() && std::isspace(static_cast<unsigned char>(input[i]))) ++i;
    std::size_t start = i;
    while (i < input.size() && !std::isspace(static_cast<unsigned char>(input[i]))) ++i;
    std::string_view word = input.substr(start, i - start);
    if (word.empty()) continue;
    if (word == kSepMarker) {
      out.emplace_back(kSepMarker);
      continue;
    }
    std::size_t p = 0;
    while (p <= word.size()) {
      std::size_t dash = word.find('-', p);
      if (dash == std::string_view::npos) dash = word.size();
      std::string piece = clean_piece(word.substr(p, dash - p));
      if (!piece.empty()) out.push_back(std::move(piece));
      p = dash + 1;
    }
  }
  return out;
}

std::vector<std::string> word_tokens(std::string_view input) {
  std::vector<std::string> tokens = tokenize(input);
  std::erase_if(tokens, [](const std::string& t) { return t == kSepMarker; });
  return tokens;
}

std::string normalize_component(std::string_view input) {
  std::string out;
  for (const auto& t : word_tokens(input)) out += t;
  return out;
}

bool is_stopword(std::string_view token) { return stopword_set().contains(token); }

const std::vector<std::string_view>& stopwords() {
  static const std::vector<std::string_view> words = {
      "a",       "about",   "above",  "after",   "again",   "against", "all",
      "also",    "am",      "an",     "and",     "any",     "are",     "as",
      "at",      "be",      "because", "been",   "before",  "being",   "below",
      "between", "both",    "but",    "by",      "can",     "could",   "did",
      "do",      "does",    "doing",  "down",    "during",  "each",    "few",
      "for",     "from",    "further", "had",    "has",     "have",    "having",
      "he",      "her",     "here",   "hers",    "him",     "his",     "how",
      "i",       "if",      "in",     "into",    "is",      "it",      "its",
      "itself",  "just",    "may",    "me",      "more",    "most",    "my",
      "no",      "nor",     "not",    "now",     "of",      "off",     "on",
      "once",    "only",    "or",     "other",   "our",     "ours",    "out",
      "over",    "own",     "same",   "she",     "should",  "so",      "some",
      "such",    "than",    "that",   "the",     "their",   "theirs",  "them",
      "then",    "there",   "these",  "they",    "this",    "those",   "through",
      "to",      "too",     "under",  "until",   "up",      "upon",    "very",
      "was",     "we",      "were",   "what",    "when",    "where",   "which",
      "while",   "who",     "whom",   "why",     "will",    "with",    "would",
      "you",     "your",    "yours",  "within",  "without", "per",     "us",
  };
  return words;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view input, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t p = 0;
  while (true) {
    std::size_t q = input.find(sep, p);
    if (q == std::string_view::npos) {
      out.emplace_back(input.substr(p));
      break;
    }
    out.emplace_back(input.substr(p, q - p));
    p = q + sep.size();
  }
  return out;
}

std::string to_lower(std::string_view input) {
  std::string out(input);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace reasongr::text
