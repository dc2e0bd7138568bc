#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reasongr::text {

// The literal marker separating a reasoning trace from the docid.
inline constexpr std::string_view kSepMarker = "=>";

// Lowercases and splits `input` on whitespace and hyphens, then strips every
// character that is not alphanumeric. A '.' between two digits is kept so
// decimals survive ("12.5"). A whitespace-delimited "=>" is kept verbatim.
// Pieces that end up empty are dropped.
std::vector<std::string> tokenize(std::string_view input);

// Same as tokenize() but also drops the "=>" marker, leaving only word tokens.
std::vector<std::string> word_tokens(std::string_view input);

// Concatenation of tokenize(input): the form used for docid components.
std::string normalize_component(std::string_view input);

bool is_stopword(std::string_view token);

const std::vector<std::string_view>& stopwords();

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::vector<std::string> split(std::string_view input, std::string_view sep);

std::string to_lower(std::string_view input);

}  // namespace reasongr::text
