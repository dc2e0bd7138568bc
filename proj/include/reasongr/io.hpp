#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "reasongr/types.hpp"

namespace reasongr::io {

// {"rows": r, "cols": c, "data": [row-major values]}; doubles round-trip exactly.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

std::string read_file(const std::filesystem::path& path);

// Writes to "<path>.tmp" then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Peak resident set size of this process in KiB, when the platform reports it.
std::optional<long> peak_rss_kib();

}  // namespace reasongr::io
