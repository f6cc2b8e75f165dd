// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace etpp::io {

std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed; throws on failure.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

/// Splits on commas and trims surrounding whitespace (no quoting support).
std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

}  // namespace etpp::io
