// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace popcast {

/// Shortest decimal text that parses back to the same binary64 value.
std::string format_double(double value);

/// Parses the whole of `text` as a double; nullopt on any leftover or error.
/// Accepts "inf"/"nan" spellings, so callers check finiteness themselves.
std::optional<double> parse_double(std::string_view text);

std::optional<long long> parse_int(std::string_view text);

/// Fixed-point formatting ("%.*f").
std::string format_fixed(double value, int decimals);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Minimal RFC 4180 reader/writer: comma separated, double-quote quoting with
// "" escapes, quoted fields may span lines.
struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

std::vector<CsvRow> parse_csv(std::string_view text);

std::string csv_escape(std::string_view field);
std::string csv_quote(std::string_view field);

}  // namespace popcast
