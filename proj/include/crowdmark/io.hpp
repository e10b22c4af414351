#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace crowdmark::io {

struct CsvRow {
    std::size_t line = 0; // 1-based line number in the file
    std::vector<std::string> fields;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
};

/// Comma-separated, optional double-quote quoting, LF (CRLF tolerated)
/// line endings. Blank lines are skipped.
[[nodiscard]] CsvTable parse_csv(std::string_view text);
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

/// Throws ValidationError naming `line` when the header differs from `expected`.
void require_header(const CsvTable& table, const std::vector<std::string>& expected, std::string_view what);

[[nodiscard]] std::string csv_escape(std::string_view field);

/// Shortest representation that parses back to the same double.
[[nodiscard]] std::string format_double(double v);
/// Whole-string decimal parse; throws ValidationError naming `line` on failure.
[[nodiscard]] double parse_double(std::string_view s, std::size_t line, std::string_view field);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary sibling file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace crowdmark::io
