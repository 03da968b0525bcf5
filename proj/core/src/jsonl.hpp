#pragma once

// Internal helpers for JSON-lines I/O and deterministic number formatting.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace eccot::io {

using Json = nlohmann::json;

/// Calls `fn(record, line_number)` for every non-blank line. Parse failures
/// and exceptions thrown by `fn` that are not eccot::Error become DataError
/// mentioning the file and 1-based line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling then renames, so a failed run never leaves a
/// half-written artifact behind.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

[[noreturn]] void data_error_at(const std::filesystem::path& path, std::size_t line, const std::string& what);

}  // namespace eccot::io
