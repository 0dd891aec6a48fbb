#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sil {

std::vector<std::string> split_string(std::string_view s, char delim);
/// Splits on runs of spaces/tabs; no empty fields.
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Strict parse: whole string must be a number. Returns nullopt otherwise.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Lowercases and splits on whitespace, detaching . , ! ? ; : " ( ) as tokens.
/// Hyphens and apostrophes stay inside words.
std::vector<std::string> tokenize(std::string_view text);

/// Delimited text with RFC 4180 quoting ("" escapes a quote, quoted fields may
/// span lines). Returns rows of fields; a trailing newline adds no row.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delim = ',');

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a, hex encoded. Used for config/corpus fingerprints in manifests.
std::string fingerprint(std::string_view bytes);

/// Worker count: explicit value if > 0, else $SIL_WORKERS, else 1.
std::size_t worker_count(std::size_t requested = 0);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown (first by index) after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace sil
