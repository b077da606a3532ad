#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace agriqa::text {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string trim(std::string_view s);

/// Splits on runs of ASCII whitespace.
std::vector<std::string> split_whitespace(std::string_view s);

/// Splits on `sep`, keeping empty fields.
std::vector<std::string> split(std::string_view s, char sep);

/// Maximal runs of ASCII alphanumerics (bytes >= 0x80 count as word bytes),
/// lowercased.
std::vector<std::string> word_tokens(std::string_view s);

/// Lowercase, ASCII punctuation replaced by spaces, whitespace split.
std::vector<std::string> metric_tokens(std::string_view s);

bool is_dna_like(std::string_view token, std::size_t min_length = 8);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);

/// Lines of a file, without trailing '\r'. Throws Error(StorageError) on
/// open failure.
std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Fixed-precision rendering used in reports and observations ("%.6f").
std::string format_real(double value, int precision = 6);

}  // namespace agriqa::text
