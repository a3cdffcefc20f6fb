#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nat::strings {

std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);
bool starts_with_ci(std::string_view text, std::string_view prefix);
std::vector<std::string> split(std::string_view text, char sep);
std::vector<std::string> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Truncates to at most `max_chars` UTF-8 code points.
std::string truncate_utf8(std::string_view text, std::size_t max_chars);

/// Lower-case hexadecimal SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace nat::strings
