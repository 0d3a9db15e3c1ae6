#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlsynth::text {

std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

// Number of code points; invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);

// ASCII and Latin-1 case folding.
std::string casefold(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

bool starts_with_icase(std::string_view s, std::string_view prefix);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Strict field classifier used at ingestion: sign, digits (optionally
// grouped by thousands), optional fraction, optional percent suffix.
std::optional<double> parse_plain_number(std::string_view s);

// Lenient numeric coercion for text operands: surrounding spaces,
// thousands commas, exponent, leading currency symbol and trailing
// percent are accepted.
std::optional<double> coerce_number(std::string_view s);

// Shortest representation that parses back to the same double; integral
// values print without a fractional part.
std::string format_number(double v);

// Spreadsheet "General" rendering: at most 15 significant digits,
// scientific notation with an upper-case E for very large/small values.
std::string format_general(double v);

// Glob match with `*`, `?` and `~` escapes, case-insensitive.
bool wildcard_match(std::string_view pattern, std::string_view s);
bool has_wildcards(std::string_view pattern);

}  // namespace xlsynth::text
