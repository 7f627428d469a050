// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmclass::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes. Trailing '\r' is ignored.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string quote(std::string_view field);

std::string join(const std::vector<std::string> &fields);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses a finite double; the whole (trimmed) field must be consumed.
std::optional<double> parse_double(std::string_view text);

std::string_view trim(std::string_view text);
std::string lower(std::string_view text);

/// Lower-cased text with every non-alphanumeric character removed, used to
/// match header names and category labels loosely.
std::string squash(std::string_view text);

/// Splits `text` on `sep`; an empty input yields an empty vector.
std::vector<std::string> split(std::string_view text, char sep);

} // namespace vmclass::csv
