#pragma once

#include <string>
#include <string_view>

namespace aircast {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

/// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string csv_field(std::string_view text);

} // namespace aircast
