#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace doseconf {

/// Shortest decimal text that parses back to the same double. Non-finite
/// values print as `inf`, `-inf` and `nan`.
std::string format_double(double v);

/// Inverse of format_double; throws InvalidArgument on malformed input.
double parse_double(std::string_view text);

/// Splits one CSV line on commas. Quoting is not supported.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace doseconf
