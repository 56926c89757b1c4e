#pragma once

#include <string>
#include <string_view>

namespace upmdp {

// Converts the TOML subset used by experiment files into JSON text:
// [tables], [dotted.tables], key = value with strings, integers, floats,
// booleans, arrays and inline tables, and # comments.
std::string toml_to_json(std::string_view toml_text);

}  // namespace upmdp
