#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

namespace emmc::toml {

// Parses the TOML subset used by experiment manifests into a JSON document:
// comments, [tables], [[arrays of tables]], dotted/quoted keys, and
// string / integer / float / boolean / (possibly nested, multiline) array
// values. Datetimes, inline tables and multiline strings are rejected.
// Throws ConfigError with a line number on malformed input.
nlohmann::json parse(const std::string& text);
nlohmann::json parse_file(const std::string& path);

}  // namespace emmc::toml
