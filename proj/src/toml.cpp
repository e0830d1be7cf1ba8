#include "emmc/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "emmc/errors.hpp"

namespace emmc::toml {

using nlohmann::json;

namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  json run() {
    json root = json::object();
    json* current = &root;
    while (!at_end()) {
      skip_ws_and_comments(true);
      if (at_end()) break;
      if (peek() == '[') {
        current = parse_table_header(root);
      } else {
        parse_key_value(*current);
      }
      expect_line_end();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("toml: line " + std::to_string(line_) + ": " + msg);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char advance() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws_and_comments(bool cross_lines) {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == '\n' && cross_lines) {
        advance();
      } else {
        break;
      }
    }
  }

  void expect_line_end() {
    skip_ws_and_comments(false);
    if (at_end()) return;
    if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
    advance();
  }

  std::string parse_key_segment() {
    skip_ws_and_comments(false);
    if (at_end()) fail("expected key");
    if (peek() == '"') return parse_basic_string();
    std::string key;
    while (!at_end()) {
      const char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        key += advance();
      } else {
        break;
      }
    }
    if (key.empty()) fail("expected key");
    return key;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts{parse_key_segment()};
    skip_ws_and_comments(false);
    while (!at_end() && peek() == '.') {
      advance();
      parts.push_back(parse_key_segment());
      skip_ws_and_comments(false);
    }
    return parts;
  }

  // Walk a dotted path, descending into the last element of any
  // array-of-tables met along the way (standard TOML resolution).
  json* navigate(json& root, const std::vector<std::string>& parts, size_t count) {
    json* node = &root;
    for (size_t i = 0; i < count; ++i) {
      json& slot = (*node)[parts[i]];
      if (slot.is_null()) slot = json::object();
      if (slot.is_array()) {
        if (slot.empty() || !slot.back().is_object()) fail("key '" + parts[i] + "' is an array");
        node = &slot.back();
      } else if (slot.is_object()) {
        node = &slot;
      } else {
        fail("key '" + parts[i] + "' already holds a value");
      }
    }
    return node;
  }

  json* parse_table_header(json& root) {
    advance();  // '['
    const bool array_table = !at_end() && peek() == '[';
    if (array_table) advance();
    const auto parts = parse_dotted_key();
    skip_ws_and_comments(false);
    if (at_end() || peek() != ']') fail("expected ']' in table header");
    advance();
    if (array_table) {
      if (at_end() || peek() != ']') fail("expected ']]' in array-of-tables header");
      advance();
    }

    json* parent = navigate(root, parts, parts.size() - 1);
    json& slot = (*parent)[parts.back()];
    if (array_table) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("'" + parts.back() + "' is not an array of tables");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("'" + parts.back() + "' is not a table");
    return &slot;
  }

  void parse_key_value(json& table) {
    const auto parts = parse_dotted_key();
    skip_ws_and_comments(false);
    if (at_end() || peek() != '=') fail("expected '=' after key");
    advance();
    skip_ws_and_comments(false);
    json value = parse_value();

    json* node = navigate(table, parts, parts.size() - 1);
    if (node->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*node)[parts.back()] = std::move(value);
  }

  json parse_value() {
    if (at_end()) fail("expected value");
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    if (c == '\'') fail("literal strings are not supported");
    return parse_scalar();
  }

  std::string parse_basic_string() {
    advance();  // opening quote
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      char c = advance();
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = advance();
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  json parse_array() {
    advance();  // '['
    json arr = json::array();
    while (true) {
      skip_ws_and_comments(true);
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        advance();
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_and_comments(true);
      if (at_end()) fail("unterminated array");
      if (peek() == ',') {
        advance();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_scalar() {
    std::string token;
    while (!at_end()) {
      const char c = peek();
      if (c == '\n' || c == '#' || c == ',' || c == ']' || c == ' ' || c == '\t' || c == '\r') {
        break;
      }
      token += advance();
    }
    if (token == "true") return true;
    if (token == "false") return false;
    if (token.empty()) fail("expected value");

    // strip TOML digit-group underscores and an explicit leading '+'
    std::string digits;
    for (char c : token) {
      if (c != '_') digits += c;
    }
    if (!digits.empty() && digits.front() == '+') digits.erase(digits.begin());
    const bool looks_float = digits.find_first_of(".eE") != std::string::npos;
    if (!looks_float) {
      long long iv = 0;
      const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), iv);
      if (ec == std::errc() && p == digits.data() + digits.size()) return iv;
    }
    double dv = 0.0;
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dv);
    if (ec == std::errc() && p == digits.data() + digits.size()) return dv;
    fail("cannot parse value '" + token + "'");
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

json parse(const std::string& text) { return Parser(text).run(); }

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("toml: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace emmc::toml
