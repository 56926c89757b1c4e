#include "upmdp/config.hpp"

#include <cctype>
#include <charconv>

#include <nlohmann/json.hpp>

#include "upmdp/error.hpp"

namespace upmdp {

namespace {

using json = nlohmann::ordered_json;

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        skip_inline_ws();
        table = &root;
        for (const auto& part : dotted_key()) {
          json& next = (*table)[part];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) fail("table header names a non-table key");
          table = &next;
        }
        skip_inline_ws();
        expect(']');
        end_of_line();
        continue;
      }
      const auto keys = dotted_key();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      json value = parse_value();
      json* target = table;
      for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        json& next = (*target)[keys[i]];
        if (next.is_null()) next = json::object();
        target = &next;
      }
      if (target->contains(keys.back())) fail("duplicate key '" + keys.back() + "'");
      (*target)[keys.back()] = std::move(value);
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("config: " + what, pos_); }
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  void skip_blank_lines() {
    for (;;) {
      skip_inline_ws();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        ++pos_;
        continue;
      }
      return;
    }
  }

  // Whitespace, newlines and comments inside arrays.
  void skip_all_ws() { skip_blank_lines(); }

  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') ++pos_;
    if (eof() || peek() != '\n') fail("expected end of line");
    ++pos_;
  }

  std::string key() {
    if (eof()) fail("expected a key");
    if (peek() == '"' || peek() == '\'') return string_value();
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> keys{key()};
    for (;;) {
      skip_inline_ws();
      if (eof() || peek() != '.') return keys;
      ++pos_;
      skip_inline_ws();
      keys.push_back(key());
    }
  }

  std::string string_value() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (!eof() && peek() != quote) {
      char c = peek();
      if (c == '\n') fail("unterminated string");
      if (quote == '"' && c == '\\') {
        ++pos_;
        if (eof()) fail("unterminated escape");
        switch (peek()) {
          case 'n':
            c = '\n';
            break;
          case 't':
            c = '\t';
            break;
          case '"':
            c = '"';
            break;
          case '\\':
            c = '\\';
            break;
          default:
            fail("unsupported escape");
        }
      }
      out += c;
      ++pos_;
    }
    expect(quote);
    return out;
  }

  json parse_value() {
    if (eof()) fail("expected a value");
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      for (;;) {
        skip_all_ws();
        if (!eof() && peek() == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(parse_value());
        skip_all_ws();
        if (!eof() && peek() == ',') {
          ++pos_;
          continue;
        }
        skip_all_ws();
        expect(']');
        return arr;
      }
    }
    if (c == '{') {
      ++pos_;
      json obj = json::object();
      skip_inline_ws();
      if (!eof() && peek() == '}') {
        ++pos_;
        return obj;
      }
      for (;;) {
        skip_inline_ws();
        const std::string k = key();
        skip_inline_ws();
        expect('=');
        skip_inline_ws();
        obj[k] = parse_value();
        skip_inline_ws();
        if (!eof() && peek() == ',') {
          ++pos_;
          continue;
        }
        expect('}');
        return obj;
      }
    }
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

  json number() {
    const std::size_t start = pos_;
    std::string digits;
    bool is_float = false;
    while (!eof()) {
      const char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-') {
        digits += c;
      } else if (c == '.' || c == 'e' || c == 'E') {
        is_float = true;
        digits += c;
      } else if (c != '_') {
        break;
      }
      ++pos_;
    }
    if (digits.empty()) {
      pos_ = start;
      fail("expected a value");
    }
    const char* b = digits.data();
    const char* e = digits.data() + digits.size();
    if (*b == '+') ++b;
    if (!is_float) {
      std::int64_t v = 0;
      auto r = std::from_chars(b, e, v);
      if (r.ec == std::errc() && r.ptr == e) return v;
    }
    double v = 0.0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) {
      pos_ = start;
      fail("malformed number");
    }
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string toml_to_json(std::string_view toml_text) { return TomlParser(toml_text).parse().dump(); }

}  // namespace upmdp
