#include "stabrl/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stabrl/errors.hpp"

namespace stabrl {

std::string ConfigValue::type_name() const {
  if (is_number()) return "number";
  if (is_bool()) return "bool";
  if (is_string()) return "string";
  if (is_array()) return "array";
  return "table";
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ConfigValue parse() {
    ConfigValue root;
    ConfigValue::Table* section = &root.as_table();
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        section = &open_section(root, read_dotted_key(']'));
        expect(']');
      } else {
        const std::string key = read_key();
        skip_spaces();
        expect('=');
        skip_spaces();
        insert(*section, key, read_value());
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << "config line " << line_ << ": " << msg;
    throw InputError(os.str());
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  // Whitespace, comments and newlines; used inside arrays and between lines.
  void skip_all() {
    while (true) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      return;
    }
  }

  void skip_blank_lines() { skip_all(); }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') fail(std::string("unexpected '") + peek() + "'");
    ++pos_;
    ++line_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string read_key() {
    skip_spaces();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-')) {
      key += text_[pos_++];
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> read_dotted_key(char terminator) {
    std::vector<std::string> parts;
    while (true) {
      parts.push_back(read_key());
      skip_spaces();
      if (peek() == '.') {
        ++pos_;
        continue;
      }
      if (peek() != terminator) fail("malformed section header");
      return parts;
    }
  }

  ConfigValue::Table& open_section(ConfigValue& root, const std::vector<std::string>& parts) {
    ConfigValue::Table* t = &root.as_table();
    for (const auto& p : parts) {
      auto [it, inserted] = t->try_emplace(p, ConfigValue{});
      if (!it->second.is_table()) fail("'" + p + "' is not a table");
      t = &it->second.as_table();
    }
    return *t;
  }

  void insert(ConfigValue::Table& table, const std::string& key, ConfigValue value) {
    if (!table.emplace(key, std::move(value)).second) fail("duplicate key '" + key + "'");
  }

  ConfigValue read_value() {
    const char c = peek();
    if (c == '"') return ConfigValue(read_string());
    if (c == '[') return read_array();
    if (c == '{') return read_inline_table();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return ConfigValue(true);
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return ConfigValue(false);
    }
    return ConfigValue(read_number());
  }

  std::string read_string() {
    expect('"');
    std::string out;
    while (!eof() && peek() != '"') {
      if (peek() == '\n') fail("unterminated string");
      if (peek() == '\\') {
        ++pos_;
        switch (peek()) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail("unsupported escape");
        }
        ++pos_;
        continue;
      }
      out += text_[pos_++];
    }
    expect('"');
    return out;
  }

  double read_number() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' ||
                      peek() == '-' || peek() == '+' || peek() == '_')) {
      ++pos_;
    }
    std::string token(text_.substr(start, pos_ - start));
    std::erase(token, '_');
    if (!token.empty() && token.front() == '+') token.erase(0, 1);
    if (token.empty()) fail("expected a value");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
      fail("invalid number '" + token + "'");
    }
    return v;
  }

  ConfigValue read_array() {
    expect('[');
    ConfigValue::Array items;
    while (true) {
      skip_all();
      if (peek() == ']') break;
      items.push_back(read_value());
      skip_all();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
    expect(']');
    return ConfigValue(std::move(items));
  }

  ConfigValue read_inline_table() {
    expect('{');
    ConfigValue::Table table;
    skip_spaces();
    if (peek() == '}') {
      ++pos_;
      return ConfigValue(std::move(table));
    }
    while (true) {
      const std::string key = read_key();
      skip_spaces();
      expect('=');
      skip_spaces();
      insert(table, key, read_value());
      skip_spaces();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return ConfigValue(std::move(table));
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

void collect_leaves(const ConfigValue& v, const std::string& prefix,
                    std::vector<std::string>& out) {
  if (!v.is_table()) {
    out.push_back(prefix);
    return;
  }
  for (const auto& [k, child] : v.as_table()) {
    collect_leaves(child, prefix.empty() ? k : prefix + "." + k, out);
  }
}

}  // namespace

ConfigValue parse_config(std::string_view text) { return Parser(text).parse(); }

ConfigValue load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

const ConfigValue* ConfigReader::find(const std::string& path) const {
  const ConfigValue* node = &root_;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_table()) return nullptr;
    const auto& table = node->as_table();
    auto it = table.find(part);
    if (it == table.end()) return nullptr;
    node = &it->second;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

const ConfigValue* ConfigReader::require(const std::string& path, const char* type) {
  read_.insert(path);
  const ConfigValue* v = find(path);
  if (v == nullptr) throw InputError("config: missing required " + std::string(type) + " '" + path + "'");
  return v;
}

bool ConfigReader::has(const std::string& path) const { return find(path) != nullptr; }

double ConfigReader::number(const std::string& path, double fallback) {
  return has(path) ? number(path) : (read_.insert(path), fallback);
}

double ConfigReader::number(const std::string& path) {
  const ConfigValue* v = require(path, "number");
  if (!v->is_number()) throw InputError("config: '" + path + "' must be a number, got " + v->type_name());
  return v->as_number();
}

long ConfigReader::integer(const std::string& path, long fallback) {
  if (!has(path)) {
    read_.insert(path);
    return fallback;
  }
  const double v = number(path);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw InputError("config: '" + path + "' must be an integer");
  }
  return static_cast<long>(v);
}

bool ConfigReader::boolean(const std::string& path, bool fallback) {
  read_.insert(path);
  const ConfigValue* v = find(path);
  if (v == nullptr) return fallback;
  if (!v->is_bool()) throw InputError("config: '" + path + "' must be true or false");
  return v->as_bool();
}

std::string ConfigReader::string(const std::string& path, const std::string& fallback) {
  return has(path) ? string(path) : (read_.insert(path), fallback);
}

std::string ConfigReader::string(const std::string& path) {
  const ConfigValue* v = require(path, "string");
  if (!v->is_string()) throw InputError("config: '" + path + "' must be a string, got " + v->type_name());
  return v->as_string();
}

std::vector<double> ConfigReader::numbers(const std::string& path, std::vector<double> fallback) {
  read_.insert(path);
  const ConfigValue* v = find(path);
  if (v == nullptr) return fallback;
  if (v->is_number()) return {v->as_number()};
  if (!v->is_array()) throw InputError("config: '" + path + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& item : v->as_array()) {
    if (!item.is_number()) throw InputError("config: '" + path + "' must hold numbers only");
    out.push_back(item.as_number());
  }
  return out;
}

std::vector<std::vector<int>> ConfigReader::int_rows(const std::string& path) {
  const ConfigValue* v = require(path, "array");
  if (!v->is_array()) throw InputError("config: '" + path + "' must be an array of arrays");
  std::vector<std::vector<int>> rows;
  for (const auto& row : v->as_array()) {
    if (!row.is_array()) throw InputError("config: '" + path + "' rows must be arrays");
    std::vector<int> r;
    for (const auto& item : row.as_array()) {
      if (!item.is_number() || item.as_number() != std::floor(item.as_number())) {
        throw InputError("config: '" + path + "' entries must be integers");
      }
      r.push_back(static_cast<int>(item.as_number()));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::string> ConfigReader::unused() const {
  std::vector<std::string> leaves;
  collect_leaves(root_, "", leaves);
  std::vector<std::string> out;
  for (const auto& leaf : leaves) {
    if (!read_.contains(leaf)) out.push_back(leaf);
  }
  return out;
}

}  // namespace stabrl
