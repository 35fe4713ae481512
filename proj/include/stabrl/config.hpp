#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stabrl {

/// Value in a scenario file: number, bool, string, array or table.
class ConfigValue {
 public:
  using Array = std::vector<ConfigValue>;
  using Table = std::map<std::string, ConfigValue>;

  ConfigValue() : data_(Table{}) {}
  explicit ConfigValue(double v) : data_(v) {}
  explicit ConfigValue(bool v) : data_(v) {}
  explicit ConfigValue(std::string v) : data_(std::move(v)) {}
  explicit ConfigValue(Array v) : data_(std::move(v)) {}
  explicit ConfigValue(Table v) : data_(std::move(v)) {}

  bool is_number() const { return std::holds_alternative<double>(data_); }
  bool is_bool() const { return std::holds_alternative<bool>(data_); }
  bool is_string() const { return std::holds_alternative<std::string>(data_); }
  bool is_array() const { return std::holds_alternative<Array>(data_); }
  bool is_table() const { return std::holds_alternative<Table>(data_); }

  double as_number() const { return std::get<double>(data_); }
  bool as_bool() const { return std::get<bool>(data_); }
  const std::string& as_string() const { return std::get<std::string>(data_); }
  const Array& as_array() const { return std::get<Array>(data_); }
  const Table& as_table() const { return std::get<Table>(data_); }
  Table& as_table() { return std::get<Table>(data_); }

  std::string type_name() const;

 private:
  std::variant<double, bool, std::string, Array, Table> data_;
};

/// Parses the flat `key = value` format with `[section]` and `[a.b]` headers,
/// inline tables `{k = v}`, arrays, strings, numbers, booleans and `#` comments.
/// Throws InputError with the line number on malformed input.
ConfigValue parse_config(std::string_view text);
ConfigValue load_config(const std::string& path);

/// Typed access by dotted path. Every path read is remembered so that
/// unknown keys can be reported afterwards.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigValue& root) : root_(root) {}

  bool has(const std::string& path) const;
  double number(const std::string& path, double fallback);
  double number(const std::string& path);
  long integer(const std::string& path, long fallback);
  bool boolean(const std::string& path, bool fallback);
  std::string string(const std::string& path, const std::string& fallback);
  std::string string(const std::string& path);
  std::vector<double> numbers(const std::string& path, std::vector<double> fallback);
  std::vector<std::vector<int>> int_rows(const std::string& path);

  // Leaf paths present in the file but never read.
  std::vector<std::string> unused() const;

 private:
  const ConfigValue* find(const std::string& path) const;
  const ConfigValue* require(const std::string& path, const char* type);

  const ConfigValue& root_;
  std::set<std::string> read_;
};

}  // namespace stabrl
