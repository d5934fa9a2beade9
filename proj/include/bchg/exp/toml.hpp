#pragma once

#include <map>
#include <string>
#include <vector>

namespace bchg {

// Minimal TOML subset: [section] headers, key = value with strings, numbers,
// booleans and flat arrays. Section names prefix keys as "section.key".
struct TomlValue {
  enum class Kind { kString, kNumber, kBool, kNumberArray, kStringArray };
  Kind kind = Kind::kString;
  std::string str;
  double number = 0.0;
  bool boolean = false;
  std::vector<double> numbers;
  std::vector<std::string> strings;
};

class TomlTable {
 public:
  static TomlTable parse(const std::string& text);
  static TomlTable parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key) const;
  double get_number(const std::string& key) const;
  long get_integer(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_numbers(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  double get_number_or(const std::string& key, double fallback) const;
  long get_integer_or(const std::string& key, long fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  const std::map<std::string, TomlValue>& values() const { return values_; }

 private:
  std::map<std::string, TomlValue> values_;
};

}  // namespace bchg
