#include "bchg/exp/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "bchg/errors.hpp"

namespace bchg {
namespace {

std::string trim(const std::string& s) {
  size_t begin = 0;
  size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

TomlValue parse_scalar(const std::string& raw) {
  TomlValue v;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.kind = TomlValue::Kind::kString;
    v.str = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::kBool;
    v.boolean = raw == "true";
    return v;
  }
  try {
    size_t used = 0;
    v.number = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    v.kind = TomlValue::Kind::kNumber;
    return v;
  } catch (const std::exception&) {
    throw ConfigurationError("toml: cannot parse value '" + raw + "'");
  }
}

TomlValue parse_value(const std::string& raw) {
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']') throw ConfigurationError("toml: unterminated array");
    TomlValue v;
    std::string inner = raw.substr(1, raw.size() - 2);
    std::vector<std::string> items;
    std::string current;
    bool in_string = false;
    for (char ch : inner) {
      if (ch == '"') in_string = !in_string;
      if (ch == ',' && !in_string) {
        items.push_back(trim(current));
        current.clear();
      } else {
        current += ch;
      }
    }
    if (!trim(current).empty()) items.push_back(trim(current));
    v.kind = TomlValue::Kind::kNumberArray;
    for (const auto& item : items) {
      TomlValue scalar = parse_scalar(item);
      if (scalar.kind == TomlValue::Kind::kString) {
        v.kind = TomlValue::Kind::kStringArray;
        v.strings.push_back(scalar.str);
      } else {
        v.numbers.push_back(scalar.number);
      }
    }
    return v;
  }
  return parse_scalar(raw);
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigurationError("toml: malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigurationError("toml: expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    table.values_[key] = parse_value(trim(line.substr(eq + 1)));
  }
  return table;
}

TomlTable TomlTable::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("toml: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string TomlTable::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != TomlValue::Kind::kString) {
    throw ConfigurationError("toml: missing string key '" + key + "'");
  }
  return it->second.str;
}

double TomlTable::get_number(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != TomlValue::Kind::kNumber) {
    throw ConfigurationError("toml: missing numeric key '" + key + "'");
  }
  return it->second.number;
}

long TomlTable::get_integer(const std::string& key) const {
  return static_cast<long>(get_number(key));
}

bool TomlTable::get_bool(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != TomlValue::Kind::kBool) {
    throw ConfigurationError("toml: missing boolean key '" + key + "'");
  }
  return it->second.boolean;
}

std::vector<double> TomlTable::get_numbers(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != TomlValue::Kind::kNumberArray) {
    throw ConfigurationError("toml: missing numeric array key '" + key + "'");
  }
  return it->second.numbers;
}

std::vector<std::string> TomlTable::get_strings(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != TomlValue::Kind::kStringArray) {
    throw ConfigurationError("toml: missing string array key '" + key + "'");
  }
  return it->second.strings;
}

std::string TomlTable::get_string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double TomlTable::get_number_or(const std::string& key, double fallback) const {
  return has(key) ? get_number(key) : fallback;
}

long TomlTable::get_integer_or(const std::string& key, long fallback) const {
  return has(key) ? get_integer(key) : fallback;
}

bool TomlTable::get_bool_or(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

}  // namespace bchg
