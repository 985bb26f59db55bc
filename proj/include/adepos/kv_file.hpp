#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adepos {

// Minimal line-based key-value file:
//   key = value
//   [section name]
//   # comment
// Keys keep file order. Section headers open a new scope; keys before the
// first header belong to the unnamed global scope.
struct KvSection {
  std::string name;  // empty for the global scope
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
    return nullptr;
  }
};

struct KvFile {
  std::vector<KvSection> sections;  // sections[0] is always the global scope

  KvFile() { sections.emplace_back(); }

  KvSection& global() { return sections.front(); }
  const KvSection& global() const { return sections.front(); }
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}
}  // namespace detail

inline KvFile parse_kv(std::istream& in, const std::string& origin) {
  KvFile out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      out.sections.push_back(KvSection{detail::trim(t.substr(1, t.size() - 2)), {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = detail::trim(t.substr(0, eq));
    std::string val = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
    out.sections.back().entries.emplace_back(std::move(key), std::move(val));
  }
  return out;
}

inline KvFile load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return parse_kv(in, path);
}

inline KvFile parse_kv_string(const std::string& text, const std::string& origin = "<string>") {
  std::istringstream in(text);
  return parse_kv(in, origin);
}

// Splits "a,b,c" into trimmed tokens, dropping empties.
inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = detail::trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace adepos
