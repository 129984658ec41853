#pragma once

// Sectioned key = value files. '#' and ';' start comments; keys are unique
// within a section; every lookup is recorded so unused (misspelled) keys can
// be reported with their line numbers.

#include <charconv>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mwell/errors.hpp"

namespace mwell::io {

/// Malformed or inconsistent configuration; `line()` is 0 when not tied to a line.
class ConfigError : public PreconditionError {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : PreconditionError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

struct IniEntry {
  std::string value;
  std::size_t line = 0;
};

class IniFile {
 public:
  static IniFile parse(std::istream& in) {
    IniFile f;
    std::string raw;
    std::string section;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string_view s = raw;
      if (const auto c = s.find_first_of("#;"); c != std::string_view::npos) s = s.substr(0, c);
      s = detail::trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError("unterminated section header", line);
        section = std::string(detail::trim(s.substr(1, s.size() - 2)));
        if (section.empty()) throw ConfigError("empty section name", line);
        if (!f.sections_.emplace(section, std::map<std::string, IniEntry>{}).second)
          throw ConfigError("duplicate section [" + section + "]", line);
        f.section_lines_[section] = line;
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line);
      if (section.empty()) throw ConfigError("key outside of any section", line);
      const std::string key(detail::trim(s.substr(0, eq)));
      const std::string value(detail::trim(s.substr(eq + 1)));
      if (key.empty()) throw ConfigError("empty key", line);
      if (value.empty()) throw ConfigError("empty value for '" + key + "'", line);
      if (!f.sections_[section].emplace(key, IniEntry{value, line}).second)
        throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line);
    }
    return f;
  }

  static IniFile parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  bool has_section(const std::string& s) const {
    used_sections_.insert(s);
    return sections_.count(s) != 0;
  }

  std::optional<IniEntry> find(const std::string& section, const std::string& key) const {
    used_sections_.insert(section);
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    used_.insert(section + "\x1f" + key);
    return k->second;
  }

  std::string get_string(const std::string& section, const std::string& key, std::optional<std::string> def = {}) const {
    if (auto e = find(section, key)) return e->value;
    if (def) return *def;
    throw ConfigError("missing key '" + key + "' in [" + section + "]", section_line(section));
  }

  double get_double(const std::string& section, const std::string& key, std::optional<double> def = {}) const {
    if (auto e = find(section, key)) return to_double(e->value, e->line);
    if (def) return *def;
    throw ConfigError("missing key '" + key + "' in [" + section + "]", section_line(section));
  }

  long long get_int(const std::string& section, const std::string& key, std::optional<long long> def = {}) const {
    if (auto e = find(section, key)) return to_int(e->value, e->line);
    if (def) return *def;
    throw ConfigError("missing key '" + key + "' in [" + section + "]", section_line(section));
  }

  std::vector<double> get_list(const std::string& section, const std::string& key) const {
    const auto e = find(section, key);
    if (!e) throw ConfigError("missing key '" + key + "' in [" + section + "]", section_line(section));
    return to_list(e->value, e->line);
  }

  std::size_t line_of(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return 0;
    const auto k = s->second.find(key);
    return k == s->second.end() ? section_line(section) : k->second.line;
  }

  std::size_t section_line(const std::string& section) const {
    const auto it = section_lines_.find(section);
    return it == section_lines_.end() ? 0 : it->second;
  }

  /// Throws on the first section or key that was never looked up.
  void reject_unused() const {
    for (const auto& [name, keys] : sections_) {
      if (!used_sections_.count(name)) throw ConfigError("unknown section [" + name + "]", section_line(name));
      for (const auto& [key, entry] : keys) {
        if (!used_.count(name + "\x1f" + key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]", entry.line);
      }
    }
  }

  static double to_double(const std::string& v, std::size_t line) {
    double out = 0.0;
    const auto* b = v.data();
    const auto* e = v.data() + v.size();
    const auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc() || r.ptr != e) throw ConfigError("not a number: '" + v + "'", line);
    return out;
  }

  static long long to_int(const std::string& v, std::size_t line) {
    long long out = 0;
    const auto* b = v.data();
    const auto* e = v.data() + v.size();
    const auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc() || r.ptr != e) throw ConfigError("not an integer: '" + v + "'", line);
    return out;
  }

  static std::vector<double> to_list(const std::string& v, std::size_t line) {
    std::vector<double> out;
    std::string_view rest = v;
    while (true) {
      const auto c = rest.find(',');
      const auto item = detail::trim(rest.substr(0, c));
      if (item.empty()) throw ConfigError("empty list item", line);
      out.push_back(to_double(std::string(item), line));
      if (c == std::string_view::npos) break;
      rest = rest.substr(c + 1);
    }
    return out;
  }

 private:
  std::map<std::string, std::map<std::string, IniEntry>> sections_;
  std::map<std::string, std::size_t> section_lines_;
  mutable std::set<std::string> used_;
  mutable std::set<std::string> used_sections_;
};

}  // namespace mwell::io
