#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/errors.hpp"

namespace subdiff {

/// Flat `key = value` configuration text with [section] headers.  Sections
/// and keys keep insertion order, so serialize(parse(text)) is idempotent
/// and fixtures diff cleanly.
class ConfigDoc {
 public:
  static ConfigDoc parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          throw config_error("config line " + std::to_string(lineno) +
                             ": unterminated section header");
        }
        current = trim(t.substr(1, t.size() - 2));
        doc.section_index(current);  // create even if empty
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw config_error("config line " + std::to_string(lineno) +
                           ": expected key = value");
      }
      doc.set(current, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return doc;
  }

  static ConfigDoc load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  std::string serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& sec : sections_) {
      if (!first) out << "\n";
      first = false;
      if (!sec.name.empty()) out << "[" << sec.name << "]\n";
      for (const auto& e : sec.entries) {
        out << e.key << " = " << e.value << "\n";
      }
    }
    return out.str();
  }

  bool has(const std::string& section, const std::string& key) const {
    for (const auto& sec : sections_) {
      if (sec.name != section) continue;
      for (const auto& e : sec.entries) {
        if (e.key == key) return true;
      }
    }
    return false;
  }

  std::string get(const std::string& section, const std::string& key) const {
    for (const auto& sec : sections_) {
      if (sec.name != section) continue;
      for (const auto& e : sec.entries) {
        if (e.key == key) return e.value;
      }
    }
    throw config_error("missing config key [" + section + "] " + key);
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return to_double(get(section, key), section, key);
  }

  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  int get_int(const std::string& section, const std::string& key) const {
    const double v = get_double(section, key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
      throw config_error("config key [" + section + "] " + key +
                         " must be an integer");
    }
    return i;
  }

  int get_int_or(const std::string& section, const std::string& key,
                 int fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }

  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key) const {
    std::istringstream in(get(section, key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(tok, section, key));
    if (out.empty()) {
      throw config_error("config key [" + section + "] " + key +
                         " holds no numbers");
    }
    return out;
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    auto& sec = sections_[section_index(section)];
    for (auto& e : sec.entries) {
      if (e.key == key) {
        e.value = value;
        return;
      }
    }
    sec.entries.push_back({key, value});
  }

 private:
  struct Entry {
    std::string key, value;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
  };

  std::size_t section_index(const std::string& name) {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      if (sections_[i].name == name) return i;
    }
    sections_.push_back({name, {}});
    return sections_.size() - 1;
  }

  static std::string strip_comment(const std::string& s) {
    const auto h = s.find('#');
    return h == std::string::npos ? s : s.substr(0, h);
  }

  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static double to_double(const std::string& s, const std::string& section,
                          const std::string& key) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw config_error("config key [" + section + "] " + key +
                         ": cannot parse number from '" + s + "'");
    }
  }

  std::vector<Section> sections_;
};

}  // namespace subdiff
