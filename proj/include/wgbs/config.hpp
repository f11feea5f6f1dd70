#pragma once

#include <algorithm>
#include <cctype>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wgbs/error.hpp"

namespace wgbs {

/// FNV-1a 64-bit hash; used to content-address config files in run manifests.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

/// Structured text configuration: `[section]` headers with `key = value`
/// entries, `#` or `;` comments, nested sections via dotted names
/// (`[coupler.model]`). Parsing is strict in two ways:
///   - duplicate sections/keys are rejected at parse time,
///   - every key must be consumed by the program; `require_all_consumed()`
///     rejects configs containing keys nothing ever asked for.
class Config {
 public:
  Config() = default;

  static Config parse_string(std::string text, std::string origin = "<string>") {
    Config cfg;
    cfg.raw_ = std::move(text);
    cfg.origin_ = std::move(origin);
    cfg.parse();
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  const std::string& raw_text() const { return raw_; }
  const std::string& origin() const { return origin_; }
  std::uint64_t content_hash() const { return fnv1a64(raw_); }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = values_.find(full_key(section, key));
    return it != values_.end();
  }

  bool has_section(const std::string& section) const {
    return std::any_of(order_.begin(), order_.end(), [&](const std::string& k) {
      return k.size() > section.size() && k.compare(0, section.size(), section) == 0 &&
             k[section.size()] == '/';
    });
  }

  /// Section names in file order (each listed once).
  std::vector<std::string> sections() const {
    std::vector<std::string> out;
    for (const auto& k : order_) {
      const std::string sec = k.substr(0, k.find('/'));
      if (std::find(out.begin(), out.end(), sec) == out.end()) out.push_back(sec);
    }
    return out;
  }

  /// Keys of one section in file order.
  std::vector<std::string> keys(const std::string& section) const {
    std::vector<std::string> out;
    for (const auto& k : order_) {
      const auto slash = k.find('/');
      if (k.compare(0, slash, section) == 0 && section.size() == slash) {
        out.push_back(k.substr(slash + 1));
      }
    }
    return out;
  }

  std::string get_string(const std::string& section, const std::string& key) const {
    return fetch(section, key);
  }
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    return has(section, key) ? fetch(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return parse_double(fetch(section, key), section, key);
  }
  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long long get_int(const std::string& section, const std::string& key) const {
    const std::string v = fetch(section, key);
    std::size_t used = 0;
    long long out = 0;
    try {
      out = std::stoll(v, &used);
    } catch (const std::exception&) {
      throw config_error(where(section, key) + ": not an integer: '" + v + "'");
    }
    if (used != v.size()) throw config_error(where(section, key) + ": not an integer: '" + v + "'");
    return out;
  }
  long long get_int(const std::string& section, const std::string& key, long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }

  bool get_bool(const std::string& section, const std::string& key) const {
    const std::string v = fetch(section, key);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw config_error(where(section, key) + ": not a boolean: '" + v + "'");
  }
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    return has(section, key) ? get_bool(section, key) : fallback;
  }

  /// Comma-separated list of doubles.
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
    const std::string v = fetch(section, key);
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
      std::size_t end = v.find(',', start);
      if (end == std::string::npos) end = v.size();
      const std::string item = trim(v.substr(start, end - start));
      if (!item.empty()) out.push_back(parse_double(item, section, key));
      start = end + 1;
    }
    if (out.empty()) throw config_error(where(section, key) + ": empty list");
    return out;
  }

  /// Complex refractive index written as `a` or `a+bi` / `a-bi`.
  std::complex<double> get_complex(const std::string& section, const std::string& key) const {
    const std::string v = fetch(section, key);
    return parse_complex(v, section, key);
  }

  /// Throws config_error naming every key that was never read.
  void require_all_consumed() const {
    std::vector<std::string> unknown;
    for (const auto& k : order_) {
      if (consumed_.find(k) == consumed_.end()) unknown.push_back(pretty(k));
    }
    if (!unknown.empty()) {
      std::string msg = origin_ + ": unknown config key";
      if (unknown.size() > 1) msg += "s";
      msg += ":";
      for (const auto& u : unknown) msg += " " + u;
      throw config_error(msg);
    }
  }

  std::complex<double> parse_complex(const std::string& v, const std::string& section,
                                     const std::string& key) const {
    // Accept forms: "3.48", "3.5+0.01i", "3.5-0.01i".
    std::string s = v;
    if (!s.empty() && (s.back() == 'i' || s.back() == 'I')) {
      s.pop_back();
      // locate the sign separating real and imaginary parts (not an exponent sign)
      std::size_t split = std::string::npos;
      for (std::size_t i = s.size(); i-- > 1;) {
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
          split = i;
          break;
        }
      }
      if (split == std::string::npos)
        throw config_error(where(section, key) + ": bad complex literal: '" + v + "'");
      const double re = parse_double(trim(s.substr(0, split)), section, key);
      const std::string im_str = trim(s.substr(split));
      const double im = (im_str == "+" || im_str == "-")
                            ? (im_str == "-" ? -1.0 : 1.0)
                            : parse_double(im_str, section, key);
      return {re, im};
    }
    return {parse_double(v, section, key), 0.0};
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static std::string full_key(const std::string& section, const std::string& key) {
    return section + "/" + key;
  }
  static std::string pretty(const std::string& fk) {
    const auto slash = fk.find('/');
    return "[" + fk.substr(0, slash) + "] " + fk.substr(slash + 1);
  }
  std::string where(const std::string& section, const std::string& key) const {
    return origin_ + ": [" + section + "] " + key;
  }

  double parse_double(const std::string& v, const std::string& section,
                      const std::string& key) const {
    std::size_t used = 0;
    double out = 0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      throw config_error(where(section, key) + ": not a number: '" + v + "'");
    }
    if (used != v.size()) throw config_error(where(section, key) + ": not a number: '" + v + "'");
    return out;
  }

  std::string fetch(const std::string& section, const std::string& key) const {
    const auto it = values_.find(full_key(section, key));
    if (it == values_.end())
      throw config_error(origin_ + ": missing required key [" + section + "] " + key);
    consumed_.insert(it->first);
    return it->second;
  }

  void parse() {
    std::istringstream in(raw_);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      // strip comments: full-line, or inline when preceded by whitespace
      std::size_t cut = std::string::npos;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if ((line[i] == '#' || line[i] == ';') &&
            (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
          cut = i;
          break;
        }
      }
      if (cut != std::string::npos) line.erase(cut);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw config_error(origin_ + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw config_error(origin_ + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw config_error(origin_ + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw config_error(origin_ + ":" + std::to_string(lineno) + ": empty key");
      if (section.empty())
        throw config_error(origin_ + ":" + std::to_string(lineno) +
                           ": key outside of any [section]");
      const std::string fk = full_key(section, key);
      if (values_.count(fk))
        throw config_error(origin_ + ":" + std::to_string(lineno) + ": duplicate key " +
                           pretty(fk));
      values_.emplace(fk, value);
      order_.push_back(fk);
    }
  }

  std::string raw_;
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> consumed_;
};

}  // namespace wgbs
