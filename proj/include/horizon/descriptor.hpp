#pragma once

// Parsing of "name:key=value,key=value" descriptor strings used by the CLI
// for worlds and strategies.

#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "horizon/error.hpp"

namespace horizon {

struct Descriptor {
  std::string name;
  std::vector<std::string> positional;
  std::map<std::string, std::string> named;

  bool has(const std::string& key) const { return named.count(key) != 0; }

  double number(const std::string& key) const {
    auto it = named.find(key);
    if (it == named.end()) throw UsageError("missing descriptor field '" + key + "' in '" + name + "'", key);
    return parse_number(it->second);
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  static double parse_number(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw UsageError("not a number: '" + text + "'", text);
    return v;
  }
};

inline Descriptor parse_descriptor(std::string_view text) {
  Descriptor d;
  const auto colon = text.find(':');
  d.name = std::string(text.substr(0, colon));
  if (d.name.empty()) throw UsageError("empty descriptor", std::string(text));
  if (colon == std::string_view::npos) return d;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    if (item.empty()) throw UsageError("empty field in descriptor '" + std::string(text) + "'", std::string(text));
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      d.positional.emplace_back(item);
    } else {
      d.named[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    }
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return d;
}

}  // namespace horizon
