#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "panellp/error.hpp"

namespace panellp::detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline YAML::Node require(const YAML::Node& map, const std::string& key, const std::string& label = {}) {
  const auto n = map[key];
  if (!n || n.IsNull()) {
    throw ValidationError("missing required key '" + (label.empty() ? key : label) + "'");
  }
  return n;
}

template <typename T>
T as(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ValidationError("key '" + key + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError("key '" + key + "' has an invalid value '" + n.Scalar() + "'");
  }
}

inline void reject_unknown(const YAML::Node& map, std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown key '" + key + "' in " + where);
    }
  }
}

// Accepts `h`, `[lo, hi]` or `{min: lo, max: hi}`.
inline std::pair<int, int> parse_range(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) {
    const int h = as<int>(n, key);
    return {h, h};
  }
  if (n.IsSequence()) {
    if (n.size() != 2) throw ValidationError("key '" + key + "' must have two entries [min, max]");
    return {as<int>(n[0], key), as<int>(n[1], key)};
  }
  if (n.IsMap()) {
    reject_unknown(n, {"min", "max"}, key);
    return {as<int>(require(n, "min", key + ".min"), key + ".min"),
            as<int>(require(n, "max", key + ".max"), key + ".max")};
  }
  throw ValidationError("key '" + key + "' must be a range");
}

inline std::string read_text_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + what + " file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace panellp::detail
