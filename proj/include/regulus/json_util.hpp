#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "regulus/error.hpp"

namespace regulus {

using json = nlohmann::json;

// JSON has no literal for non-finite numbers; they travel as strings.
inline json encode_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double decode_real(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw Error("expected a real number, got " + j.dump());
}

inline json encode_reals(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(encode_real(x));
  return out;
}

inline std::vector<double> decode_reals(const json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(decode_real(x));
  return out;
}

}  // namespace regulus
