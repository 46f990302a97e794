#pragma once

// Strict accessors over nlohmann::json used by every file-format reader.

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ropf::detail {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_object(const Json& j, std::string_view where) {
  if (!j.is_object()) throw FormatError(std::string(where) + ": expected an object");
}

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed,
                           std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw FormatError(std::string(where) + ": unknown field '" + key + "'");
  }
}

inline const Json& field(const Json& j, const char* key, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string(where) + ": missing field '" + key + "'");
  return *it;
}

inline double number(const Json& j, const char* key, std::string_view where) {
  const Json& v = field(j, key, where);
  if (!v.is_number()) throw FormatError(std::string(where) + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline long long integer(const Json& j, const char* key, std::string_view where) {
  const Json& v = field(j, key, where);
  if (!v.is_number_integer())
    throw FormatError(std::string(where) + ": field '" + key + "' must be an integer");
  return v.get<long long>();
}

inline bool boolean(const Json& j, const char* key, std::string_view where) {
  const Json& v = field(j, key, where);
  if (!v.is_boolean()) throw FormatError(std::string(where) + ": field '" + key + "' must be a boolean");
  return v.get<bool>();
}

inline std::string string(const Json& j, const char* key, std::string_view where) {
  const Json& v = field(j, key, where);
  if (!v.is_string()) throw FormatError(std::string(where) + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline const Json& array(const Json& j, const char* key, std::string_view where) {
  const Json& v = field(j, key, where);
  if (!v.is_array()) throw FormatError(std::string(where) + ": field '" + key + "' must be an array");
  return v;
}

template <typename T>
std::vector<T> vector_of(const Json& j, const char* key, std::string_view where) {
  const Json& a = array(j, key, where);
  std::vector<T> out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw FormatError(std::string(where) + ": '" + key + "' must hold numbers");
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace ropf::detail
