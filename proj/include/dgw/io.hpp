#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgw/environment.hpp"
#include "dgw/offspring.hpp"

namespace dgw {

using json = nlohmann::json;

// A configuration error located by a JSON pointer.
class config_error : public std::invalid_argument {
 public:
  config_error(std::string pointer, const std::string& message)
      : std::invalid_argument(pointer + ": " + message), pointer_{std::move(pointer)}, message_{message} {}
  const std::string& pointer() const { return pointer_; }
  const std::string& message() const { return message_; }

 private:
  std::string pointer_;
  std::string message_;
};

namespace detail {

// Rewrites a module message "field/sub: text" as a config_error at base/field/sub.
[[noreturn]] inline void rethrow_at(const std::string& base, const std::invalid_argument& e) {
  const std::string what = e.what();
  const auto colon = what.find(": ");
  if (colon != std::string::npos && what.find(' ') > colon)
    throw config_error(base + "/" + what.substr(0, colon), what.substr(colon + 2));
  throw config_error(base, what);
}

inline const json& require(const json& j, const std::string& ptr, const char* key) {
  if (!j.is_object()) throw config_error(ptr, "must be an object");
  if (!j.contains(key)) throw config_error(ptr + "/" + key, "is required");
  return j.at(key);
}

inline double number_at(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw config_error(ptr, "must be a number");
  return j.get<double>();
}

inline std::string string_at(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw config_error(ptr, "must be a string");
  return j.get<std::string>();
}

inline void only_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw config_error(ptr + "/" + k, "unknown property");
  }
}

}  // namespace detail

// {"kind":"finite","weights":[...]} or {"kind":"lf","q":..,"r":..,"p":..},
// optionally with "truncate": K to keep only the masses f[0..K].
inline OffspringLaw law_from_json(const json& j, const std::string& ptr = "") {
  const std::string kind = detail::string_at(detail::require(j, ptr, "kind"), ptr + "/kind");
  std::optional<std::size_t> truncate;
  if (j.contains("truncate")) {
    const auto& t = j.at("truncate");
    if (!t.is_number_integer() || t.get<long long>() < 0) throw config_error(ptr + "/truncate", "must be an integer >= 0");
    truncate = t.get<std::size_t>();
  }
  OffspringLaw law = OffspringLaw::identity();
  try {
    if (kind == "finite") {
      detail::only_keys(j, ptr, {"kind", "weights", "truncate"});
      const auto& w = detail::require(j, ptr, "weights");
      if (!w.is_array()) throw config_error(ptr + "/weights", "must be an array of numbers");
      std::vector<double> weights;
      for (std::size_t k = 0; k < w.size(); ++k) weights.push_back(detail::number_at(w[k], ptr + "/weights/" + std::to_string(k)));
      law = OffspringLaw::finite(std::move(weights));
    } else if (kind == "lf") {
      detail::only_keys(j, ptr, {"kind", "q", "r", "p", "truncate"});
      law = OffspringLaw::linear_fractional(detail::number_at(detail::require(j, ptr, "q"), ptr + "/q"),
                                            detail::number_at(detail::require(j, ptr, "r"), ptr + "/r"),
                                            detail::number_at(detail::require(j, ptr, "p"), ptr + "/p"));
    } else {
      throw config_error(ptr + "/kind", "must be \"finite\" or \"lf\"");
    }
    if (truncate) {
      std::vector<double> w;
      for (std::size_t k = 0; k <= *truncate; ++k) w.push_back(law.mass(k));
      law = OffspringLaw::finite(std::move(w));
    }
  } catch (const config_error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    detail::rethrow_at(ptr, e);
  }
  return law;
}

inline json law_to_json(const OffspringLaw& law) {
  if (law.kind() == LawKind::LinearFractional) {
    const auto& p = law.lf_params();
    return {{"kind", "lf"}, {"q", p.q}, {"r", p.r}, {"p", p.p}};
  }
  return {{"kind", "finite"}, {"weights", std::vector<double>(law.weights().begin(), law.weights().end())}};
}

inline std::vector<OffspringLaw> laws_from_json(const json& j, const std::string& ptr) {
  if (!j.is_array() || j.empty()) throw config_error(ptr, "must be a nonempty array of laws");
  std::vector<OffspringLaw> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(law_from_json(j[i], ptr + "/" + std::to_string(i)));
  return out;
}

// {"kind":"constant","law":..}, {"kind":"identity"}, {"kind":"prefix","laws":[..],"tail":..},
// {"kind":"periodic","laws":[..]}, {"kind":"named","id":..,"params":{..}}.
inline Environment environment_from_json(const json& j, const std::string& ptr = "") {
  const std::string kind = detail::string_at(detail::require(j, ptr, "kind"), ptr + "/kind");
  if (kind == "constant") {
    detail::only_keys(j, ptr, {"kind", "law"});
    return Environment::constant(law_from_json(detail::require(j, ptr, "law"), ptr + "/law"));
  }
  if (kind == "identity") {
    detail::only_keys(j, ptr, {"kind"});
    return Environment::identity();
  }
  if (kind == "prefix") {
    detail::only_keys(j, ptr, {"kind", "laws", "tail"});
    return Environment::prefix(laws_from_json(detail::require(j, ptr, "laws"), ptr + "/laws"),
                               law_from_json(detail::require(j, ptr, "tail"), ptr + "/tail"));
  }
  if (kind == "periodic") {
    detail::only_keys(j, ptr, {"kind", "laws"});
    return Environment::periodic(laws_from_json(detail::require(j, ptr, "laws"), ptr + "/laws"));
  }
  if (kind == "named") {
    detail::only_keys(j, ptr, {"kind", "id", "params"});
    const std::string id = detail::string_at(detail::require(j, ptr, "id"), ptr + "/id");
    std::optional<ScaledDefectParams> params;
    if (j.contains("params")) {
      const std::string pp = ptr + "/params";
      const auto& p = j.at("params");
      detail::only_keys(p, pp, {"base", "a", "b", "gamma"});
      ScaledDefectParams sp;
      sp.base = law_from_json(detail::require(p, pp, "base"), pp + "/base");
      if (p.contains("a")) sp.a = detail::number_at(p.at("a"), pp + "/a");
      if (p.contains("b")) sp.b = detail::number_at(p.at("b"), pp + "/b");
      if (p.contains("gamma")) sp.gamma = detail::number_at(p.at("gamma"), pp + "/gamma");
      params = std::move(sp);
    }
    try {
      return Environment::named(id, std::move(params));
    } catch (const std::invalid_argument& e) {
      detail::rethrow_at(ptr, e);
    }
  }
  throw config_error(ptr + "/kind", "must be one of constant, identity, prefix, periodic, named");
}

}  // namespace dgw
