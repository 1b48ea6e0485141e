#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "hedonic/distributions.hpp"
#include "hedonic/equilibrium.hpp"
#include "hedonic/identify.hpp"
#include "hedonic/surplus.hpp"

namespace hedonic {

using Json = nlohmann::ordered_json;

/// Raised for malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a JSON config file. Relative paths inside it are resolved against
/// the file's directory by resolve_path.
Json load_config(const std::string& path);
std::string resolve_path(const std::string& base_dir, const std::string& path);

// The parse_* functions fill missing optional keys with their defaults in
// place, so the node can be echoed as a complete record of the run.

/// {"kind": "uniform_box", "lo": [..], "hi": [..]}
/// {"kind": "gaussian", "dim": d}
/// {"kind": "truncated_gaussian", "lo": [..], "hi": [..]}
/// {"kind": "product", "marginals": [{"name": "normal", "a": 0, "b": 1}, ..]}
/// {"kind": "discrete", "support": [[..], ..], "probabilities": [..]}
DistributionSpec parse_distribution(Json& node);

/// {"kind": "bilinear" | "neg_quadratic" | "bilinear_feature" | "polynomial", ...}
SurplusFamily parse_surplus(Json& node, Index dx, Index dz);

/// {"kind": "quadratic", "sign", "q", "center", "center_slope", "divide_by"}
/// or {"kind": "polynomial", "terms": [{"coefficient", "powers"}]} or
/// {"kind": "zero"}; any kind accepts "offset".
ScalarFunction parse_scalar_function(Json& node, Index dw, Index dz);

/// {"dx", "dz", "dy", "u_bar", "cost", "zeta"}
StructuralSpec parse_structural_spec(Json& node);

/// {"lo": [..], "hi": [..], "per_axis": 50}
QualityGrid parse_grid(Json& node);

struct SolverChoice {
  bool entropic = false;
  EntropicOptions options;
};

/// {"kind": "exact" | "entropic", "epsilon", "tol", "max_iter"}
SolverChoice parse_solver(Json& node);

Matrix parse_matrix(const Json& node, const std::string& what);
Vector parse_vector(const Json& node, const std::string& what);
Json to_json(const Vector& v);
Json to_json(const Matrix& m);

/// Reads `key` from `node`, inserting `fallback` when absent.
template <typename T>
T value_or_default(Json& node, const std::string& key, const T& fallback) {
  if (!node.contains(key) || node[key].is_null()) node[key] = fallback;
  try {
    return node[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

/// Reads a required `key`.
template <typename T>
T required_value(const Json& node, const std::string& key) {
  if (!node.is_object() || !node.contains(key))
    throw ConfigError("config is missing '" + key + "'");
  try {
    return node.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace hedonic
