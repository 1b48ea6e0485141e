#include "hedonic/config.hpp"

#include <filesystem>
#include <fstream>

namespace hedonic {

namespace {

Polynomial parse_polynomial(Json& node, Index variables, const std::string& what) {
  const Json& terms = node.is_array() ? node : node["terms"];
  if (!terms.is_array()) throw ConfigError(what + " needs a 'terms' array");
  std::vector<Monomial> out;
  for (const auto& t : terms) {
    Monomial m;
    m.coefficient = required_value<double>(t, "coefficient");
    m.powers = required_value<std::vector<int>>(t, "powers");
    if (static_cast<Index>(m.powers.size()) != variables)
      throw ConfigError(what + ": each term needs " + std::to_string(variables) + " powers");
    out.push_back(std::move(m));
  }
  return Polynomial(variables, std::move(out));
}

std::vector<Polynomial> parse_polynomials(Json& node, Index variables, const std::string& what) {
  if (!node.is_array()) throw ConfigError(what + " must be an array of polynomials");
  std::vector<Polynomial> out;
  for (auto& p : node) out.push_back(parse_polynomial(p, variables, what));
  return out;
}

std::string kind_of(const Json& node, const std::string& what) {
  if (!node.is_object()) throw ConfigError(what + " must be an object");
  return required_value<std::string>(node, "kind");
}

}  // namespace

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  return j;
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

Matrix parse_matrix(const Json& node, const std::string& what) {
  if (!node.is_array()) throw ConfigError(what + " must be an array of rows");
  const Index rows = static_cast<Index>(node.size());
  const Index cols = rows ? static_cast<Index>(node[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = node[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ConfigError(what + " rows must have equal length");
    for (Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number())
        throw ConfigError(what + " entries must be numbers");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Vector parse_vector(const Json& node, const std::string& what) {
  if (!node.is_array()) throw ConfigError(what + " must be an array");
  Vector v(static_cast<Index>(node.size()));
  for (Index k = 0; k < v.size(); ++k) {
    if (!node[static_cast<std::size_t>(k)].is_number())
      throw ConfigError(what + " entries must be numbers");
    v[k] = node[static_cast<std::size_t>(k)].get<double>();
  }
  return v;
}

Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Index k = 0; k < v.size(); ++k) j.push_back(v[k]);
  return j;
}

Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

DistributionSpec parse_distribution(Json& node) {
  const auto kind = kind_of(node, "distribution");
  DistributionSpec d;
  if (kind == "uniform_box") {
    d = DistributionSpec::uniform_box(parse_vector(node["lo"], "lo"), parse_vector(node["hi"], "hi"));
  } else if (kind == "gaussian") {
    d = DistributionSpec::gaussian(required_value<Index>(node, "dim"));
  } else if (kind == "truncated_gaussian") {
    d = DistributionSpec::truncated_gaussian(parse_vector(node["lo"], "lo"),
                                             parse_vector(node["hi"], "hi"));
  } else if (kind == "product") {
    std::vector<Marginal> marginals;
    if (!node["marginals"].is_array()) throw ConfigError("product needs a 'marginals' array");
    for (auto& m : node["marginals"])
      marginals.push_back(Marginal::parse(required_value<std::string>(m, "name"),
                                          value_or_default(m, "a", 0.0),
                                          value_or_default(m, "b", 1.0)));
    d = DistributionSpec::product(std::move(marginals));
  } else if (kind == "discrete") {
    d = DistributionSpec::discrete(parse_matrix(node["support"], "support"),
                                   parse_vector(node["probabilities"], "probabilities"));
  } else {
    throw ConfigError("unknown distribution kind '" + kind + "'");
  }
  d.validate();
  return d;
}

SurplusFamily parse_surplus(Json& node, Index dx, Index dz) {
  const auto kind = kind_of(node, "zeta");
  if (kind == "bilinear") return SurplusFamily::bilinear(dz);
  if (kind == "neg_quadratic") {
    auto f = SurplusFamily::neg_quadratic(parse_matrix(node["q"], "q"));
    if (f.dz() != dz) throw ConfigError("zeta q must be d_z x d_z");
    return f;
  }
  if (kind == "bilinear_feature")
    return SurplusFamily::bilinear_feature(dx, dz, parse_polynomials(node["phi"], dz, "phi"),
                                           parse_polynomials(node["psi"], dx + dz, "psi"));
  if (kind == "polynomial")
    return SurplusFamily::polynomial(dx, dz, parse_polynomial(node, dx + 2 * dz, "zeta"));
  throw ConfigError("unknown surplus kind '" + kind + "'");
}

ScalarFunction parse_scalar_function(Json& node, Index dw, Index dz) {
  const auto kind = kind_of(node, "scalar function");
  ScalarFunction g;
  if (kind == "quadratic") {
    const double sign = value_or_default(node, "sign", 1.0);
    if (!node.contains("q")) node["q"] = to_json(Matrix(Matrix::Identity(dz, dz)));
    if (!node.contains("center")) node["center"] = to_json(Vector(Vector::Zero(dz)));
    if (!node.contains("center_slope") || node["center_slope"].empty())
      node["center_slope"] = to_json(Matrix(Matrix::Zero(dz, dw)));
    Matrix slope = parse_matrix(node["center_slope"], "center_slope");
    if (slope.rows() == 0) slope = Matrix::Zero(dz, dw);
    if (slope.rows() != dz || slope.cols() != dw)
      throw ConfigError("center_slope must be d_z x " + std::to_string(dw));
    g = ScalarFunction::quadratic(sign, parse_matrix(node["q"], "q"),
                                  parse_vector(node["center"], "center"), std::move(slope));
    if (g.dz() != dz) throw ConfigError("quadratic q must be d_z x d_z");
    const Index divisor = value_or_default<Index>(node, "divide_by", -1);
    if (divisor >= 0) g = g.divided_by(divisor);
  } else if (kind == "polynomial") {
    g = ScalarFunction::polynomial(dw, dz, parse_polynomial(node, dw + dz, "polynomial"));
  } else if (kind == "zero") {
    g = ScalarFunction::zero(dw, dz);
  } else {
    throw ConfigError("unknown scalar function kind '" + kind + "'");
  }
  const double offset = value_or_default(node, "offset", 0.0);
  return offset != 0.0 ? g.shifted(offset) : g;
}

StructuralSpec parse_structural_spec(Json& node) {
  if (!node.is_object()) throw ConfigError("'spec' must be an object");
  const Index dz = required_value<Index>(node, "dz");
  if (dz < 1) throw ConfigError("dz must be at least 1");
  const Index dx = value_or_default<Index>(node, "dx", 0);
  const Index dy = value_or_default<Index>(node, "dy", dz);
  if (!node.contains("u_bar")) node["u_bar"] = Json{{"kind", "zero"}};
  if (!node.contains("zeta")) node["zeta"] = Json{{"kind", "bilinear"}};
  if (!node.contains("cost")) node["cost"] = Json{{"kind", "zero"}};
  StructuralSpec s{parse_scalar_function(node["u_bar"], dx, dz),
                   parse_scalar_function(node["cost"], dy, dz),
                   parse_surplus(node["zeta"], dx, dz)};
  return s;
}

QualityGrid parse_grid(Json& node) {
  if (!node.is_object()) throw ConfigError("'grid' must be an object");
  QualityGrid g{parse_vector(node["lo"], "grid lo"), parse_vector(node["hi"], "grid hi"),
                value_or_default<Index>(node, "per_axis", 50)};
  g.validate();
  return g;
}

SolverChoice parse_solver(Json& node) {
  if (node.is_null()) node = Json::object();
  SolverChoice s;
  const auto kind = value_or_default<std::string>(node, "kind", "exact");
  if (kind != "exact" && kind != "entropic")
    throw ConfigError("solver kind must be 'exact' or 'entropic'");
  s.entropic = kind == "entropic";
  if (s.entropic) {
    s.options.epsilon = value_or_default(node, "epsilon", s.options.epsilon);
    s.options.tol = value_or_default(node, "tol", s.options.tol);
    s.options.max_iter = value_or_default(node, "max_iter", s.options.max_iter);
  }
  return s;
}

}  // namespace hedonic
