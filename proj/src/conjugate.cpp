#include "hedonic/conjugate.hpp"

#include <cmath>
#include <limits>

namespace hedonic {

namespace {

// max over rows a of `domain` of [surplus(a, b) - values(a)] for every row b
// of `range`. `surplus_at(a_point, b_point)` is evaluated in that order.
template <typename Surplus>
ConjugateResult scan(const Matrix& domain, const Vector& values, const Matrix& range,
                     Surplus&& surplus_at) {
  require(domain.rows() >= 1 && range.rows() >= 1, "conjugation needs non-empty grids");
  require(values.size() == domain.rows(), "grid function values do not match its grid");
  const Vector lo = domain.colwise().minCoeff().transpose();
  const Vector hi = domain.colwise().maxCoeff().transpose();

  ConjugateResult out;
  out.function.points = range;
  out.function.values.resize(range.rows());
  out.argmax.resize(range.rows());
  for (Index b = 0; b < range.rows(); ++b) {
    const Vector pb = range.row(b).transpose();
    double best = -std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index a = 0; a < domain.rows(); ++a) {
      const double val = surplus_at(domain.row(a).transpose(), pb) - values[a];
      if (val > best) {
        best = val;
        arg = a;
      }
    }
    out.function.values[b] = best;
    out.argmax[b] = arg;
    bool on_edge = false;
    for (Index c = 0; c < domain.cols(); ++c)
      on_edge |= domain(arg, c) == lo[c] || domain(arg, c) == hi[c];
    out.boundary_argmax += on_edge && domain.rows() > 1;
  }
  return out;
}

}  // namespace

void GridFunction::validate() const {
  require(points.rows() >= 1, "grid function needs at least one point");
  require(values.size() == points.rows(), "grid function values do not match its grid");
  require(values.allFinite(), "grid function values must be finite");
}

ConjugateResult zeta_conjugate(const GridFunction& v, const SurplusFamily& f,
                               const Vector& x, const Matrix& eps_points) {
  return scan(v.points, v.values, eps_points,
              [&](const Vector& z, const Vector& eps) { return f.eval(x, eps, z); });
}

ConjugateResult zeta_conjugate_of_taste(const GridFunction& w, const SurplusFamily& f,
                                        const Vector& x, const Matrix& z_points) {
  return scan(w.points, w.values, z_points,
              [&](const Vector& eps, const Vector& z) { return f.eval(x, eps, z); });
}

GridFunction double_conjugate(const GridFunction& v, const SurplusFamily& f,
                              const Vector& x, const Matrix& eps_points) {
  const auto first = zeta_conjugate(v, f, x, eps_points);
  return zeta_conjugate_of_taste(first.function, f, x, v.points).function;
}

ConvexityCheck is_zeta_convex(const GridFunction& v, const SurplusFamily& f,
                              const Vector& x, const Matrix& eps_points, double tol,
                              const std::optional<std::vector<Index>>& restrict_to) {
  const GridFunction vv = double_conjugate(v, f, x, eps_points);
  ConvexityCheck check;
  const auto consider = [&](Index k) {
    check.max_deviation = std::max(check.max_deviation, std::abs(vv.values[k] - v.values[k]));
  };
  if (restrict_to) {
    for (Index k : *restrict_to) consider(k);
  } else {
    for (Index k = 0; k < v.size(); ++k) consider(k);
  }
  check.convex = check.max_deviation <= tol;
  return check;
}

ConjugateResult legendre(const GridFunction& v, const Matrix& eps_points) {
  return zeta_conjugate(v, SurplusFamily::bilinear(v.points.cols()), Vector(0), eps_points);
}

Matrix padded_lattice(const Matrix& observed, Index per_axis, double pad) {
  require(observed.rows() >= 1 && observed.cols() >= 1, "lattice needs observed points");
  require(per_axis >= 2, "lattice needs at least two points per axis");
  const Index d = observed.cols();
  Vector lo = observed.colwise().minCoeff().transpose();
  Vector hi = observed.colwise().maxCoeff().transpose();
  for (Index c = 0; c < d; ++c) {
    double width = hi[c] - lo[c];
    if (width <= 0.0) width = std::max(1.0, std::abs(lo[c]));
    lo[c] -= pad * width;
    hi[c] += pad * width;
  }
  Index total = 1;
  for (Index c = 0; c < d; ++c) total *= per_axis;
  Matrix pts(total, d);
  for (Index r = 0; r < total; ++r) {
    Index rest = r;
    for (Index c = d - 1; c >= 0; --c) {
      const double t = static_cast<double>(rest % per_axis) / static_cast<double>(per_axis - 1);
      pts(r, c) = lo[c] + t * (hi[c] - lo[c]);
      rest /= per_axis;
    }
  }
  return pts;
}

}  // namespace hedonic
