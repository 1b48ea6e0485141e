#pragma once

#include <optional>
#include <vector>

#include "hedonic/surplus.hpp"

namespace hedonic {

/// Function tabulated on a point set (rows of `points`).
struct GridFunction {
  Matrix points;
  Vector values;

  Index size() const { return points.rows(); }
  void validate() const;
};

struct ConjugateResult {
  GridFunction function;
  std::vector<Index> argmax;      // maximizing grid index, lowest on ties
  Index boundary_argmax = 0;      // maximizers on the grid's bounding box
};

/// V^zeta(eps) = max_z [zeta(x, eps, z) - V(z)] by exhaustive scan over
/// the rows of `eps_points`.
ConjugateResult zeta_conjugate(const GridFunction& v, const SurplusFamily& f,
                               const Vector& x, const Matrix& eps_points);

/// V^zeta zeta(z) = max_eps [zeta(x, eps, z) - W(eps)] for W tabulated on
/// an eps grid, evaluated at the rows of `z_points`.
ConjugateResult zeta_conjugate_of_taste(const GridFunction& w, const SurplusFamily& f,
                                        const Vector& x, const Matrix& z_points);

/// V^{zeta zeta} on V's own grid, through `eps_points`. Never exceeds V.
GridFunction double_conjugate(const GridFunction& v, const SurplusFamily& f,
                              const Vector& x, const Matrix& eps_points);

struct ConvexityCheck {
  bool convex = false;
  double max_deviation = 0.0;
};

/// True iff max |V^{zeta zeta} - V| <= tol, over `restrict_to` indices of
/// V's grid when given, else over the whole grid.
ConvexityCheck is_zeta_convex(const GridFunction& v, const SurplusFamily& f,
                              const Vector& x, const Matrix& eps_points, double tol,
                              const std::optional<std::vector<Index>>& restrict_to = {});

/// Legendre-Fenchel transform max_z [z'eps - V(z)]: the bilinear case.
ConjugateResult legendre(const GridFunction& v, const Matrix& eps_points);

/// Regular lattice covering the bounding box of `observed`, padded by
/// `pad` times the box width on each side.
Matrix padded_lattice(const Matrix& observed, Index per_axis, double pad = 0.1);

}  // namespace hedonic
