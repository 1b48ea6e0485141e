#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hedonic/measures.hpp"
#include "hedonic/polynomial.hpp"

namespace hedonic {

/// Taste surplus zeta(x, eps, z) from a closed set of parametric forms.
///
///   bilinear          z' eps
///   bilinear-feature  phi(z)' psi(x, eps), phi and psi polynomial vectors
///   neg-quadratic     -1/2 (z - eps)' Q (z - eps), Q symmetric positive definite
///   polynomial        sum of monomials in (x, eps, z)
///
/// The neg-quadratic form differs from z' Q eps only by terms separable in
/// eps and in z, so both yield the same optimal couplings.
class SurplusFamily {
 public:
  enum class Kind { kBilinear, kBilinearFeature, kNegQuadratic, kPolynomial };

  static SurplusFamily bilinear(Index dz);
  /// phi: polynomials over z (dz variables); psi: polynomials over (x, eps).
  static SurplusFamily bilinear_feature(Index dx, Index dz,
                                        std::vector<Polynomial> phi,
                                        std::vector<Polynomial> psi);
  static SurplusFamily neg_quadratic(Matrix q);
  /// Polynomial over the concatenation (x, eps, z).
  static SurplusFamily polynomial(Index dx, Index dz, Polynomial p);

  Kind kind() const { return kind_; }
  std::string kind_name() const;
  Index dz() const { return dz_; }
  Index deps() const { return dz_; }
  /// Number of x coordinates used, or -1 when the form ignores x.
  Index dx() const { return dx_; }
  const Matrix& q() const { return q_; }
  const std::vector<Polynomial>& phi() const { return phi_; }
  const std::vector<Polynomial>& psi() const { return psi_; }
  const Polynomial& poly() const { return poly_; }

  double eval(const Vector& x, const Vector& eps, const Vector& z) const;
  Vector grad_z(const Vector& x, const Vector& eps, const Vector& z) const;
  Vector grad_eps(const Vector& x, const Vector& eps, const Vector& z) const;
  /// Mixed second derivatives: entry (a, b) = d^2 zeta / d eps_a d z_b.
  Matrix cross_hessian(const Vector& x, const Vector& eps, const Vector& z) const;

 private:
  void check_dims(const Vector& x, const Vector& eps, const Vector& z) const;
  Vector concat_x_eps(const Vector& x, const Vector& eps) const;

  Kind kind_ = Kind::kBilinear;
  Index dz_ = 0;
  Index dx_ = -1;
  Matrix q_;
  std::vector<Polynomial> phi_, psi_;
  Polynomial poly_;
};

struct TwistReport {
  double threshold = 1e-8;
  /// Smallest singular value of the cross-Hessian over the grid.
  double min_singular_value = 0.0;
  /// Sampled bound on the cross-Hessian norm.
  double max_singular_value = 0.0;
  /// Sampled bound on |grad_z zeta|.
  double max_grad_z_norm = 0.0;
  /// A pair eps != eps' with equal grad_z zeta at `witness_z`.
  std::optional<std::pair<Vector, Vector>> witness;
  Vector witness_z;
  std::string growth_condition = "not checked";
  bool passed = false;
};

/// Sampled check that eps -> grad_z zeta(x, eps, z) is injective with a
/// nondegenerate cross-Hessian. Never throws for non-empty grids.
TwistReport check_twist(const SurplusFamily& f, const Vector& x,
                        const DiscreteMeasure& eps_grid,
                        const DiscreteMeasure& z_grid, double threshold = 1e-8);

/// Scalar function g(w, z) of an agent type w and a quality z, used for the
/// base utility Ubar(x, z) and the production cost C(y, z).
///
///   quadratic   sign * 1/2 (z - c(w))' Q (z - c(w)),  c(w) = c0 + B w
///   polynomial  sum of monomials in (w, z)
class ScalarFunction {
 public:
  enum class Kind { kQuadratic, kPolynomial };

  static ScalarFunction quadratic(double sign, Matrix q, Vector center,
                                  Matrix center_slope);
  static ScalarFunction polynomial(Index dw, Index dz, Polynomial p);
  static ScalarFunction zero(Index dw, Index dz);

  Kind kind() const { return kind_; }
  Index dw() const { return dw_; }
  Index dz() const { return dz_; }
  double sign() const { return sign_; }
  const Matrix& q() const { return q_; }
  const Vector& center() const { return center_; }
  const Matrix& center_slope() const { return center_slope_; }
  const Polynomial& poly() const { return poly_; }

  double eval(const Vector& w, const Vector& z) const;
  Vector grad_z(const Vector& w, const Vector& z) const;

  /// Returns a copy with `c` added to every value.
  ScalarFunction shifted(double c) const;
  double offset() const { return offset_; }

  /// Returns a copy of a quadratic whose value is divided by w[k] (which
  /// must stay positive), e.g. C(y, z) = z^2 / (2y).
  ScalarFunction divided_by(Index k) const;
  Index divisor_index() const { return divisor_; }

 private:
  Vector center_at(const Vector& w) const;
  double scale(const Vector& w) const;

  Kind kind_ = Kind::kPolynomial;
  Index dw_ = 0;
  Index dz_ = 0;
  double sign_ = 1.0;
  double offset_ = 0.0;
  Index divisor_ = -1;
  Matrix q_;
  Vector center_;
  Matrix center_slope_;
  Polynomial poly_;
};

/// Known primitives of a hedonic market: U(x, eps, z) = Ubar(x, z) +
/// zeta(x, eps, z) for consumers, C(y, z) for producers.
struct StructuralSpec {
  ScalarFunction u_bar;
  ScalarFunction cost;
  SurplusFamily zeta;

  Index dz() const { return zeta.dz(); }
  double utility(const Vector& x, const Vector& eps, const Vector& z) const {
    return u_bar.eval(x, z) + zeta.eval(x, eps, z);
  }
};

}  // namespace hedonic
