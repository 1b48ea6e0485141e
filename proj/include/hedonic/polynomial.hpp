#pragma once

#include <vector>

#include "hedonic/types.hpp"

namespace hedonic {

struct Monomial {
  double coefficient = 0.0;
  std::vector<int> powers;  // one nonnegative exponent per variable
};

/// Sparse multivariate polynomial with exact first and second partials.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(Index variables, std::vector<Monomial> terms);

  Index variables() const { return variables_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  int degree() const;

  double eval(const Vector& v) const;
  /// d/dv_k
  double partial(const Vector& v, Index k) const;
  /// d^2/dv_k dv_l
  double second_partial(const Vector& v, Index k, Index l) const;

 private:
  Index variables_ = 0;
  std::vector<Monomial> terms_;
};

}  // namespace hedonic
