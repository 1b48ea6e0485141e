#include "hedonic/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace hedonic {

namespace {

double ipow(double base, int exponent) {
  double result = 1.0;
  for (int e = 0; e < exponent; ++e) result *= base;
  return result;
}

}  // namespace

Polynomial::Polynomial(Index variables, std::vector<Monomial> terms)
    : variables_(variables), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    require(static_cast<Index>(t.powers.size()) == variables_,
            "monomial exponent count does not match the variable count");
    require(std::all_of(t.powers.begin(), t.powers.end(),
                        [](int p) { return p >= 0; }),
            "monomial exponents must be nonnegative");
    require(std::isfinite(t.coefficient), "monomial coefficient must be finite");
  }
}

int Polynomial::degree() const {
  int best = 0;
  for (const auto& t : terms_) {
    int d = 0;
    for (int p : t.powers) d += p;
    best = std::max(best, d);
  }
  return best;
}

double Polynomial::eval(const Vector& v) const {
  require(v.size() == variables_, "polynomial argument has wrong dimension");
  double total = 0.0;
  for (const auto& t : terms_) {
    double term = t.coefficient;
    for (Index i = 0; i < variables_; ++i) term *= ipow(v[i], t.powers[i]);
    total += term;
  }
  return total;
}

double Polynomial::partial(const Vector& v, Index k) const {
  require(v.size() == variables_, "polynomial argument has wrong dimension");
  double total = 0.0;
  for (const auto& t : terms_) {
    if (t.powers[k] == 0) continue;
    double term = t.coefficient * t.powers[k];
    for (Index i = 0; i < variables_; ++i)
      term *= ipow(v[i], i == k ? t.powers[i] - 1 : t.powers[i]);
    total += term;
  }
  return total;
}

double Polynomial::second_partial(const Vector& v, Index k, Index l) const {
  require(v.size() == variables_, "polynomial argument has wrong dimension");
  double total = 0.0;
  for (const auto& t : terms_) {
    std::vector<int> p = t.powers;
    double term = t.coefficient;
    if (p[k] == 0) continue;
    term *= p[k]--;
    if (p[l] == 0) continue;
    term *= p[l]--;
    for (Index i = 0; i < variables_; ++i) term *= ipow(v[i], p[i]);
    total += term;
  }
  return total;
}

}  // namespace hedonic
