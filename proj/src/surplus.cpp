#include "hedonic/surplus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hedonic {

namespace {

void require_spd(const Matrix& q) {
  require(q.rows() >= 1 && q.rows() == q.cols(), "Q must be a square matrix");
  require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() > 0.0, "Q must be positive definite");
}

}  // namespace

SurplusFamily SurplusFamily::bilinear(Index dz) {
  require(dz >= 1, "bilinear surplus needs d_z >= 1");
  SurplusFamily f;
  f.kind_ = Kind::kBilinear;
  f.dz_ = dz;
  return f;
}

SurplusFamily SurplusFamily::bilinear_feature(Index dx, Index dz,
                                              std::vector<Polynomial> phi,
                                              std::vector<Polynomial> psi) {
  require(dz >= 1 && dx >= 0, "bilinear-feature surplus needs d_z >= 1");
  require(!phi.empty() && phi.size() == psi.size(),
          "bilinear-feature surplus needs dim phi(z) = dim psi(x, eps)");
  for (const auto& p : phi)
    require(p.variables() == dz, "phi components must be polynomials in z");
  for (const auto& p : psi)
    require(p.variables() == dx + dz,
            "psi components must be polynomials in (x, eps)");
  SurplusFamily f;
  f.kind_ = Kind::kBilinearFeature;
  f.dz_ = dz;
  f.dx_ = dx;
  f.phi_ = std::move(phi);
  f.psi_ = std::move(psi);
  return f;
}

SurplusFamily SurplusFamily::neg_quadratic(Matrix q) {
  require_spd(q);
  SurplusFamily f;
  f.kind_ = Kind::kNegQuadratic;
  f.dz_ = q.rows();
  f.q_ = std::move(q);
  return f;
}

SurplusFamily SurplusFamily::polynomial(Index dx, Index dz, Polynomial p) {
  require(dz >= 1 && dx >= 0, "polynomial surplus needs d_z >= 1");
  require(p.variables() == dx + 2 * dz,
          "polynomial surplus must be over (x, eps, z)");
  SurplusFamily f;
  f.kind_ = Kind::kPolynomial;
  f.dz_ = dz;
  f.dx_ = dx;
  f.poly_ = std::move(p);
  return f;
}

std::string SurplusFamily::kind_name() const {
  switch (kind_) {
    case Kind::kBilinear:
      return "bilinear";
    case Kind::kBilinearFeature:
      return "bilinear-feature";
    case Kind::kNegQuadratic:
      return "neg-quadratic";
    case Kind::kPolynomial:
      return "polynomial";
  }
  return "unknown";
}

void SurplusFamily::check_dims(const Vector& x, const Vector& eps,
                               const Vector& z) const {
  require(eps.size() == dz_ && z.size() == dz_,
          "surplus arguments have the wrong dimension");
  require(dx_ < 0 || x.size() == dx_, "surplus x argument has the wrong dimension");
}

Vector SurplusFamily::concat_x_eps(const Vector& x, const Vector& eps) const {
  Vector v(dx_ + dz_);
  v << x, eps;
  return v;
}

double SurplusFamily::eval(const Vector& x, const Vector& eps,
                           const Vector& z) const {
  check_dims(x, eps, z);
  switch (kind_) {
    case Kind::kBilinear:
      return z.dot(eps);
    case Kind::kBilinearFeature: {
      const Vector xe = concat_x_eps(x, eps);
      double total = 0.0;
      for (std::size_t k = 0; k < phi_.size(); ++k)
        total += phi_[k].eval(z) * psi_[k].eval(xe);
      return total;
    }
    case Kind::kNegQuadratic: {
      const Vector d = z - eps;
      return -0.5 * d.dot(q_ * d);
    }
    case Kind::kPolynomial: {
      Vector v(dx_ + 2 * dz_);
      v << x, eps, z;
      return poly_.eval(v);
    }
  }
  return 0.0;
}

Vector SurplusFamily::grad_z(const Vector& x, const Vector& eps,
                             const Vector& z) const {
  check_dims(x, eps, z);
  switch (kind_) {
    case Kind::kBilinear:
      return eps;
    case Kind::kBilinearFeature: {
      const Vector xe = concat_x_eps(x, eps);
      Vector g = Vector::Zero(dz_);
      for (std::size_t k = 0; k < phi_.size(); ++k) {
        const double s = psi_[k].eval(xe);
        for (Index b = 0; b < dz_; ++b) g[b] += phi_[k].partial(z, b) * s;
      }
      return g;
    }
    case Kind::kNegQuadratic:
      return q_ * (eps - z);
    case Kind::kPolynomial: {
      Vector v(dx_ + 2 * dz_);
      v << x, eps, z;
      Vector g(dz_);
      for (Index b = 0; b < dz_; ++b) g[b] = poly_.partial(v, dx_ + dz_ + b);
      return g;
    }
  }
  return {};
}

Vector SurplusFamily::grad_eps(const Vector& x, const Vector& eps,
                               const Vector& z) const {
  check_dims(x, eps, z);
  switch (kind_) {
    case Kind::kBilinear:
      return z;
    case Kind::kBilinearFeature: {
      const Vector xe = concat_x_eps(x, eps);
      Vector g = Vector::Zero(dz_);
      for (std::size_t k = 0; k < phi_.size(); ++k) {
        const double s = phi_[k].eval(z);
        for (Index a = 0; a < dz_; ++a) g[a] += psi_[k].partial(xe, dx_ + a) * s;
      }
      return g;
    }
    case Kind::kNegQuadratic:
      return q_ * (z - eps);
    case Kind::kPolynomial: {
      Vector v(dx_ + 2 * dz_);
      v << x, eps, z;
      Vector g(dz_);
      for (Index a = 0; a < dz_; ++a) g[a] = poly_.partial(v, dx_ + a);
      return g;
    }
  }
  return {};
}

Matrix SurplusFamily::cross_hessian(const Vector& x, const Vector& eps,
                                    const Vector& z) const {
  check_dims(x, eps, z);
  switch (kind_) {
    case Kind::kBilinear:
      return Matrix::Identity(dz_, dz_);
    case Kind::kBilinearFeature: {
      const Vector xe = concat_x_eps(x, eps);
      Matrix h = Matrix::Zero(dz_, dz_);
      for (std::size_t k = 0; k < phi_.size(); ++k)
        for (Index a = 0; a < dz_; ++a) {
          const double da = psi_[k].partial(xe, dx_ + a);
          if (da == 0.0) continue;
          for (Index b = 0; b < dz_; ++b) h(a, b) += da * phi_[k].partial(z, b);
        }
      return h;
    }
    case Kind::kNegQuadratic:
      return q_;
    case Kind::kPolynomial: {
      Vector v(dx_ + 2 * dz_);
      v << x, eps, z;
      Matrix h(dz_, dz_);
      for (Index a = 0; a < dz_; ++a)
        for (Index b = 0; b < dz_; ++b)
          h(a, b) = poly_.second_partial(v, dx_ + a, dx_ + dz_ + b);
      return h;
    }
  }
  return {};
}

TwistReport check_twist(const SurplusFamily& f, const Vector& x,
                        const DiscreteMeasure& eps_grid,
                        const DiscreteMeasure& z_grid, double threshold) {
  TwistReport report;
  report.threshold = threshold;
  report.min_singular_value = std::numeric_limits<double>::infinity();
  const Index ne = eps_grid.size();
  const Index nz = z_grid.size();
  const Index d = f.dz();
  if (ne == 0 || nz == 0 || eps_grid.dim() != d || z_grid.dim() != d) {
    report.min_singular_value = 0.0;
    return report;
  }

  constexpr double kInjectivityTol = 1e-9;
  Matrix grads(ne, d);
  std::vector<Index> order(ne);
  for (Index k = 0; k < nz; ++k) {
    const Vector z = z_grid.point(k);
    for (Index i = 0; i < ne; ++i) {
      const Vector eps = eps_grid.point(i);
      grads.row(i) = f.grad_z(x, eps, z).transpose();
      report.max_grad_z_norm = std::max(report.max_grad_z_norm, grads.row(i).norm());
      const Matrix h = f.cross_hessian(x, eps, z);
      Eigen::JacobiSVD<Matrix> svd(h);
      const auto& s = svd.singularValues();
      report.min_singular_value = std::min(report.min_singular_value, s.minCoeff());
      report.max_singular_value = std::max(report.max_singular_value, s.maxCoeff());
    }
    if (report.witness) continue;
    // Sort by the first gradient coordinate, then only compare neighbours
    // whose first coordinates are within tolerance.
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return grads(a, 0) < grads(b, 0); });
    for (Index a = 0; a < ne && !report.witness; ++a) {
      for (Index b = a + 1; b < ne; ++b) {
        const Index i = order[a], j = order[b];
        if (grads(j, 0) - grads(i, 0) > kInjectivityTol) break;
        if ((grads.row(i) - grads.row(j)).norm() > kInjectivityTol) continue;
        if (eps_grid.points().row(i) == eps_grid.points().row(j)) continue;
        const Index lo = std::min(i, j), hi = std::max(i, j);
        report.witness = std::make_pair(eps_grid.point(lo), eps_grid.point(hi));
        report.witness_z = z;
        break;
      }
    }
  }
  report.passed = !report.witness && report.min_singular_value > threshold;
  return report;
}

ScalarFunction ScalarFunction::quadratic(double sign, Matrix q, Vector center,
                                         Matrix center_slope) {
  require(sign == 1.0 || sign == -1.0, "quadratic sign must be +1 or -1");
  require_spd(q);
  const Index dz = q.rows();
  require(center.size() == dz, "quadratic center must have dimension d_z");
  if (center_slope.size() == 0) center_slope = Matrix::Zero(dz, 0);
  require(center_slope.rows() == dz, "center slope must have d_z rows");
  ScalarFunction g;
  g.kind_ = Kind::kQuadratic;
  g.dz_ = dz;
  g.dw_ = center_slope.cols();
  g.sign_ = sign;
  g.q_ = std::move(q);
  g.center_ = std::move(center);
  g.center_slope_ = std::move(center_slope);
  return g;
}

ScalarFunction ScalarFunction::polynomial(Index dw, Index dz, Polynomial p) {
  require(dw >= 0 && dz >= 1, "scalar polynomial needs d_z >= 1");
  require(p.variables() == dw + dz, "scalar polynomial must be over (w, z)");
  ScalarFunction g;
  g.kind_ = Kind::kPolynomial;
  g.dw_ = dw;
  g.dz_ = dz;
  g.poly_ = std::move(p);
  return g;
}

ScalarFunction ScalarFunction::zero(Index dw, Index dz) {
  return polynomial(dw, dz, Polynomial(dw + dz, {}));
}

ScalarFunction ScalarFunction::shifted(double c) const {
  ScalarFunction g = *this;
  g.offset_ += c;
  return g;
}

ScalarFunction ScalarFunction::divided_by(Index k) const {
  require(kind_ == Kind::kQuadratic, "only quadratics can be divided by a coordinate");
  require(k >= 0 && k < dw_, "divisor coordinate out of range");
  ScalarFunction g = *this;
  g.divisor_ = k;
  return g;
}

double ScalarFunction::scale(const Vector& w) const {
  if (divisor_ < 0) return 1.0;
  require(w[divisor_] > 0.0, "divisor coordinate must be positive");
  return 1.0 / w[divisor_];
}

Vector ScalarFunction::center_at(const Vector& w) const {
  return center_ + center_slope_ * w;
}

double ScalarFunction::eval(const Vector& w, const Vector& z) const {
  require(w.size() == dw_ && z.size() == dz_,
          "scalar function arguments have the wrong dimension");
  if (kind_ == Kind::kQuadratic) {
    const Vector d = z - center_at(w);
    return sign_ * 0.5 * scale(w) * d.dot(q_ * d) + offset_;
  }
  Vector v(dw_ + dz_);
  v << w, z;
  return poly_.eval(v) + offset_;
}

Vector ScalarFunction::grad_z(const Vector& w, const Vector& z) const {
  require(w.size() == dw_ && z.size() == dz_,
          "scalar function arguments have the wrong dimension");
  if (kind_ == Kind::kQuadratic) return sign_ * scale(w) * (q_ * (z - center_at(w)));
  Vector v(dw_ + dz_);
  v << w, z;
  Vector g(dz_);
  for (Index b = 0; b < dz_; ++b) g[b] = poly_.partial(v, dw_ + b);
  return g;
}

}  // namespace hedonic
