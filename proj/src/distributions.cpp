#include "hedonic/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/normal.hpp>

namespace hedonic {

namespace {

const boost::math::normal kStdNormal;

double normal_quantile(double q) { return boost::math::quantile(kStdNormal, q); }
double normal_cdf(double v) { return boost::math::cdf(kStdNormal, v); }

// Uniform draw in the open interval (0, 1) with 53 random bits. Built from
// raw engine output so streams are identical across standard libraries.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  double next() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

double truncated_normal_quantile(double lo, double hi, double q) {
  const double a = normal_cdf(lo);
  const double b = normal_cdf(hi);
  double v = normal_quantile(a + q * (b - a));
  return std::clamp(v, lo, hi);
}

}  // namespace

Marginal Marginal::parse(const std::string& name, double a, double b) {
  Marginal m;
  m.a = a;
  m.b = b;
  if (name == "uniform") {
    m.kind = Kind::kUniform;
    require(a < b, "uniform marginal needs lower < upper");
  } else if (name == "normal") {
    m.kind = Kind::kNormal;
    require(b > 0.0, "normal marginal needs positive standard deviation");
  } else if (name == "exponential") {
    m.kind = Kind::kExponential;
    require(a > 0.0, "exponential marginal needs positive rate");
  } else if (name == "lognormal") {
    m.kind = Kind::kLognormal;
    require(b > 0.0, "lognormal marginal needs positive scale");
  } else {
    throw InvalidInput("unknown marginal distribution '" + name + "'");
  }
  return m;
}

double Marginal::quantile(double q) const {
  switch (kind) {
    case Kind::kUniform:
      return a + q * (b - a);
    case Kind::kNormal:
      return a + b * normal_quantile(q);
    case Kind::kExponential:
      return -std::log1p(-q) / a;
    case Kind::kLognormal:
      return std::exp(a + b * normal_quantile(q));
  }
  return 0.0;
}

double Marginal::mean() const {
  switch (kind) {
    case Kind::kUniform:
      return 0.5 * (a + b);
    case Kind::kNormal:
      return a;
    case Kind::kExponential:
      return 1.0 / a;
    case Kind::kLognormal:
      return std::exp(a + 0.5 * b * b);
  }
  return 0.0;
}

double Marginal::lower() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind) {
    case Kind::kUniform:
      return a;
    case Kind::kNormal:
      return -inf;
    case Kind::kExponential:
    case Kind::kLognormal:
      return 0.0;
  }
  return -inf;
}

double Marginal::upper() const {
  return kind == Kind::kUniform ? b : std::numeric_limits<double>::infinity();
}

DistributionSpec DistributionSpec::uniform_box(Vector lo, Vector hi) {
  DistributionSpec s;
  s.kind = Kind::kUniformBox;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::gaussian(Index dimension) {
  DistributionSpec s;
  s.kind = Kind::kGaussian;
  s.dimension = dimension;
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::truncated_gaussian(Vector lo, Vector hi) {
  DistributionSpec s;
  s.kind = Kind::kGaussian;
  s.dimension = lo.size();
  s.truncated = true;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::product(std::vector<Marginal> marginals) {
  DistributionSpec s;
  s.kind = Kind::kProduct;
  s.marginals = std::move(marginals);
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::discrete(Matrix support, Vector probabilities) {
  DistributionSpec s;
  s.kind = Kind::kDiscrete;
  s.support = std::move(support);
  s.probabilities = std::move(probabilities);
  s.validate();
  return s;
}

Index DistributionSpec::dim() const {
  switch (kind) {
    case Kind::kUniformBox:
      return lo.size();
    case Kind::kGaussian:
      return dimension;
    case Kind::kProduct:
      return static_cast<Index>(marginals.size());
    case Kind::kDiscrete:
      return support.cols();
  }
  return 0;
}

void DistributionSpec::validate() const {
  const bool boxed = kind == Kind::kUniformBox ||
                     (kind == Kind::kGaussian && truncated);
  if (boxed) {
    require(lo.size() >= 1 && lo.size() == hi.size(),
            "box bounds must be non-empty and of equal length");
    require((lo.array() < hi.array()).all(), "degenerate box: need lo < hi");
  }
  switch (kind) {
    case Kind::kGaussian:
      require(dimension >= 1, "gaussian needs dimension >= 1");
      require(!truncated || lo.size() == dimension,
              "truncation box must match the gaussian dimension");
      break;
    case Kind::kProduct:
      require(!marginals.empty(), "product distribution needs marginals");
      break;
    case Kind::kDiscrete:
      require(support.rows() >= 1 && support.rows() == probabilities.size(),
              "discrete distribution needs one probability per atom");
      require((probabilities.array() >= 0.0).all() && probabilities.sum() > 0.0,
              "discrete probabilities must be nonnegative with positive sum");
      break;
    case Kind::kUniformBox:
      break;
  }
}

bool DistributionSpec::contains(const Vector& point) const {
  if (point.size() != dim()) return false;
  switch (kind) {
    case Kind::kUniformBox:
      return (point.array() >= lo.array()).all() &&
             (point.array() <= hi.array()).all();
    case Kind::kGaussian:
      return !truncated || ((point.array() >= lo.array()).all() &&
                            (point.array() <= hi.array()).all());
    case Kind::kProduct:
      for (Index c = 0; c < point.size(); ++c) {
        if (point[c] < marginals[c].lower() || point[c] > marginals[c].upper())
          return false;
      }
      return true;
    case Kind::kDiscrete:
      for (Index r = 0; r < support.rows(); ++r)
        if ((support.row(r).transpose() - point).cwiseAbs().maxCoeff() == 0.0)
          return true;
      return false;
  }
  return false;
}

DiscreteMeasure sample_reference(const DistributionSpec& spec, Index n,
                                 std::uint64_t seed) {
  spec.validate();
  require(n >= 1, "sample size must be at least 1");
  const Index d = spec.dim();
  UniformStream uniform(seed);
  Matrix pts(n, d);
  for (Index i = 0; i < n; ++i) {
    switch (spec.kind) {
      case DistributionSpec::Kind::kUniformBox:
        for (Index c = 0; c < d; ++c)
          pts(i, c) = spec.lo[c] + uniform.next() * (spec.hi[c] - spec.lo[c]);
        break;
      case DistributionSpec::Kind::kGaussian:
        for (Index c = 0; c < d; ++c) {
          const double u = uniform.next();
          pts(i, c) = spec.truncated
                          ? truncated_normal_quantile(spec.lo[c], spec.hi[c], u)
                          : normal_quantile(u);
        }
        break;
      case DistributionSpec::Kind::kProduct:
        for (Index c = 0; c < d; ++c)
          pts(i, c) = spec.marginals[c].quantile(uniform.next());
        break;
      case DistributionSpec::Kind::kDiscrete: {
        const double u = uniform.next() * spec.probabilities.sum();
        double cumulative = 0.0;
        Index pick = spec.support.rows() - 1;
        for (Index r = 0; r < spec.support.rows(); ++r) {
          cumulative += spec.probabilities[r];
          if (u < cumulative) {
            pick = r;
            break;
          }
        }
        pts.row(i) = spec.support.row(pick);
        break;
      }
    }
  }
  return DiscreteMeasure::from_samples(std::move(pts));
}

DiscreteMeasure lattice_reference(const DistributionSpec& spec, Index per_axis) {
  spec.validate();
  require(per_axis >= 1, "lattice needs at least one point per axis");
  require(spec.kind != DistributionSpec::Kind::kDiscrete,
          "lattice needs a continuous product-form distribution");
  const Index d = spec.dim();
  Matrix axes(per_axis, d);
  for (Index k = 0; k < per_axis; ++k) {
    const double q = (static_cast<double>(k) + 0.5) / static_cast<double>(per_axis);
    for (Index c = 0; c < d; ++c) {
      switch (spec.kind) {
        case DistributionSpec::Kind::kUniformBox:
          axes(k, c) = spec.lo[c] + q * (spec.hi[c] - spec.lo[c]);
          break;
        case DistributionSpec::Kind::kGaussian:
          axes(k, c) = spec.truncated
                           ? truncated_normal_quantile(spec.lo[c], spec.hi[c], q)
                           : normal_quantile(q);
          break;
        case DistributionSpec::Kind::kProduct:
          axes(k, c) = spec.marginals[c].quantile(q);
          break;
        case DistributionSpec::Kind::kDiscrete:
          break;
      }
    }
  }
  Index total = 1;
  for (Index c = 0; c < d; ++c) total *= per_axis;
  Matrix pts(total, d);
  // Last coordinate varies fastest.
  for (Index r = 0; r < total; ++r) {
    Index rest = r;
    for (Index c = d - 1; c >= 0; --c) {
      pts(r, c) = axes(rest % per_axis, c);
      rest /= per_axis;
    }
  }
  return DiscreteMeasure::from_samples(std::move(pts));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace hedonic
