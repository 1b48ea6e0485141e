#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hedonic/measures.hpp"

namespace hedonic {

/// Named one-dimensional law used as a factor of a product distribution.
struct Marginal {
  enum class Kind { kUniform, kNormal, kExponential, kLognormal };
  Kind kind = Kind::kUniform;
  double a = 0.0;  // uniform: lower; normal/lognormal: mean; exponential: rate
  double b = 1.0;  // uniform: upper; normal/lognormal: standard deviation

  static Marginal parse(const std::string& name, double a, double b);

  double quantile(double q) const;
  double mean() const;
  double lower() const;
  double upper() const;
};

/// A reference law for unobserved tastes, consumer types or producer types.
struct DistributionSpec {
  enum class Kind { kUniformBox, kGaussian, kProduct, kDiscrete };
  Kind kind = Kind::kUniformBox;
  Vector lo, hi;            // box; for kGaussian, truncation box when truncated
  Index dimension = 0;      // kGaussian
  bool truncated = false;   // kGaussian
  std::vector<Marginal> marginals;  // kProduct
  Matrix support;           // kDiscrete atoms
  Vector probabilities;     // kDiscrete

  static DistributionSpec uniform_box(Vector lo, Vector hi);
  static DistributionSpec gaussian(Index dimension);
  static DistributionSpec truncated_gaussian(Vector lo, Vector hi);
  static DistributionSpec product(std::vector<Marginal> marginals);
  static DistributionSpec discrete(Matrix support, Vector probabilities);

  Index dim() const;
  /// Throws InvalidInput for degenerate boxes or malformed parameters.
  void validate() const;
  bool contains(const Vector& point) const;
  bool absolutely_continuous() const { return kind != Kind::kDiscrete; }
};

/// Draws n points from `spec`, uniform weights, deterministic in `seed`.
DiscreteMeasure sample_reference(const DistributionSpec& spec, Index n,
                                 std::uint64_t seed);

/// Quadrature lattice with `per_axis` atoms per coordinate placed at the
/// marginal quantiles (k + 1/2) / per_axis; uniform weights. Requires a
/// product-form law (uniform box, untruncated Gaussian or product).
DiscreteMeasure lattice_reference(const DistributionSpec& spec, Index per_axis);

/// Derives an independent child seed from a root seed and a stream label.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

}  // namespace hedonic
