#pragma once

#include <optional>
#include <vector>

#include "hedonic/types.hpp"

namespace hedonic {

/// Weighted point cloud. Rows of `points()` are atoms; weights sum to one.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// Builds a measure from samples. Missing weights default to uniform;
  /// given weights are renormalized to unit mass.
  static DiscreteMeasure from_samples(Matrix points,
                                      std::optional<Vector> weights = {});

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  Vector point(Index i) const { return points_.row(i).transpose(); }
  double weight(Index i) const { return weights_[i]; }

  /// Index of the lexicographically smallest atom (lowest index on ties).
  Index lexicographic_min() const;

 private:
  DiscreteMeasure(Matrix points, Vector weights)
      : points_(std::move(points)), weights_(std::move(weights)) {}

  Matrix points_;
  Vector weights_;
};

/// Observed rows (x, z, p) from a single market.
struct MarketDataset {
  Matrix x;  // N x d_x, d_x may be 0
  Matrix z;  // N x d_z
  Vector p;  // N

  Index rows() const { return z.rows(); }
  Index dx() const { return x.cols(); }
  Index dz() const { return z.cols(); }

  /// Throws InvalidInput unless row counts agree, N >= 1, d_z >= 1 and
  /// prices are finite.
  void validate() const;
};

/// Qualities and prices traded by one observable-type cell.
struct ConditionalSlice {
  Vector x_value;
  DiscreteMeasure z_measure;
  Vector prices;                 // aligned with z_measure atoms
  std::vector<Index> row_ids;    // dataset rows falling in this cell
  std::vector<Index> atom_of_row;  // row_ids[k] -> atom index in z_measure
};

struct PartitionScheme {
  enum class Kind { kExactMatch, kBinning };
  Kind kind = Kind::kExactMatch;
  Vector widths;  // per x-coordinate, used by kBinning

  static PartitionScheme exact() { return {}; }
  static PartitionScheme binned(Vector widths) {
    return {Kind::kBinning, std::move(widths)};
  }
};

/// Splits the dataset into disjoint cells of x. Within a cell duplicate
/// qualities are merged; their prices must agree within 1e-9.
std::vector<ConditionalSlice> partition_by_x(const MarketDataset& dataset,
                                             const PartitionScheme& scheme);

/// Left-continuous generalized inverse of the weighted empirical CDF:
/// the smallest value v with F(v) >= q.
double empirical_cdf_quantile(const Vector& values, const Vector& weights,
                              double q);

/// Weighted empirical CDF evaluated at v, i.e. total mass at values <= v.
double empirical_cdf(const Vector& values, const Vector& weights, double v);

}  // namespace hedonic
