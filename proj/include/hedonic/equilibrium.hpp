#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedonic/distributions.hpp"
#include "hedonic/ot.hpp"
#include "hedonic/surplus.hpp"

namespace hedonic {

/// Regular lattice of candidate qualities, endpoints included.
struct QualityGrid {
  Vector lo, hi;
  Index per_axis = 50;

  Index dim() const { return lo.size(); }
  Matrix points() const;
  void validate() const;
};

struct JointSurplus {
  double value = 0.0;
  Index argmax = 0;
  Vector z;
  bool interior = false;
};

/// max over the grid of Ubar(x, z) + zeta(x, eps, z) - C(y, z), lowest
/// index on ties. `interior` is false when the maximizer lies on the edge
/// of the grid's bounding box.
JointSurplus joint_surplus(const StructuralSpec& spec, const Vector& x, const Vector& eps,
                           const Vector& y, const Matrix& z_grid);

/// Raised when too many matches maximize on the edge of the quality grid.
class GridBoundaryAbort : public std::runtime_error {
 public:
  GridBoundaryAbort(const std::string& what, double fraction)
      : std::runtime_error(what), fraction_(fraction) {}
  double fraction() const { return fraction_; }

 private:
  double fraction_;
};

struct MarketConfig {
  StructuralSpec spec;
  std::optional<DistributionSpec> consumer_x;  // absent: no observable types
  DistributionSpec consumer_eps;
  DistributionSpec producer_y;
  Index n_consumers = 100;
  Index n_producers = 100;
  QualityGrid grid;
  std::uint64_t seed = 0;
  double boundary_threshold = 0.01;
  int threads = 1;
};

struct EquilibriumOutcome {
  Matrix consumer_x;    // n x d_x
  Matrix consumer_eps;  // n x d_z
  Matrix producer_y;    // m x d_y
  Vector consumer_weights;
  Vector producer_weights;
  Matrix z_grid;
  Matrix surplus;                   // S(i, j)
  std::vector<Index> pair_argmax;   // grid index per (i, j), row-major
  TransportPlan matching;           // consumers -> producers
  Matrix traded_z;                  // one row per matching entry
  Vector prices;                    // one per matching entry
  Vector indirect_v;                // consumers
  Vector indirect_w;                // producers, indirect_w[0] == 0
  Index boundary_pairs = 0;
  double boundary_fraction = 0.0;
  MarketDataset dataset;            // (x, z, p) per matching entry
};

/// Samples consumers and producers, matches them by exact transport on the
/// joint surplus, and splits each match's surplus into prices through the
/// duals (producer 0 pinned at zero indirect profit).
EquilibriumOutcome simulate_market(const MarketConfig& config);

/// Same, on given type samples (uniform weights).
EquilibriumOutcome equilibrium_from_types(const StructuralSpec& spec, Matrix consumer_x,
                                          Matrix consumer_eps, Matrix producer_y,
                                          const Matrix& z_grid, int threads = 1);

struct EquilibriumReport {
  double tol = 1e-7;
  double max_instability = 0.0;        // max S - V - W over all pairs
  double max_matched_slack = 0.0;      // max |V + W - S| on matches
  double max_price_gap_consumer = 0.0; // |U - V - p| on matches
  double max_price_gap_producer = 0.0; // |C + W - p| on matches
  double max_clearing_error = 0.0;
  double max_consumer_gain = 0.0;      // best deviation gain to a traded quality
  double max_producer_gain = 0.0;
  std::optional<Index> blocking_consumer;
  std::optional<Index> blocking_producer;
  bool stable = false;
  bool prices_consistent = false;
  bool market_clears = false;
  bool no_profitable_deviation = false;
  bool passed = false;
};

EquilibriumReport verify_equilibrium(const EquilibriumOutcome& outcome,
                                     const StructuralSpec& spec, double tol = 1e-7);

struct AtomlessnessReport {
  bool applicable = false;
  Index matched_pairs = 0;
  Index distinct_qualities = 0;
  Index coincident_pairs = 0;      // same traded z, distinct taste draws
  Index input_driven_pairs = 0;    // same traded z, identical taste draws
  double grid_step = 0.0;
};

AtomlessnessReport atomlessness_diagnostic(const EquilibriumOutcome& outcome);

}  // namespace hedonic
