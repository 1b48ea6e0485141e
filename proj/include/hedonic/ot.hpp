#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hedonic/measures.hpp"
#include "hedonic/surplus.hpp"

namespace hedonic {

struct PlanEntry {
  Index source = 0;
  Index target = 0;
  double mass = 0.0;
};

/// Sparse coupling between a source and a target measure. Entries are
/// sorted by (source, target) and carry positive mass.
struct TransportPlan {
  Index n_source = 0;
  Index n_target = 0;
  std::vector<PlanEntry> entries;
  double objective = 0.0;  // sum of mass * surplus

  Vector row_sums() const;
  Vector column_sums() const;
  Matrix dense() const;
};

/// Kantorovich potentials: w_source[i] + v_target[j] >= S(i, j), with
/// equality on the plan support. v_target[normalization] == 0.
struct DualPair {
  Vector w_source;
  Vector v_target;
  Index normalization = 0;

  double objective(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const;
};

struct TransportSolution {
  TransportPlan plan;
  DualPair duals;
};

/// Entry (i, j) = zeta(x, eps_i, z_j). Throws if any entry is non-finite.
Matrix surplus_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      const SurplusFamily& f, const Vector& x);

/// Maximizes total surplus over couplings of mu and nu. Uniform square
/// problems use a shortest-augmenting-path assignment solver; everything
/// else goes through successive shortest paths on the transportation graph.
/// Duals are pinned at the lexicographically smallest target atom; among
/// all optimal duals the pointwise smallest v_target is returned.
TransportSolution solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const Matrix& surplus);

/// Square assignment maximizing total surplus; returns the target matched
/// to each source. Optional outputs receive potentials with
/// w[i] + v[j] >= surplus(i, j).
std::vector<Index> solve_assignment(const Matrix& surplus, Vector* w = nullptr,
                                    Vector* v = nullptr);

struct EntropicOptions {
  double epsilon = 1e-2;
  double tol = 1e-9;
  Index max_iter = 10000;
};

struct EntropicSolution {
  TransportPlan plan;
  DualPair duals;
  Index iterations = 0;
  bool converged = false;
  double marginal_error = 0.0;  // L1 violation of the source marginal
};

/// Entropy-regularized transport in the log domain with an epsilon-scaling
/// schedule halving from 1 down to the target epsilon. Entries below 1e-12
/// are dropped from the returned plan.
EntropicSolution solve_entropic(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                const Matrix& surplus, const EntropicOptions& options);

struct BarycentricProjection {
  Matrix points;                   // n_target x d; NaN rows for empty columns
  std::vector<Index> empty_columns;
};

/// For each target column: mass-weighted mean of the matched source points.
BarycentricProjection barycentric_projection(const TransportPlan& plan,
                                             const Matrix& source_points);

/// Same, with roles swapped: mean matched target per source row.
BarycentricProjection forward_projection(const TransportPlan& plan,
                                         const Matrix& target_points);

struct CyclicalReport {
  bool applicable = false;
  Index trials = 0;
  Index violations = 0;
  double worst_margin = 0.0;
  std::vector<PlanEntry> violating_cycle;  // first violation found
};

/// Samples random k-cycles among support pairs and checks that cyclically
/// shifting the partners never raises total surplus (tolerance 1e-9).
CyclicalReport check_cyclical_monotonicity(const TransportPlan& plan,
                                           const Matrix& surplus, Index k,
                                           Index trials, std::uint64_t seed);

struct MonotonicityReport {
  Index pairs_checked = 0;
  Index violations = 0;
  double worst = 0.0;  // most negative (e_i - e_j)'(z_i - z_j)
};

/// Exhaustive check of (e_i - e_j)'(z_i - z_j) >= -tol over support pairs.
MonotonicityReport check_pairwise_monotonicity(const TransportPlan& plan,
                                               const Matrix& source_points,
                                               const Matrix& target_points,
                                               double tol = 1e-12);

struct DualityReport {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double max_source_marginal_error = 0.0;
  double max_target_marginal_error = 0.0;
  double max_infeasibility = 0.0;  // max(S - w - v, 0) over all pairs
  double max_slackness = 0.0;      // max |w + v - S| on the support
};

DualityReport check_duality(const TransportPlan& plan, const DualPair& duals,
                            const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                            const Matrix& surplus);

}  // namespace hedonic
