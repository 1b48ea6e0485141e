#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hedonic/ot.hpp"

namespace hedonic {

namespace {

BarycentricProjection project(const TransportPlan& plan, const Matrix& points,
                              bool onto_targets) {
  const Index groups = onto_targets ? plan.n_target : plan.n_source;
  const Index expected = onto_targets ? plan.n_source : plan.n_target;
  require(points.rows() == expected, "point count does not match the plan");
  Matrix sums = Matrix::Zero(groups, points.cols());
  Vector mass = Vector::Zero(groups);
  for (const auto& e : plan.entries) {
    const Index g = onto_targets ? e.target : e.source;
    const Index k = onto_targets ? e.source : e.target;
    sums.row(g) += e.mass * points.row(k);
    mass[g] += e.mass;
  }
  BarycentricProjection out;
  out.points.resize(groups, points.cols());
  for (Index g = 0; g < groups; ++g) {
    if (mass[g] > 0.0) {
      out.points.row(g) = sums.row(g) / mass[g];
    } else {
      out.points.row(g).setConstant(std::numeric_limits<double>::quiet_NaN());
      out.empty_columns.push_back(g);
    }
  }
  return out;
}

}  // namespace

BarycentricProjection barycentric_projection(const TransportPlan& plan,
                                             const Matrix& source_points) {
  return project(plan, source_points, true);
}

BarycentricProjection forward_projection(const TransportPlan& plan,
                                         const Matrix& target_points) {
  return project(plan, target_points, false);
}

CyclicalReport check_cyclical_monotonicity(const TransportPlan& plan,
                                           const Matrix& surplus, Index k,
                                           Index trials, std::uint64_t seed) {
  require(k >= 2, "cycle length must be at least 2");
  CyclicalReport report;
  const Index support = static_cast<Index>(plan.entries.size());
  if (support < k) return report;
  report.applicable = true;
  report.worst_margin = std::numeric_limits<double>::infinity();

  std::mt19937_64 engine(seed);
  std::vector<Index> picks(support);
  for (Index t = 0; t < trials; ++t) {
    // Partial Fisher-Yates draw of k distinct support pairs.
    for (Index a = 0; a < support; ++a) picks[a] = a;
    for (Index a = 0; a < k; ++a) {
      const Index b = a + static_cast<Index>(engine() % static_cast<std::uint64_t>(support - a));
      std::swap(picks[a], picks[b]);
    }
    double margin = 0.0;
    for (Index a = 0; a < k; ++a) {
      const auto& here = plan.entries[picks[a]];
      const auto& next = plan.entries[picks[(a + 1) % k]];
      margin += surplus(here.source, here.target) - surplus(here.source, next.target);
    }
    ++report.trials;
    report.worst_margin = std::min(report.worst_margin, margin);
    if (margin < -1e-9) {
      if (report.violations == 0)
        for (Index a = 0; a < k; ++a) report.violating_cycle.push_back(plan.entries[picks[a]]);
      ++report.violations;
    }
  }
  return report;
}

MonotonicityReport check_pairwise_monotonicity(const TransportPlan& plan,
                                               const Matrix& source_points,
                                               const Matrix& target_points,
                                               double tol) {
  MonotonicityReport report;
  const auto& e = plan.entries;
  for (std::size_t a = 0; a < e.size(); ++a)
    for (std::size_t b = a + 1; b < e.size(); ++b) {
      const double inner =
          (source_points.row(e[a].source) - source_points.row(e[b].source))
              .dot(target_points.row(e[a].target) - target_points.row(e[b].target));
      ++report.pairs_checked;
      report.worst = std::min(report.worst, inner);
      if (inner < -tol) ++report.violations;
    }
  return report;
}

DualityReport check_duality(const TransportPlan& plan, const DualPair& duals,
                            const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                            const Matrix& surplus) {
  DualityReport r;
  r.primal = 0.0;
  for (const auto& e : plan.entries) r.primal += e.mass * surplus(e.source, e.target);
  r.dual = duals.objective(mu, nu);
  r.gap = std::abs(r.primal - r.dual);
  r.max_source_marginal_error = (plan.row_sums() - mu.weights()).cwiseAbs().maxCoeff();
  r.max_target_marginal_error = (plan.column_sums() - nu.weights()).cwiseAbs().maxCoeff();
  for (Index i = 0; i < surplus.rows(); ++i)
    for (Index j = 0; j < surplus.cols(); ++j)
      r.max_infeasibility = std::max(
          r.max_infeasibility, surplus(i, j) - duals.w_source[i] - duals.v_target[j]);
  for (const auto& e : plan.entries)
    r.max_slackness = std::max(
        r.max_slackness,
        std::abs(duals.w_source[e.source] + duals.v_target[e.target] -
                 surplus(e.source, e.target)));
  return r;
}

}  // namespace hedonic
