#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedonic/distributions.hpp"
#include "hedonic/measures.hpp"
#include "hedonic/ot.hpp"
#include "hedonic/surplus.hpp"

namespace hedonic {

/// Thrown when the surplus fails the twist (or single-crossing) check on
/// the data; carries the sampled report with its witness.
class TwistViolation : public std::runtime_error {
 public:
  TwistViolation(const std::string& what, TwistReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const TwistReport& report() const { return report_; }

 private:
  TwistReport report_;
};

struct IdentificationDiagnostics {
  std::string pipeline;
  std::optional<TwistReport> twist;
  double duality_gap = 0.0;
  double max_dual_infeasibility = 0.0;
  double max_slackness = 0.0;
  double plan_objective = 0.0;
  Index split_columns = 0;           // traded qualities matched to >1 taste
  Index boundary_argmax = 0;         // tastes whose best quality is on the hull box
  Index foc_edges = 0;
  double foc_max_residual = 0.0;     // |dual v difference - trapezoid integral|
  double foc_rms_residual = 0.0;
  Index price_gradient_skipped = 0;  // rank-deficient neighbourhoods
  std::vector<std::string> warnings;
};

/// Recovered consumer potential V(x, .) on the traded qualities of one cell,
/// with inverse demand eps(x, z) and the base-utility gradient.
struct IdentifiedPotential {
  Vector x_value;
  Matrix z_points;         // distinct traded qualities
  Vector z_weights;
  Vector prices;
  Vector v_values;         // V(x, z) up to a constant
  Matrix inverse_demand;   // eps(x, z) per row of z_points
  Matrix u_bar_grad;       // grad_z Ubar(x, z); NaN rows where prices give no slope
  Index normalization_point = 0;
  TransportPlan plan;      // reference tastes (source) to qualities (target)
  IdentificationDiagnostics diagnostics;
};

struct IdentifyOptions {
  /// Neighbours in the local least-squares price gradient; 0 means 2 d_z + 2.
  Index k_neighbors = 0;
  double twist_threshold = 1e-8;
  bool entropic = false;
  EntropicOptions entropic_options;
};

/// How the taste reference measure is discretized.
struct ReferenceOptions {
  DistributionSpec spec;
  Index n_ref = 400;
  std::uint64_t seed = 0;
  bool lattice = false;  // if true, n_ref is rounded to per_axis^d
};

DiscreteMeasure build_reference(const ReferenceOptions& options);

/// One-dimensional identification by the quantile transform
/// eps(x, z) = F_eps^{-1}(F_z(z)) at mid-ranks, with V obtained by
/// trapezoid integration of zeta_z along the sorted qualities. A negative
/// cross derivative uses the anti-monotone transform.
IdentifiedPotential scalar_identify(const ConditionalSlice& slice,
                                    const DiscreteMeasure& eps_reference,
                                    const SurplusFamily& f,
                                    const IdentifyOptions& options = {});

/// Bilinear-surplus identification: the potential is the Kantorovich dual on
/// qualities and inverse demand the barycentric projection of the plan.
IdentifiedPotential brenier_identify(const ConditionalSlice& slice,
                                     const DiscreteMeasure& eps_reference,
                                     const IdentifyOptions& options = {});

/// Identification under a general twisted surplus. Throws TwistViolation
/// when the sampled twist check fails.
IdentifiedPotential general_identify(const ConditionalSlice& slice,
                                     const DiscreteMeasure& eps_reference,
                                     const SurplusFamily& f,
                                     const IdentifyOptions& options = {});

/// Forward map h(x, eps) for z = h(x, eps) with h the gradient of a convex
/// function, tabulated on the reference tastes of one x-cell.
struct ForwardMap {
  Vector x_value;
  Matrix reference_points;
  Matrix h;
  TransportPlan plan;
};

std::vector<ForwardMap> simultaneous_equations_identify(
    const MarketDataset& dataset, const DiscreteMeasure& eps_reference,
    const PartitionScheme& scheme = PartitionScheme::exact());

struct PriceGradients {
  Matrix gradients;         // NaN rows where the neighbourhood is rank-deficient
  std::vector<Index> skipped;
};

/// Local least-squares slope of `values` at each point, fitted with an
/// intercept over the point and its k nearest neighbours.
PriceGradients local_gradients(const Matrix& points, const Vector& values, Index k);

struct AveragedEffects {
  Vector effect;   // weighted mean of local price gradients
  Index skipped = 0;
};

/// Estimates E[grad p(Z) | X = x] from one slice.
AveragedEffects averaged_partial_effects(const ConditionalSlice& slice, Index k_neighbors);

}  // namespace hedonic
