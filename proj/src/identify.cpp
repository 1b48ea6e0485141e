#include "hedonic/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hedonic/conjugate.hpp"

namespace hedonic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Index default_neighbors(const IdentifyOptions& options, Index dz) {
  return options.k_neighbors > 0 ? options.k_neighbors : 2 * dz + 2;
}

// Indices of the k nearest rows to row j (excluding j), nearest first,
// lower index on distance ties.
std::vector<Index> nearest(const Matrix& points, Index j, Index k) {
  std::vector<Index> others;
  std::vector<double> dist(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    if (i == j) continue;
    others.push_back(i);
    dist[i] = (points.row(i) - points.row(j)).squaredNorm();
  }
  const auto cmp = [&](Index a, Index b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  };
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), others.size());
  std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take),
                    others.end(), cmp);
  others.resize(take);
  return others;
}

// Trapezoid check of grad_z V = grad_z zeta(x, eps(z), z) along
// nearest-neighbour edges between traded qualities.
void foc_consistency(const Matrix& z, const Vector& v, const Matrix& grad_v,
                     IdentificationDiagnostics& diag) {
  double sum_sq = 0.0;
  for (Index j = 0; j < z.rows(); ++j) {
    const auto nb = nearest(z, j, 1);
    if (nb.empty()) continue;
    const Index k = nb[0];
    const Vector step = (z.row(k) - z.row(j)).transpose();
    const double integral = 0.5 * (grad_v.row(j) + grad_v.row(k)).dot(step);
    const double residual = std::abs((v[k] - v[j]) - integral);
    diag.foc_max_residual = std::max(diag.foc_max_residual, residual);
    sum_sq += residual * residual;
    ++diag.foc_edges;
  }
  if (diag.foc_edges > 0)
    diag.foc_rms_residual = std::sqrt(sum_sq / static_cast<double>(diag.foc_edges));
}

IdentifiedPotential start_potential(const ConditionalSlice& slice) {
  IdentifiedPotential out;
  out.x_value = slice.x_value;
  out.z_points = slice.z_measure.points();
  out.z_weights = slice.z_measure.weights();
  out.prices = slice.prices;
  return out;
}

// u_bar_grad = grad p - grad_z V, NaN where the price slope is unavailable.
void fill_u_bar_grad(IdentifiedPotential& out, const Matrix& grad_v, Index k) {
  const Index n = out.z_points.rows();
  const Index d = out.z_points.cols();
  out.u_bar_grad = Matrix::Constant(n, d, kNaN);
  if (n < 2) {
    out.diagnostics.price_gradient_skipped = n;
    return;
  }
  const auto price = local_gradients(out.z_points, out.prices, k);
  out.diagnostics.price_gradient_skipped = static_cast<Index>(price.skipped.size());
  for (Index j = 0; j < n; ++j)
    out.u_bar_grad.row(j) = price.gradients.row(j) - grad_v.row(j);
}

// North-west corner coupling of two measures listed in matching order.
TransportPlan monotone_coupling(const std::vector<Index>& source_order, const Vector& ws,
                                const std::vector<Index>& target_order, const Vector& wt) {
  TransportPlan plan;
  plan.n_source = ws.size();
  plan.n_target = wt.size();
  std::size_t a = 0, b = 0;
  double left_s = ws[source_order[0]], left_t = wt[target_order[0]];
  while (true) {
    const double mass = std::min(left_s, left_t);
    // Drop rounding slivers left by unequal atom weights.
    if (mass > 1e-15) plan.entries.push_back({source_order[a], target_order[b], mass});
    left_s -= mass;
    left_t -= mass;
    if (left_s <= left_t) {
      if (++a == source_order.size()) break;
      left_s = ws[source_order[a]];
    } else {
      if (++b == target_order.size()) break;
      left_t = wt[target_order[b]];
    }
  }
  std::sort(plan.entries.begin(), plan.entries.end(), [](const PlanEntry& x, const PlanEntry& y) {
    return x.source < y.source || (x.source == y.source && x.target < y.target);
  });
  return plan;
}

std::vector<Index> argsort(const Vector& v) {
  std::vector<Index> order(v.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] < v[b]; });
  return order;
}

}  // namespace

DiscreteMeasure build_reference(const ReferenceOptions& options) {
  if (!options.lattice) return sample_reference(options.spec, options.n_ref, options.seed);
  const double d = static_cast<double>(options.spec.dim());
  const auto per_axis = static_cast<Index>(
      std::max(1.0, std::round(std::pow(static_cast<double>(options.n_ref), 1.0 / d))));
  return lattice_reference(options.spec, per_axis);
}

PriceGradients local_gradients(const Matrix& points, const Vector& values, Index k) {
  require(points.rows() == values.size(), "gradient inputs differ in length");
  require(k >= 1, "local gradients need at least one neighbour");
  const Index n = points.rows();
  const Index d = points.cols();
  PriceGradients out;
  out.gradients = Matrix::Constant(n, d, kNaN);
  for (Index j = 0; j < n; ++j) {
    const auto nb = nearest(points, j, k);
    Matrix design(static_cast<Index>(nb.size()) + 1, d + 1);
    Vector rhs(design.rows());
    design(0, 0) = 1.0;
    design.row(0).tail(d).setZero();
    rhs[0] = values[j];
    for (std::size_t r = 0; r < nb.size(); ++r) {
      const auto row = static_cast<Index>(r) + 1;
      design(row, 0) = 1.0;
      design.row(row).tail(d) = points.row(nb[r]) - points.row(j);
      rhs[row] = values[nb[r]];
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (design.rows() < d + 1 || qr.rank() < d + 1) {
      out.skipped.push_back(j);
      continue;
    }
    const Vector coef = qr.solve(rhs);
    out.gradients.row(j) = coef.tail(d).transpose();
  }
  return out;
}

IdentifiedPotential scalar_identify(const ConditionalSlice& slice,
                                    const DiscreteMeasure& eps_reference,
                                    const SurplusFamily& f, const IdentifyOptions& options) {
  require(slice.z_measure.dim() == 1 && f.dz() == 1,
          "scalar identification needs one-dimensional qualities");
  require(eps_reference.dim() == 1, "scalar identification needs scalar tastes");
  const Vector& x = slice.x_value;
  const Matrix& zp = slice.z_measure.points();
  const Matrix& ep = eps_reference.points();

  // Single crossing: the cross derivative must keep one strict sign.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index i = 0; i < ep.rows(); ++i)
    for (Index j = 0; j < zp.rows(); ++j) {
      const double c = f.cross_hessian(x, ep.row(i), zp.row(j))(0, 0);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  auto twist = check_twist(f, x, eps_reference, slice.z_measure, options.twist_threshold);
  if (!(lo > 0.0 || hi < 0.0)) {
    twist.passed = false;
    throw TwistViolation("cross derivative changes sign or vanishes on the data range",
                         twist);
  }
  const bool increasing = lo > 0.0;

  IdentifiedPotential out = start_potential(slice);
  out.diagnostics.pipeline = "scalar";
  out.diagnostics.twist = twist;
  const Index n = zp.rows();
  const Vector zv = zp.col(0);
  const Vector& zw = slice.z_measure.weights();
  const Vector ev = ep.col(0);
  const Vector& ew = eps_reference.weights();

  const auto z_order = argsort(zv);
  out.inverse_demand.resize(n, 1);
  double below = 0.0;
  for (Index j : z_order) {
    const double mid = std::clamp(below + 0.5 * zw[j], 0.0, 1.0);
    out.inverse_demand(j, 0) =
        empirical_cdf_quantile(ev, ew, increasing ? mid : 1.0 - mid);
    below += zw[j];
  }

  Matrix grad_v(n, 1);
  for (Index j = 0; j < n; ++j)
    grad_v(j, 0) = f.grad_z(x, out.inverse_demand.row(j), zp.row(j))[0];
  out.v_values.resize(n);
  out.normalization_point = z_order.front();
  out.v_values[z_order.front()] = 0.0;
  for (std::size_t r = 1; r < z_order.size(); ++r) {
    const Index a = z_order[r - 1], b = z_order[r];
    out.v_values[b] = out.v_values[a] + 0.5 * (grad_v(a, 0) + grad_v(b, 0)) * (zv[b] - zv[a]);
  }

  auto e_order = argsort(ev);
  if (!increasing) std::reverse(e_order.begin(), e_order.end());
  out.plan = monotone_coupling(e_order, ew, z_order, zw);
  for (const auto& e : out.plan.entries)
    out.plan.objective += e.mass * f.eval(x, ep.row(e.source), zp.row(e.target));
  out.diagnostics.plan_objective = out.plan.objective;

  fill_u_bar_grad(out, grad_v, default_neighbors(options, 1));
  foc_consistency(zp, out.v_values, grad_v, out.diagnostics);
  return out;
}

IdentifiedPotential general_identify(const ConditionalSlice& slice,
                                     const DiscreteMeasure& eps_reference,
                                     const SurplusFamily& f, const IdentifyOptions& options) {
  const Index d = slice.z_measure.dim();
  require(f.dz() == d && eps_reference.dim() == d,
          "surplus, tastes and qualities must share dimension d_z");
  const Vector& x = slice.x_value;
  auto twist = check_twist(f, x, eps_reference, slice.z_measure, options.twist_threshold);
  if (!twist.passed) throw TwistViolation("surplus fails the twist condition", twist);

  IdentifiedPotential out = start_potential(slice);
  out.diagnostics.pipeline = f.kind() == SurplusFamily::Kind::kBilinear ? "brenier" : "general";
  out.diagnostics.twist = twist;

  const Matrix s = surplus_matrix(eps_reference, slice.z_measure, f, x);
  TransportPlan plan;
  DualPair duals;
  if (options.entropic) {
    auto sol = solve_entropic(eps_reference, slice.z_measure, s, options.entropic_options);
    if (!sol.converged) out.diagnostics.warnings.push_back("entropic solver did not converge");
    plan = std::move(sol.plan);
    duals = std::move(sol.duals);
  } else {
    auto sol = solve_exact(eps_reference, slice.z_measure, s);
    plan = std::move(sol.plan);
    duals = std::move(sol.duals);
  }
  const auto dr = check_duality(plan, duals, eps_reference, slice.z_measure, s);
  out.diagnostics.duality_gap = dr.gap;
  out.diagnostics.max_dual_infeasibility = dr.max_infeasibility;
  out.diagnostics.max_slackness = dr.max_slackness;
  out.diagnostics.plan_objective = plan.objective;

  out.v_values = duals.v_target;
  out.normalization_point = duals.normalization;
  const auto bary = barycentric_projection(plan, eps_reference.points());
  out.inverse_demand = bary.points;
  if (!bary.empty_columns.empty())
    out.diagnostics.warnings.push_back("some traded qualities received no taste mass");
  Vector sources_per_target = Vector::Zero(slice.z_measure.size());
  for (const auto& e : plan.entries) sources_per_target[e.target] += 1.0;
  out.diagnostics.split_columns = (sources_per_target.array() > 1.0).count();

  const auto conj = zeta_conjugate(GridFunction{slice.z_measure.points(), out.v_values}, f, x,
                                   eps_reference.points());
  out.diagnostics.boundary_argmax = conj.boundary_argmax;
  if (conj.boundary_argmax > 0)
    out.diagnostics.warnings.push_back(
        "some tastes attain their best quality on the edge of the traded support");

  const Index n = slice.z_measure.size();
  Matrix grad_v = Matrix::Constant(n, d, kNaN);
  for (Index j = 0; j < n; ++j)
    if (!std::isnan(out.inverse_demand(j, 0)))
      grad_v.row(j) =
          f.grad_z(x, out.inverse_demand.row(j), slice.z_measure.point(j)).transpose();
  out.plan = std::move(plan);
  fill_u_bar_grad(out, grad_v, default_neighbors(options, d));
  foc_consistency(slice.z_measure.points(), out.v_values, grad_v, out.diagnostics);
  return out;
}

IdentifiedPotential brenier_identify(const ConditionalSlice& slice,
                                     const DiscreteMeasure& eps_reference,
                                     const IdentifyOptions& options) {
  return general_identify(slice, eps_reference, SurplusFamily::bilinear(slice.z_measure.dim()),
                          options);
}

std::vector<ForwardMap> simultaneous_equations_identify(const MarketDataset& dataset,
                                                        const DiscreteMeasure& eps_reference,
                                                        const PartitionScheme& scheme) {
  require(eps_reference.dim() == dataset.dz(), "tastes and qualities must share dimension");
  const auto f = SurplusFamily::bilinear(dataset.dz());
  std::vector<ForwardMap> maps;
  for (const auto& slice : partition_by_x(dataset, scheme)) {
    const Matrix s = surplus_matrix(eps_reference, slice.z_measure, f, slice.x_value);
    auto sol = solve_exact(eps_reference, slice.z_measure, s);
    ForwardMap map;
    map.x_value = slice.x_value;
    map.reference_points = eps_reference.points();
    map.h = forward_projection(sol.plan, slice.z_measure.points()).points;
    map.plan = std::move(sol.plan);
    maps.push_back(std::move(map));
  }
  return maps;
}

AveragedEffects averaged_partial_effects(const ConditionalSlice& slice, Index k_neighbors) {
  const Index n = slice.z_measure.size();
  require(k_neighbors >= 1, "need at least one neighbour");
  require(n >= k_neighbors + 1, "too few distinct qualities for the neighbourhood size");
  const auto grads = local_gradients(slice.z_measure.points(), slice.prices, k_neighbors);
  AveragedEffects out;
  out.effect = Vector::Zero(slice.z_measure.dim());
  out.skipped = static_cast<Index>(grads.skipped.size());
  double mass = 0.0;
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(grads.gradients(j, 0))) continue;
    out.effect += slice.z_measure.weight(j) * grads.gradients.row(j).transpose();
    mass += slice.z_measure.weight(j);
  }
  require(mass > 0.0, "every neighbourhood is rank-deficient");
  out.effect /= mass;
  return out;
}

}  // namespace hedonic
