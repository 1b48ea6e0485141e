#include "hedonic/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "hedonic/parallel.hpp"

namespace hedonic {

namespace {

std::vector<char> boundary_flags(const Matrix& grid) {
  const Vector lo = grid.colwise().minCoeff().transpose();
  const Vector hi = grid.colwise().maxCoeff().transpose();
  std::vector<char> flags(grid.rows(), 0);
  for (Index g = 0; g < grid.rows(); ++g)
    for (Index c = 0; c < grid.cols(); ++c)
      if (grid(g, c) == lo[c] || grid(g, c) == hi[c]) flags[g] = 1;
  return flags;
}

Vector row(const Matrix& m, Index r) { return m.row(r).transpose(); }

}  // namespace

void QualityGrid::validate() const {
  require(lo.size() >= 1 && lo.size() == hi.size(), "quality grid bounds must match");
  require((lo.array() < hi.array()).all(), "quality grid needs lo < hi");
  require(per_axis >= 1, "quality grid needs at least one point per axis");
}

Matrix QualityGrid::points() const {
  validate();
  const Index d = dim();
  Index total = 1;
  for (Index c = 0; c < d; ++c) total *= per_axis;
  Matrix pts(total, d);
  for (Index r = 0; r < total; ++r) {
    Index rest = r;
    for (Index c = d - 1; c >= 0; --c) {
      const Index k = rest % per_axis;
      rest /= per_axis;
      pts(r, c) = per_axis == 1 ? lo[c]
                                : lo[c] + (hi[c] - lo[c]) * static_cast<double>(k) /
                                              static_cast<double>(per_axis - 1);
    }
  }
  return pts;
}

JointSurplus joint_surplus(const StructuralSpec& spec, const Vector& x, const Vector& eps,
                           const Vector& y, const Matrix& z_grid) {
  require(z_grid.rows() >= 1, "quality grid is empty");
  JointSurplus out;
  out.value = -std::numeric_limits<double>::infinity();
  for (Index g = 0; g < z_grid.rows(); ++g) {
    const Vector z = row(z_grid, g);
    const double s = spec.utility(x, eps, z) - spec.cost.eval(y, z);
    require(std::isfinite(s), "joint surplus is not finite");
    if (s > out.value) {
      out.value = s;
      out.argmax = g;
    }
  }
  out.z = row(z_grid, out.argmax);
  out.interior = !boundary_flags(z_grid)[out.argmax];
  return out;
}

EquilibriumOutcome equilibrium_from_types(const StructuralSpec& spec, Matrix consumer_x,
                                          Matrix consumer_eps, Matrix producer_y,
                                          const Matrix& z_grid, int threads) {
  const Index n = consumer_eps.rows();
  const Index m = producer_y.rows();
  const Index grid_size = z_grid.rows();
  require(n >= 1 && m >= 1, "need at least one consumer and one producer");
  require(consumer_x.rows() == n, "consumer observables and tastes differ in count");
  require(grid_size >= 1 && z_grid.cols() == spec.dz(), "quality grid has the wrong dimension");

  // Consumer and producer values on the grid, one column per agent;
  // S(i, j) = max_g a(g, i) - b(g, j).
  Matrix a(grid_size, n), b(grid_size, m);
  parallel_for(n, threads, [&](Index i) {
    const Vector x = row(consumer_x, i), eps = row(consumer_eps, i);
    for (Index g = 0; g < grid_size; ++g) a(g, i) = spec.utility(x, eps, row(z_grid, g));
  });
  parallel_for(m, threads, [&](Index j) {
    const Vector y = row(producer_y, j);
    for (Index g = 0; g < grid_size; ++g) b(g, j) = spec.cost.eval(y, row(z_grid, g));
  });
  require(a.allFinite() && b.allFinite(), "joint surplus is not finite");

  EquilibriumOutcome out;
  out.z_grid = z_grid;
  out.surplus.resize(n, m);
  out.pair_argmax.assign(static_cast<std::size_t>(n * m), 0);
  const auto edge = boundary_flags(z_grid);
  std::vector<Index> edge_hits(n, 0);
  parallel_for(n, threads, [&](Index i) {
    const double* ai = a.col(i).data();
    for (Index j = 0; j < m; ++j) {
      const double* bj = b.col(j).data();
      double best = -std::numeric_limits<double>::infinity();
      Index arg = 0;
      for (Index g = 0; g < grid_size; ++g) {
        const double s = ai[g] - bj[g];
        if (s > best) {
          best = s;
          arg = g;
        }
      }
      out.surplus(i, j) = best;
      out.pair_argmax[static_cast<std::size_t>(i * m + j)] = arg;
      edge_hits[i] += edge[arg];
    }
  });
  for (Index h : edge_hits) out.boundary_pairs += h;
  out.boundary_fraction =
      static_cast<double>(out.boundary_pairs) / static_cast<double>(n * m);

  const auto consumers = DiscreteMeasure::from_samples(consumer_eps);
  const auto producers = DiscreteMeasure::from_samples(producer_y);
  auto sol = solve_exact(consumers, producers, out.surplus);
  // Re-pin: producer 0 earns zero indirect profit.
  const double shift = sol.duals.v_target[0];
  out.indirect_w = sol.duals.v_target.array() - shift;
  out.indirect_v = sol.duals.w_source.array() + shift;
  out.matching = std::move(sol.plan);
  out.consumer_weights = consumers.weights();
  out.producer_weights = producers.weights();

  const Index k = static_cast<Index>(out.matching.entries.size());
  out.traded_z.resize(k, spec.dz());
  out.prices.resize(k);
  out.dataset.x.resize(k, consumer_x.cols());
  for (Index e = 0; e < k; ++e) {
    const auto& entry = out.matching.entries[static_cast<std::size_t>(e)];
    const Index g = out.pair_argmax[static_cast<std::size_t>(entry.source * m + entry.target)];
    const Vector z = row(z_grid, g);
    out.traded_z.row(e) = z.transpose();
    out.prices[e] = spec.cost.eval(row(producer_y, entry.target), z) + out.indirect_w[entry.target];
    out.dataset.x.row(e) = consumer_x.row(entry.source);
  }
  out.dataset.z = out.traded_z;
  out.dataset.p = out.prices;
  out.consumer_x = std::move(consumer_x);
  out.consumer_eps = std::move(consumer_eps);
  out.producer_y = std::move(producer_y);
  return out;
}

EquilibriumOutcome simulate_market(const MarketConfig& config) {
  require(config.n_consumers >= 1 && config.n_producers >= 1,
          "need at least one consumer and one producer");
  require(config.consumer_eps.dim() == config.spec.dz(),
          "taste distribution must have dimension d_z");
  const Matrix grid = config.grid.points();
  require(grid.cols() == config.spec.dz(), "quality grid must have dimension d_z");

  const auto eps = sample_reference(config.consumer_eps, config.n_consumers,
                                    derive_seed(config.seed, 1));
  const auto y = sample_reference(config.producer_y, config.n_producers,
                                  derive_seed(config.seed, 2));
  Matrix x = config.consumer_x
                 ? sample_reference(*config.consumer_x, config.n_consumers,
                                    derive_seed(config.seed, 3))
                       .points()
                 : Matrix(config.n_consumers, 0);

  auto outcome = equilibrium_from_types(config.spec, std::move(x), eps.points(), y.points(),
                                        grid, config.threads);
  if (outcome.boundary_fraction > config.boundary_threshold) {
    throw GridBoundaryAbort(
        "fraction " + std::to_string(outcome.boundary_fraction) +
            " of consumer-producer pairs maximize on the quality grid boundary; "
            "enlarge the quality grid",
        outcome.boundary_fraction);
  }
  return outcome;
}

EquilibriumReport verify_equilibrium(const EquilibriumOutcome& o, const StructuralSpec& spec,
                                     double tol) {
  EquilibriumReport r;
  r.tol = tol;
  const Index n = o.surplus.rows();
  const Index m = o.surplus.cols();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j)
      r.max_instability =
          std::max(r.max_instability, o.surplus(i, j) - o.indirect_v[i] - o.indirect_w[j]);

  const auto& entries = o.matching.entries;
  const Index k = static_cast<Index>(entries.size());
  // Realized payoffs from each agent's own trades.
  Vector consumer_best = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  Vector producer_best = Vector::Constant(m, -std::numeric_limits<double>::infinity());
  for (Index e = 0; e < k; ++e) {
    const auto& t = entries[static_cast<std::size_t>(e)];
    const Vector z = row(o.traded_z, e);
    const double u = spec.utility(row(o.consumer_x, t.source), row(o.consumer_eps, t.source), z);
    const double c = spec.cost.eval(row(o.producer_y, t.target), z);
    r.max_matched_slack = std::max(
        r.max_matched_slack,
        std::abs(o.indirect_v[t.source] + o.indirect_w[t.target] - o.surplus(t.source, t.target)));
    r.max_price_gap_consumer =
        std::max(r.max_price_gap_consumer, std::abs(u - o.indirect_v[t.source] - o.prices[e]));
    r.max_price_gap_producer =
        std::max(r.max_price_gap_producer, std::abs(c + o.indirect_w[t.target] - o.prices[e]));
    consumer_best[t.source] = std::max(consumer_best[t.source], u - o.prices[e]);
    producer_best[t.target] = std::max(producer_best[t.target], o.prices[e] - c);
  }

  r.max_clearing_error =
      std::max((o.matching.row_sums() - o.consumer_weights).cwiseAbs().maxCoeff(),
               (o.matching.column_sums() - o.producer_weights).cwiseAbs().maxCoeff());

  // Deviations to any traded quality at its posted price.
  for (Index i = 0; i < n; ++i) {
    const Vector x = row(o.consumer_x, i), eps = row(o.consumer_eps, i);
    for (Index e = 0; e < k; ++e) {
      const double gain = spec.utility(x, eps, row(o.traded_z, e)) - o.prices[e] - consumer_best[i];
      if (gain > r.max_consumer_gain) {
        r.max_consumer_gain = gain;
        if (gain > tol && !r.blocking_consumer) r.blocking_consumer = i;
      }
    }
  }
  for (Index j = 0; j < m; ++j) {
    const Vector y = row(o.producer_y, j);
    for (Index e = 0; e < k; ++e) {
      const double gain = o.prices[e] - spec.cost.eval(y, row(o.traded_z, e)) - producer_best[j];
      if (gain > r.max_producer_gain) {
        r.max_producer_gain = gain;
        if (gain > tol && !r.blocking_producer) r.blocking_producer = j;
      }
    }
  }

  r.stable = r.max_instability <= tol && r.max_matched_slack <= tol;
  r.prices_consistent = r.max_price_gap_consumer <= tol && r.max_price_gap_producer <= tol;
  r.market_clears = r.max_clearing_error <= 1e-9;
  r.no_profitable_deviation = r.max_consumer_gain <= tol && r.max_producer_gain <= tol;
  r.passed = r.stable && r.prices_consistent && r.market_clears && r.no_profitable_deviation;
  return r;
}

AtomlessnessReport atomlessness_diagnostic(const EquilibriumOutcome& o) {
  AtomlessnessReport r;
  const Index k = o.traded_z.rows();
  r.matched_pairs = k;
  if (o.z_grid.rows() > 1) {
    // Smallest positive coordinate spacing of the grid.
    double step = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < o.z_grid.cols(); ++c) {
      const double span = o.z_grid.col(c).maxCoeff() - o.z_grid.col(c).minCoeff();
      if (span <= 0.0) continue;
      for (Index g = 1; g < o.z_grid.rows(); ++g) {
        const double d = std::abs(o.z_grid(g, c) - o.z_grid(0, c));
        if (d > 0.0) step = std::min(step, d);
      }
    }
    r.grid_step = std::isfinite(step) ? step : 0.0;
  }
  if (k < 2) return r;
  r.applicable = true;
  std::map<std::vector<double>, std::vector<Index>> groups;
  for (Index e = 0; e < k; ++e) {
    std::vector<double> key(static_cast<std::size_t>(o.traded_z.cols()));
    for (Index c = 0; c < o.traded_z.cols(); ++c) key[static_cast<std::size_t>(c)] = o.traded_z(e, c);
    groups[key].push_back(e);
  }
  r.distinct_qualities = static_cast<Index>(groups.size());
  for (const auto& [key, members] : groups) {
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const Index ia = o.matching.entries[static_cast<std::size_t>(members[a])].source;
        const Index ib = o.matching.entries[static_cast<std::size_t>(members[b])].source;
        if (o.consumer_eps.row(ia) == o.consumer_eps.row(ib))
          ++r.input_driven_pairs;
        else
          ++r.coincident_pairs;
      }
  }
  return r;
}

}  // namespace hedonic
