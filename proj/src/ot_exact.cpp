#include <algorithm>
#include <cmath>
#include <limits>

#include "hedonic/ot.hpp"

namespace hedonic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_uniform_square(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.size() != nu.size()) return false;
  const double n = static_cast<double>(mu.size());
  const auto close = [n](const Vector& w) {
    return ((w.array() * n - 1.0).abs() <= 1e-12).all();
  };
  return close(mu.weights()) && close(nu.weights());
}

// Successive shortest paths on the complete bipartite graph with costs
// -surplus. Forward arcs are uncapacitated; reverse arcs carry flow.
// Potentials keep reduced costs nonnegative, so each round is a dense
// Dijkstra. On exit w_i + v_j >= S_ij with equality on positive flow.
void transport_ssp(const Vector& supply0, const Vector& demand0,
                   const Matrix& surplus, Matrix& flow, Vector& w, Vector& v) {
  const Index n = supply0.size();
  const Index m = demand0.size();
  Vector supply = supply0;
  Vector demand = demand0;
  flow = Matrix::Zero(n, m);
  // Node potentials for cost c = -S: rc(i, j) = c_ij + p_src[i] - p_dst[j].
  Vector p_src = Vector::Zero(n);
  Vector p_dst(m);
  for (Index j = 0; j < m; ++j) p_dst[j] = (-surplus.col(j)).minCoeff();

  std::vector<double> dist(n + m);
  std::vector<Index> prev(n + m);
  std::vector<char> done(n + m);
  const Index max_rounds = 16 * (n + m) * (n + m) + 64;
  for (Index round = 0; round < max_rounds; ++round) {
    bool any_supply = false, any_demand = false;
    for (Index i = 0; i < n; ++i) any_supply |= supply[i] > 0.0;
    for (Index j = 0; j < m; ++j) any_demand |= demand[j] > 0.0;
    if (!any_supply || !any_demand) break;

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(prev.begin(), prev.end(), Index{-1});
    std::fill(done.begin(), done.end(), 0);
    for (Index i = 0; i < n; ++i)
      if (supply[i] > 0.0) dist[i] = 0.0;

    Index target = -1;
    while (true) {
      Index u = -1;
      double best = kInf;
      for (Index v = 0; v < n + m; ++v)
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      if (u < 0) break;
      done[u] = 1;
      if (u >= n && demand[u - n] > 0.0) {
        target = u;
        break;
      }
      if (u < n) {
        for (Index j = 0; j < m; ++j) {
          if (done[n + j]) continue;
          const double rc = std::max(0.0, -surplus(u, j) + p_src[u] - p_dst[j]);
          if (dist[u] + rc < dist[n + j]) {
            dist[n + j] = dist[u] + rc;
            prev[n + j] = u;
          }
        }
      } else {
        const Index j = u - n;
        for (Index i = 0; i < n; ++i) {
          if (done[i] || flow(i, j) <= 0.0) continue;
          const double rc = std::max(0.0, surplus(i, j) - p_src[i] + p_dst[j]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            prev[i] = u;
          }
        }
      }
    }
    if (target < 0) break;

    const double reach = dist[target];
    for (Index i = 0; i < n; ++i) p_src[i] += std::min(dist[i], reach);
    for (Index j = 0; j < m; ++j) p_dst[j] += std::min(dist[n + j], reach);

    // Bottleneck along the path back to a source with supply.
    double delta = demand[target - n];
    Index node = target;
    while (prev[node] >= 0) {
      const Index from = prev[node];
      if (from >= n) delta = std::min(delta, flow(node, from - n));  // reverse arc
      node = from;
    }
    delta = std::min(delta, supply[node]);
    const Index origin = node;

    node = target;
    while (prev[node] >= 0) {
      const Index from = prev[node];
      if (from < n) {
        flow(from, node - n) += delta;
      } else {
        const Index j = from - n;
        flow(node, j) = flow(node, j) == delta ? 0.0 : flow(node, j) - delta;
      }
      node = from;
    }
    supply[origin] = supply[origin] == delta ? 0.0 : supply[origin] - delta;
    demand[target - n] = demand[target - n] == delta ? 0.0 : demand[target - n] - delta;
  }

  // c_ij + p_src[i] - p_dst[j] >= 0  <=>  p_src[i] - p_dst[j] >= S_ij.
  w = p_src;
  v = -p_dst;
}

TransportPlan plan_from_dense(const Matrix& flow, const Matrix& surplus) {
  TransportPlan plan;
  plan.n_source = flow.rows();
  plan.n_target = flow.cols();
  for (Index i = 0; i < flow.rows(); ++i)
    for (Index j = 0; j < flow.cols(); ++j)
      if (flow(i, j) > 0.0) {
        plan.entries.push_back({i, j, flow(i, j)});
        plan.objective += flow(i, j) * surplus(i, j);
      }
  return plan;
}

// Replaces (w, v) by the extreme optimal dual pinned at target `ref`:
// node potentials equal to shortest-path distances from `ref` in the residual
// graph of the optimal plan. This is the pointwise smallest v among optimal
// duals with v[ref] = 0, independent of the algorithm that produced the plan,
// and it shifts exactly with separable changes to the surplus.
void canonicalize_duals(const Matrix& surplus, const TransportPlan& plan,
                        const Vector& mu_weights, Vector& w, Vector& v, Index ref) {
  const Index n = surplus.rows();
  const Index m = surplus.cols();
  Matrix flow = Matrix::Zero(n, m);
  for (const auto& e : plan.entries) flow(e.source, e.target) += e.mass;

  // Reduced lengths under the incoming potentials are nonnegative up to
  // rounding: forward i -> j: w_i + v_j - S_ij, reverse j -> i: its negation.
  const Index nodes = n + m;
  std::vector<double> dist(nodes, kInf);
  std::vector<char> done(nodes, 0);
  dist[n + ref] = 0.0;
  while (true) {
    Index u = -1;
    double best = kInf;
    for (Index k = 0; k < nodes; ++k)
      if (!done[k] && dist[k] < best) {
        best = dist[k];
        u = k;
      }
    if (u < 0) break;
    done[u] = 1;
    if (u < n) {
      for (Index j = 0; j < m; ++j) {
        const double rc = std::max(0.0, w[u] + v[j] - surplus(u, j));
        dist[n + j] = std::min(dist[n + j], dist[u] + rc);
      }
    } else {
      const Index j = u - n;
      for (Index i = 0; i < n; ++i) {
        if (flow(i, j) <= 0.0) continue;
        const double rc = std::max(0.0, surplus(i, j) - w[i] - v[j]);
        dist[i] = std::min(dist[i], dist[u] + rc);
      }
    }
  }
  // Undo the reduction: potential(src i) = w_i, potential(dst j) = -v_j.
  const double base = -v[ref];
  Vector w_new(n), v_new(m);
  for (Index j = 0; j < m; ++j) v_new[j] = -(dist[n + j] - base - v[j]);
  v_new[ref] = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(dist[i]) && mu_weights[i] > 0.0) {
      w_new[i] = dist[i] - base + w[i];
    } else {
      w_new[i] = (surplus.row(i).transpose() - v_new).maxCoeff();
    }
  }
  w = std::move(w_new);
  v = std::move(v_new);
}

}  // namespace

Vector TransportPlan::row_sums() const {
  Vector r = Vector::Zero(n_source);
  for (const auto& e : entries) r[e.source] += e.mass;
  return r;
}

Vector TransportPlan::column_sums() const {
  Vector c = Vector::Zero(n_target);
  for (const auto& e : entries) c[e.target] += e.mass;
  return c;
}

Matrix TransportPlan::dense() const {
  Matrix d = Matrix::Zero(n_source, n_target);
  for (const auto& e : entries) d(e.source, e.target) += e.mass;
  return d;
}

double DualPair::objective(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const {
  return mu.weights().dot(w_source) + nu.weights().dot(v_target);
}

Matrix surplus_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      const SurplusFamily& f, const Vector& x) {
  require(mu.dim() == f.deps() && nu.dim() == f.dz(),
          "measure dimensions do not match the surplus family");
  Matrix s(mu.size(), nu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    const Vector eps = mu.point(i);
    for (Index j = 0; j < nu.size(); ++j) {
      s(i, j) = f.eval(x, eps, nu.point(j));
      require(std::isfinite(s(i, j)), "surplus is not finite everywhere");
    }
  }
  return s;
}

std::vector<Index> solve_assignment(const Matrix& surplus, Vector* w, Vector* v) {
  const Index n = surplus.rows();
  require(n >= 1 && surplus.cols() == n, "assignment needs a square matrix");
  // Shortest augmenting paths on cost -surplus, 1-based with a dummy column 0.
  std::vector<double> u(n + 1, 0.0), pv(n + 1, 0.0), minv(n + 1);
  std::vector<Index> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Index i0 = match[j0];
      double delta = kInf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -surplus(i0 - 1, j - 1) - u[i0] - pv[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          pv[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(n);
  for (Index j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  // u_i + pv_j <= -S_ij, so w = -u, v = -pv satisfy w + v >= S.
  if (w) {
    w->resize(n);
    for (Index i = 0; i < n; ++i) (*w)[i] = -u[i + 1];
  }
  if (v) {
    v->resize(n);
    for (Index j = 0; j < n; ++j) (*v)[j] = -pv[j + 1];
  }
  return assignment;
}

TransportSolution solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const Matrix& surplus) {
  require(surplus.rows() == mu.size() && surplus.cols() == nu.size(),
          "surplus matrix shape does not match the measures");
  require(surplus.allFinite(), "surplus matrix must be finite");
  TransportSolution out;
  Vector w, v;
  if (is_uniform_square(mu, nu)) {
    const auto assignment = solve_assignment(surplus, &w, &v);
    const Index n = mu.size();
    const double mass = 1.0 / static_cast<double>(n);
    out.plan.n_source = n;
    out.plan.n_target = n;
    for (Index i = 0; i < n; ++i) {
      out.plan.entries.push_back({i, assignment[i], mass});
      out.plan.objective += mass * surplus(i, assignment[i]);
    }
  } else {
    Matrix flow;
    transport_ssp(mu.weights(), nu.weights(), surplus, flow, w, v);
    out.plan = plan_from_dense(flow, surplus);
  }
  const Index ref = nu.lexicographic_min();
  canonicalize_duals(surplus, out.plan, mu.weights(), w, v, ref);
  out.duals.w_source = std::move(w);
  out.duals.v_target = std::move(v);
  out.duals.normalization = ref;
  return out;
}

}  // namespace hedonic
