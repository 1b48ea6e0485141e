#include <algorithm>
#include <cmath>
#include <limits>

#include "hedonic/ot.hpp"

namespace hedonic {

namespace {

// log sum_k exp(a_k), stable for large magnitudes.
double log_sum_exp(const Vector& a) {
  const double top = a.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((a.array() - top).exp().sum());
}

struct LogDomainState {
  const Matrix& surplus;
  Vector log_mu, log_nu;
  Vector f, g;

  // Row update: sum_j pi_ij = mu_i exactly.
  void update_f(double eps) {
    Vector t(surplus.cols());
    for (Index i = 0; i < surplus.rows(); ++i) {
      for (Index j = 0; j < surplus.cols(); ++j)
        t[j] = (surplus(i, j) - g[j]) / eps + log_nu[j];
      f[i] = eps * log_sum_exp(t);
    }
  }

  void update_g(double eps) {
    Vector t(surplus.rows());
    for (Index j = 0; j < surplus.cols(); ++j) {
      for (Index i = 0; i < surplus.rows(); ++i)
        t[i] = (surplus(i, j) - f[i]) / eps + log_mu[i];
      g[j] = eps * log_sum_exp(t);
    }
  }

  double log_plan(Index i, Index j, double eps) const {
    return (surplus(i, j) - f[i] - g[j]) / eps + log_mu[i] + log_nu[j];
  }

  // L1 distance between the plan's row sums and mu.
  double row_error(double eps, const Vector& mu) const {
    double err = 0.0;
    for (Index i = 0; i < surplus.rows(); ++i) {
      double row = 0.0;
      for (Index j = 0; j < surplus.cols(); ++j) row += std::exp(log_plan(i, j, eps));
      err += std::abs(row - mu[i]);
    }
    return err;
  }
};

Vector safe_log(const Vector& w) {
  Vector out(w.size());
  for (Index k = 0; k < w.size(); ++k)
    out[k] = w[k] > 0.0 ? std::log(w[k]) : -std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace

EntropicSolution solve_entropic(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                const Matrix& surplus, const EntropicOptions& options) {
  require(options.epsilon > 0.0, "entropic epsilon must be positive");
  require(options.tol > 0.0, "entropic tolerance must be positive");
  require(options.max_iter >= 1, "entropic solver needs max_iter >= 1");
  require(surplus.rows() == mu.size() && surplus.cols() == nu.size(),
          "surplus matrix shape does not match the measures");

  LogDomainState state{surplus, safe_log(mu.weights()), safe_log(nu.weights()),
                       Vector::Zero(mu.size()), Vector::Zero(nu.size())};

  std::vector<double> schedule;
  for (double e = 1.0; e > options.epsilon; e *= 0.5) schedule.push_back(e);
  schedule.push_back(options.epsilon);

  EntropicSolution out;
  const double target = options.epsilon;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    if (stage > 0) {
      // Potentials already good enough at the target temperature.
      LogDomainState probe = state;
      probe.update_g(target);
      if (probe.row_error(target, mu.weights()) <= options.tol) {
        state.g = probe.g;
        out.converged = true;
        break;
      }
    }
    const bool last = stage + 1 == schedule.size();
    while (out.iterations < options.max_iter) {
      state.update_f(eps);
      state.update_g(eps);
      ++out.iterations;
      const double err = state.row_error(eps, mu.weights());
      if (err <= options.tol) {
        if (last) out.converged = true;
        break;
      }
    }
    if (out.iterations >= options.max_iter) break;
  }

  out.plan.n_source = mu.size();
  out.plan.n_target = nu.size();
  for (Index i = 0; i < mu.size(); ++i)
    for (Index j = 0; j < nu.size(); ++j) {
      const double mass = std::exp(state.log_plan(i, j, target));
      if (mass > 1e-12) {
        out.plan.entries.push_back({i, j, mass});
        out.plan.objective += mass * surplus(i, j);
      }
    }
  out.marginal_error = state.row_error(target, mu.weights());
  const Index ref = nu.lexicographic_min();
  const double shift = state.g[ref];
  out.duals.v_target = state.g.array() - shift;
  out.duals.w_source = state.f.array() + shift;
  out.duals.normalization = ref;
  return out;
}

}  // namespace hedonic
