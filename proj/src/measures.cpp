#include "hedonic/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace hedonic {

namespace {

bool lex_less(const Matrix& m, Index a, Index b) {
  for (Index c = 0; c < m.cols(); ++c) {
    if (m(a, c) < m(b, c)) return true;
    if (m(b, c) < m(a, c)) return false;
  }
  return false;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::from_samples(Matrix points,
                                              std::optional<Vector> weights) {
  require(points.rows() >= 1, "measure needs at least one point");
  require(points.allFinite(), "measure points must be finite");
  const Index n = points.rows();
  Vector w;
  if (!weights) {
    w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  } else {
    require(weights->size() == n, "weight count does not match point count");
    require(weights->allFinite(), "weights must be finite");
    require((weights->array() >= 0.0).all(), "weights must be nonnegative");
    const double total = weights->sum();
    require(total > 0.0, "weights have zero total mass");
    w = *weights / total;
  }
  return DiscreteMeasure(std::move(points), std::move(w));
}

Index DiscreteMeasure::lexicographic_min() const {
  Index best = 0;
  for (Index i = 1; i < size(); ++i)
    if (lex_less(points_, i, best)) best = i;
  return best;
}

void MarketDataset::validate() const {
  require(z.rows() >= 1, "dataset is empty");
  require(z.cols() >= 1, "dataset needs at least one quality attribute");
  require(x.rows() == z.rows() && p.size() == z.rows(),
          "dataset columns have different row counts");
  require(p.allFinite(), "prices must be finite");
  require(z.allFinite() && x.allFinite(), "dataset entries must be finite");
}

std::vector<ConditionalSlice> partition_by_x(const MarketDataset& dataset,
                                             const PartitionScheme& scheme) {
  dataset.validate();
  const Index n = dataset.rows();
  const Index dx = dataset.dx();

  // Cell key per row plus its representative x.
  std::vector<std::vector<double>> keys(n);
  std::map<std::vector<double>, Vector> representative;
  if (scheme.kind == PartitionScheme::Kind::kExactMatch) {
    for (Index r = 0; r < n; ++r) {
      keys[r].resize(dx);
      for (Index c = 0; c < dx; ++c) keys[r][c] = dataset.x(r, c);
      representative.emplace(keys[r], dataset.x.row(r).transpose());
    }
  } else {
    require(scheme.widths.size() == dx,
            "bin widths must match the number of x columns");
    require((scheme.widths.array() > 0.0).all(), "bin widths must be positive");
    const Vector lo = dx > 0 ? Vector(dataset.x.colwise().minCoeff().transpose())
                             : Vector(0);
    const Vector hi = dx > 0 ? Vector(dataset.x.colwise().maxCoeff().transpose())
                             : Vector(0);
    for (Index r = 0; r < n; ++r) {
      keys[r].resize(dx);
      Vector mid(dx);
      for (Index c = 0; c < dx; ++c) {
        const double w = scheme.widths[c];
        double cell = std::floor((dataset.x(r, c) - lo[c]) / w);
        // The top edge belongs to the last cell.
        const double last = std::max(0.0, std::ceil((hi[c] - lo[c]) / w) - 1.0);
        cell = std::min(cell, last);
        keys[r][c] = cell;
        mid[c] = lo[c] + (cell + 0.5) * w;
      }
      representative.emplace(keys[r], mid);
    }
  }

  std::map<std::vector<double>, std::vector<Index>> members;
  for (Index r = 0; r < n; ++r) members[keys[r]].push_back(r);

  std::vector<ConditionalSlice> slices;
  slices.reserve(members.size());
  const Index dz = dataset.dz();
  for (const auto& [key, rows] : members) {
    // Merge duplicate qualities, keeping first-appearance order.
    std::map<std::vector<double>, Index> atom_index;
    std::vector<Index> atom_row;
    std::vector<double> mass;
    std::vector<Index> atom_of_row;
    for (Index r : rows) {
      std::vector<double> zk(dz);
      for (Index c = 0; c < dz; ++c) zk[c] = dataset.z(r, c);
      auto [it, inserted] =
          atom_index.emplace(std::move(zk), static_cast<Index>(atom_row.size()));
      if (inserted) {
        atom_row.push_back(r);
        mass.push_back(0.0);
      } else {
        const double p0 = dataset.p[atom_row[it->second]];
        require(std::abs(p0 - dataset.p[r]) <= 1e-9,
                "one quality carries two different prices within a cell");
      }
      mass[it->second] += 1.0;
      atom_of_row.push_back(it->second);
    }
    const Index m = static_cast<Index>(atom_row.size());
    Matrix pts(m, dz);
    Vector prices(m);
    Vector w(m);
    for (Index a = 0; a < m; ++a) {
      pts.row(a) = dataset.z.row(atom_row[a]);
      prices[a] = dataset.p[atom_row[a]];
      w[a] = mass[a];
    }
    ConditionalSlice slice;
    slice.x_value = representative.at(key);
    slice.z_measure = DiscreteMeasure::from_samples(std::move(pts), w);
    slice.prices = std::move(prices);
    slice.row_ids = rows;
    slice.atom_of_row = std::move(atom_of_row);
    slices.push_back(std::move(slice));
  }
  return slices;
}

double empirical_cdf(const Vector& values, const Vector& weights, double v) {
  require(values.size() == weights.size(), "values and weights differ in size");
  double total = 0.0;
  for (Index i = 0; i < values.size(); ++i)
    if (values[i] <= v) total += weights[i];
  return std::clamp(total, 0.0, 1.0);
}

double empirical_cdf_quantile(const Vector& values, const Vector& weights,
                              double q) {
  require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
  require(values.size() >= 1 && values.size() == weights.size(),
          "quantile needs matching non-empty values and weights");
  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] < values[b]; });
  const double total = weights.sum();
  double cumulative = 0.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double v = values[order[k]];
    double group = 0.0;
    for (; k < order.size() && values[order[k]] == v; ++k)
      group += weights[order[k]];
    if (group <= 0.0) continue;
    cumulative += group / total;
    // Tolerate rounding in the running sum, e.g. q = k/n.
    if (cumulative >= q - 1e-12) return v;
  }
  return values[order.back()];
}

}  // namespace hedonic
