#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hedonic/identify.hpp"
#include "oracles.hpp"

namespace hedonic {
namespace {

ConditionalSlice make_slice(const Matrix& z, const Vector& p) {
  MarketDataset d{Matrix::Zero(z.rows(), 0), z, p};
  return partition_by_x(d, PartitionScheme::exact()).at(0);
}

ConditionalSlice make_slice(const Matrix& z) {
  return make_slice(z, Vector::Zero(z.rows()));
}

Matrix midpoints(Index n, double lo, double hi) {
  Matrix m(n, 1);
  for (Index k = 0; k < n; ++k)
    m(k, 0) = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  return m;
}

DiscreteMeasure unit_lattice(Index per_axis, Index d) {
  return lattice_reference(DistributionSpec::uniform_box(Vector::Zero(d), Vector::Ones(d)),
                           per_axis);
}

const auto kBilinear1 = SurplusFamily::bilinear(1);

TEST(ScalarIdentify, UniformQualitiesAndTastesGiveIdentity) {
  const Index n = 40;
  const Matrix z = midpoints(n, 0, 1);
  const auto pot = scalar_identify(make_slice(z), unit_lattice(n, 1), kBilinear1);
  const double z0 = z(0, 0);
  for (Index j = 0; j < n; ++j) {
    EXPECT_DOUBLE_EQ(pot.inverse_demand(j, 0), z(j, 0));
    // Trapezoid is exact for the linear integrand zeta_z = eps = z.
    EXPECT_NEAR(pot.v_values[j], 0.5 * z(j, 0) * z(j, 0) - 0.5 * z0 * z0, 1e-14);
  }
  EXPECT_EQ(pot.v_values[pot.normalization_point], 0.0);
}

TEST(ScalarIdentify, StretchedQualitiesHalveTastes) {
  const Index n = 25;
  const Matrix z = midpoints(n, 0, 2);
  const auto pot = scalar_identify(make_slice(z), unit_lattice(n, 1), kBilinear1);
  for (Index j = 0; j < n; ++j) EXPECT_NEAR(pot.inverse_demand(j, 0), z(j, 0) / 2.0, 1e-15);
}

TEST(ScalarIdentify, SingleQualityGetsTheMedianTaste) {
  const auto ref = unit_lattice(11, 1);
  const auto pot = scalar_identify(make_slice(Matrix::Constant(1, 1, 0.3)), ref, kBilinear1);
  EXPECT_DOUBLE_EQ(pot.inverse_demand(0, 0), 0.5);
  EXPECT_EQ(pot.v_values[0], 0.0);
  EXPECT_TRUE(std::isnan(pot.u_bar_grad(0, 0)));
}

TEST(ScalarIdentify, NegativeCrossDerivativeIsAntitone) {
  const Index n = 10;
  const Matrix z = midpoints(n, 0, 1);
  const auto f = SurplusFamily::polynomial(0, 1, Polynomial(2, {{-1.0, {1, 1}}}));
  const auto pot = scalar_identify(make_slice(z), unit_lattice(n, 1), f);
  for (Index j = 0; j < n; ++j) EXPECT_DOUBLE_EQ(pot.inverse_demand(j, 0), z(n - 1 - j, 0));
}

TEST(ScalarIdentify, RejectsWrongDimensionAndSignChanges) {
  Matrix z2(3, 2);
  z2 << 0, 1, 1, 0, 2, 2;
  EXPECT_THROW(scalar_identify(make_slice(z2), unit_lattice(3, 1), kBilinear1), InvalidInput);
  // zeta = z eps^2 has cross derivative 2 eps, which changes sign on [-1, 1].
  const auto f = SurplusFamily::polynomial(0, 1, Polynomial(2, {{1.0, {2, 1}}}));
  const auto ref = DiscreteMeasure::from_samples(midpoints(8, -1, 1));
  EXPECT_THROW(scalar_identify(make_slice(midpoints(5, 0, 1)), ref, f), TwistViolation);
}

TEST(ScalarIdentify, LinearPricesGiveExactUtilityGradient) {
  const Index n = 30;
  const Matrix z = midpoints(n, 0, 1);
  const Vector p = 3.0 * z.col(0);
  const auto pot = scalar_identify(make_slice(z, p), unit_lattice(n, 1), kBilinear1);
  for (Index j = 0; j < n; ++j) EXPECT_NEAR(pot.u_bar_grad(j, 0), 3.0 - z(j, 0), 1e-12);
}

TEST(BrenierIdentify, ScaledLatticeInvertsExactly) {
  const auto ref = unit_lattice(8, 2);
  const Matrix z = 2.0 * ref.points();
  const auto pot = brenier_identify(make_slice(z), ref);
  EXPECT_LE((pot.inverse_demand - z / 2.0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(pot.v_values[pot.normalization_point], 0.0);
  EXPECT_LE(pot.diagnostics.duality_gap, 1e-9);
}

TEST(BrenierIdentify, OneDimensionMatchesQuantileTransform) {
  std::mt19937_64 rng(14);
  const Matrix z = testing::random_matrix(50, 1, rng, -2, 3);
  const auto ref = sample_reference(DistributionSpec::gaussian(1), 50, 4);
  const auto bren = brenier_identify(make_slice(z), ref);
  const auto scal = scalar_identify(make_slice(z), ref, kBilinear1);
  EXPECT_LE((bren.inverse_demand - scal.inverse_demand).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BrenierIdentify, SinglePointTakesAllTastes) {
  const auto ref = unit_lattice(5, 2);
  Matrix z(1, 2);
  z << 0.4, 0.9;
  const auto pot = brenier_identify(make_slice(z), ref);
  EXPECT_EQ(pot.v_values[0], 0.0);
  EXPECT_NEAR(pot.inverse_demand(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(pot.inverse_demand(0, 1), 0.5, 1e-15);
}

TEST(BrenierIdentify, MatchedPairsAreMonotone) {
  std::mt19937_64 rng(99);
  const Matrix z = testing::random_matrix(60, 2, rng);
  const auto ref = sample_reference(DistributionSpec::gaussian(2), 60, 3);
  const auto pot = brenier_identify(make_slice(z), ref);
  EXPECT_EQ(check_pairwise_monotonicity(pot.plan, ref.points(), pot.z_points).violations, 0);
}

TEST(GeneralIdentify, BilinearIsTheBrenierPath) {
  std::mt19937_64 rng(5);
  const Matrix z = testing::random_matrix(40, 2, rng);
  const Vector p = testing::random_matrix(40, 1, rng).col(0);
  const auto ref = sample_reference(DistributionSpec::gaussian(2), 40, 9);
  const auto a = brenier_identify(make_slice(z, p), ref);
  const auto b = general_identify(make_slice(z, p), ref, SurplusFamily::bilinear(2));
  EXPECT_EQ(a.v_values, b.v_values);
  EXPECT_TRUE(a.inverse_demand.cwiseEqual(b.inverse_demand).all());
  EXPECT_TRUE((a.u_bar_grad.array() == b.u_bar_grad.array() ||
               (a.u_bar_grad.array().isNaN() && b.u_bar_grad.array().isNaN()))
                  .all());
}

TEST(GeneralIdentify, NegQuadraticShiftsPotentialBySeparableTerm) {
  std::mt19937_64 rng(21);
  const Matrix z = testing::random_matrix(35, 2, rng);
  const auto ref = sample_reference(DistributionSpec::gaussian(2), 35, 2);
  const auto bl = general_identify(make_slice(z), ref, SurplusFamily::bilinear(2));
  const auto nq =
      general_identify(make_slice(z), ref, SurplusFamily::neg_quadratic(Matrix::Identity(2, 2)));
  EXPECT_TRUE(bl.inverse_demand.cwiseEqual(nq.inverse_demand).all());
  const Vector half_sq = 0.5 * bl.z_points.rowwise().squaredNorm();
  const Vector shift = nq.v_values - bl.v_values + half_sq;
  EXPECT_LE(shift.maxCoeff() - shift.minCoeff(), 1e-9);
}

TEST(GeneralIdentify, OneDimensionalSupermodularIsComonotone) {
  std::mt19937_64 rng(61);
  // zeta = z eps + z^2 eps / 10, cross derivative 1 + z / 5 > 0 for z > 0.
  const auto f = SurplusFamily::polynomial(0, 1, Polynomial(2, {{1.0, {1, 1}}, {0.1, {1, 2}}}));
  const Matrix z = testing::random_matrix(45, 1, rng, 0.1, 2.0);
  const auto ref = DiscreteMeasure::from_samples(testing::random_matrix(45, 1, rng, 0.1, 1.0));
  const auto gen = general_identify(make_slice(z), ref, f);
  const auto scal = scalar_identify(make_slice(z), ref, f);
  ASSERT_EQ(gen.plan.entries.size(), scal.plan.entries.size());
  for (std::size_t k = 0; k < gen.plan.entries.size(); ++k) {
    EXPECT_EQ(gen.plan.entries[k].source, scal.plan.entries[k].source);
    EXPECT_EQ(gen.plan.entries[k].target, scal.plan.entries[k].target);
  }
}

TEST(GeneralIdentify, RefusesUntwistedSurplusWithWitness) {
  const auto f = SurplusFamily::polynomial(0, 1, Polynomial(2, {{1.0, {2, 1}}}));
  const auto ref = DiscreteMeasure::from_samples(midpoints(6, -1, 1));
  try {
    general_identify(make_slice(midpoints(4, 0.5, 1)), ref, f);
    FAIL() << "expected a twist violation";
  } catch (const TwistViolation& e) {
    ASSERT_TRUE(e.report().witness.has_value());
    EXPECT_DOUBLE_EQ(e.report().witness->first[0], -e.report().witness->second[0]);
  }
}

TEST(GeneralIdentify, UtilityGradientIgnoresPriceLevel) {
  std::mt19937_64 rng(8);
  const Matrix z = testing::random_matrix(50, 2, rng);
  const Vector p = z.rowwise().squaredNorm();
  const auto ref = sample_reference(DistributionSpec::gaussian(2), 50, 1);
  const auto f = SurplusFamily::neg_quadratic(Matrix::Identity(2, 2));
  const auto a = general_identify(make_slice(z, p), ref, f);
  const auto b = general_identify(make_slice(z, p.array() + 7.5), ref, f);
  EXPECT_LE((a.u_bar_grad - b.u_bar_grad).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(a.v_values, b.v_values);
}

TEST(GeneralIdentify, FocResidualsAreSmallOnSmoothMaps) {
  const auto ref = unit_lattice(12, 2);
  Matrix a(2, 2);
  a << 1.5, 0.3, 0.3, 1.0;
  const Matrix z = ref.points() * a;
  const auto pot = brenier_identify(make_slice(z), ref);
  EXPECT_GT(pot.diagnostics.foc_edges, 0);
  // V = 1/2 z' A^{-1} z is quadratic, so edge trapezoids are exact up to the
  // discrete dual's slack between neighbouring atoms.
  EXPECT_LE(pot.diagnostics.foc_max_residual, 5e-3);
}

TEST(GeneralIdentify, RoundTripErrorShrinksAsReferenceGrows) {
  Matrix a(2, 2);
  a << 1.2, 0.4, 0.4, 0.8;
  const auto spec = DistributionSpec::uniform_box(Vector::Zero(2), Vector::Ones(2));
  std::vector<double> errors;
  for (Index n : {50, 100, 200, 400}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto truth = sample_reference(spec, n, 1000 + seed);
      const Matrix z = truth.points() * a;
      const auto ref = sample_reference(spec, n, seed);
      const auto pot = brenier_identify(make_slice(z), ref);
      total += std::sqrt((pot.inverse_demand - truth.points()).rowwise().squaredNorm().mean());
    }
    errors.push_back(total / 3.0);
  }
  for (std::size_t k = 1; k < errors.size(); ++k) EXPECT_LT(errors[k], errors[k - 1]);
}

TEST(SimultaneousEquations, IdentityShiftAndLinearMaps) {
  const auto ref = unit_lattice(7, 2);
  MarketDataset same{Matrix::Zero(49, 0), ref.points(), Vector::Zero(49)};
  const auto id = simultaneous_equations_identify(same, ref);
  ASSERT_EQ(id.size(), 1u);
  EXPECT_LE((id[0].h - ref.points()).cwiseAbs().maxCoeff(), 1e-15);

  Vector c(2);
  c << 0.3, -1.7;
  MarketDataset shifted = same;
  shifted.z = ref.points().rowwise() + c.transpose();
  const auto sh = simultaneous_equations_identify(shifted, ref);
  EXPECT_LE((sh[0].h - shifted.z).cwiseAbs().maxCoeff(), 1e-15);

  Matrix a(2, 2);
  a << 2.0, 0.5, 0.5, 1.0;
  MarketDataset linear = same;
  linear.z = ref.points() * a;  // rows are (A eps)'
  const auto lin = simultaneous_equations_identify(linear, ref);
  // Assignment oracle on the 7x7 lattice: the identity matching is optimal.
  EXPECT_LE((lin[0].h - linear.z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AveragedPartialEffects, Examples) {
  std::mt19937_64 rng(3);
  const Matrix z = testing::random_matrix(40, 2, rng);
  EXPECT_LE(averaged_partial_effects(make_slice(z, Vector::Constant(40, 2.0)), 6)
                .effect.cwiseAbs()
                .maxCoeff(),
            1e-12);
  Vector a(2);
  a << 1.5, -0.25;
  const auto lin = averaged_partial_effects(make_slice(z, z * a), 3);
  EXPECT_LE((lin.effect - a).cwiseAbs().maxCoeff(), 1e-12);

  Matrix sym(2 * 40, 2);
  sym << z, -z;
  const auto quad = averaged_partial_effects(make_slice(sym, sym.rowwise().squaredNorm()), 6);
  EXPECT_LE(quad.effect.cwiseAbs().maxCoeff(), 1e-10);

  EXPECT_THROW(averaged_partial_effects(make_slice(z.topRows(3)), 6), InvalidInput);
}

TEST(LocalGradients, FlagsRankDeficientNeighbourhoods) {
  Matrix collinear(5, 2);
  collinear << 0, 0, 1, 1, 2, 2, 3, 3, 4, 4;
  const auto g = local_gradients(collinear, Vector::LinSpaced(5, 0, 4), 3);
  EXPECT_EQ(g.skipped.size(), 5u);
  EXPECT_TRUE(std::isnan(g.gradients(0, 0)));
}

}  // namespace
}  // namespace hedonic
