#include <sstream>

#include <gtest/gtest.h>

#include "hedonic/config.hpp"
#include "hedonic/io.hpp"

namespace hedonic {
namespace {

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

TEST(Csv, DatasetRoundTripIsExact) {
  MarketDataset d{Matrix(3, 1), Matrix(3, 2), Vector(3)};
  d.x << 0, 1, 1;
  d.z << 0.1, 1.0 / 3.0, -2.5e-17, 4, 1e300, -7;
  d.p << 1.0 / 7.0, 2, 3;
  std::ostringstream out;
  write_dataset(out, d);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "x_1,z_1,z_2,p");
  const auto back = read_dataset(parse(out.str()));
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.z, d.z);
  EXPECT_EQ(back.p, d.p);
}

TEST(Csv, DatasetWithoutXColumns) {
  const auto d = read_dataset(parse("z_1,p\n0.5,1\n0.25,2\n"));
  EXPECT_EQ(d.dx(), 0);
  EXPECT_EQ(d.rows(), 2);
}

TEST(Csv, MeasureRoundTrip) {
  Matrix pts(2, 2);
  pts << 0, 1, 2, 3;
  Vector w(2);
  w << 0.25, 0.75;
  const auto m = DiscreteMeasure::from_samples(pts, w);
  std::ostringstream out;
  write_measure(out, m);
  EXPECT_EQ(out.str(), "w,c_1,c_2\n0.25,0,1\n0.75,2,3\n");
  const auto back = read_measure(parse(out.str()));
  EXPECT_EQ(back.points(), m.points());
  EXPECT_EQ(back.weights(), m.weights());
}

TEST(Csv, PlanRoundTripSortsEntries) {
  const auto plan = read_plan(parse("i,j,mass\n1,0,0.5\n0,1,0.5\n"));
  ASSERT_EQ(plan.entries.size(), 2u);
  EXPECT_EQ(plan.entries[0].source, 0);
  EXPECT_EQ(plan.n_source, 2);
  std::ostringstream out;
  write_plan(out, plan);
  EXPECT_EQ(out.str(), "i,j,mass\n0,1,0.5\n1,0,0.5\n");
  EXPECT_THROW(read_plan(parse("i,j,mass\n0.5,0,1\n")), IoError);
  EXPECT_THROW(read_plan(parse("i,j,mass\n3,0,1\n"), 2, 2), IoError);
}

TEST(Csv, GridFunctionAndVector) {
  const auto g = read_grid_function(parse("c_1,value\n0,1\n1,2\n"));
  EXPECT_EQ(g.size(), 2);
  std::ostringstream out;
  write_vector(out, g.values);
  EXPECT_EQ(out.str(), "idx,value\n0,1\n1,2\n");
}

TEST(Csv, RejectsMalformedInput) {
  EXPECT_THROW(parse(""), IoError);
  EXPECT_THROW(parse("z_1,p\n1\n"), IoError);
  EXPECT_THROW(parse("z_1,p\n1,abc\n"), IoError);
  EXPECT_THROW(read_dataset(parse("a,p\n1,2\n")), IoError);
  EXPECT_THROW(read_dataset(parse("z_1,q\n1,2\n")), IoError);
  EXPECT_THROW(read_csv_file("/nonexistent/file.csv"), IoError);
}

TEST(Csv, NanSurvivesRoundTrip) {
  const auto t = parse("c_1,value\nnan,1\n");
  EXPECT_TRUE(std::isnan(t.rows(0, 0)));
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Config, StructuralSpecFillsDefaults) {
  Json j = Json::parse(R"({"dz": 2, "cost": {"kind": "quadratic"}})");
  const auto s = parse_structural_spec(j);
  EXPECT_EQ(j["dx"], 0);
  EXPECT_EQ(j["dy"], 2);
  EXPECT_EQ(j["zeta"]["kind"], "bilinear");
  EXPECT_EQ(j["u_bar"]["kind"], "zero");
  EXPECT_EQ(j["cost"]["sign"], 1.0);
  Vector y(2), z(2);
  y << 0, 0;
  z << 1, 2;
  EXPECT_DOUBLE_EQ(s.cost.eval(y, z), 2.5);
}

TEST(Config, ScaledQuadraticCost) {
  Json j = Json::parse(
      R"({"kind": "quadratic", "q": [[1]], "center": [0], "center_slope": [[0]], "divide_by": 0})");
  const auto c = parse_scalar_function(j, 1, 1);
  Vector y(1), z(1);
  y << 2;
  z << 3;
  EXPECT_DOUBLE_EQ(c.eval(y, z), 9.0 / 4.0);
  EXPECT_DOUBLE_EQ(c.grad_z(y, z)[0], 1.5);
}

TEST(Config, PolynomialSurplusAndDistributions) {
  Json z = Json::parse(R"({"kind": "polynomial", "terms": [{"coefficient": 2, "powers": [1, 1]}]})");
  const auto f = parse_surplus(z, 0, 1);
  Vector x(0), e(1), q(1);
  e << 3;
  q << 4;
  EXPECT_DOUBLE_EQ(f.eval(x, e, q), 24);
  Json d = Json::parse(R"({"kind": "product", "marginals": [{"name": "normal"}]})");
  EXPECT_EQ(parse_distribution(d).dim(), 1);
  EXPECT_EQ(d["marginals"][0]["b"], 1.0);
}

TEST(Config, RejectsBadInput) {
  Json a = Json::parse(R"({"kind": "mystery"})");
  EXPECT_THROW(parse_distribution(a), ConfigError);
  Json b = Json::parse(R"({"kind": "uniform_box", "lo": [1], "hi": [0]})");
  EXPECT_THROW(parse_distribution(b), InvalidInput);
  Json c = Json::parse(R"({"cost": {"kind": "zero"}})");
  EXPECT_THROW(parse_structural_spec(c), ConfigError);
  Json s = Json::parse(R"({"kind": "simplex"})");
  EXPECT_THROW(parse_solver(s), ConfigError);
  Json t = Json::parse(R"({"kind": "polynomial", "terms": [{"coefficient": 1, "powers": [1]}]})");
  EXPECT_THROW(parse_surplus(t, 0, 1), ConfigError);
}

}  // namespace
}  // namespace hedonic
