#include "ivqravg/errors.hpp"
#include "ivqravg/metrics.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace ivqr {
namespace {

using testing::Gen;

TEST(EmpiricalQuantile, Cases)
{
  const std::vector<double> five{5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(empirical_quantile(five, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(empirical_quantile(five, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile(five, 1.0), 5.0);
  const std::vector<double> four{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(empirical_quantile(four, 0.25), 1.75);
  const std::vector<double> one{7};
  EXPECT_DOUBLE_EQ(empirical_quantile(one, 0.3), 7.0);
  EXPECT_THROW(empirical_quantile(std::vector<double>{}, 0.5), InvalidArgument);
  EXPECT_THROW(empirical_quantile(four, 1.5), InvalidArgument);
}

TEST(EmpiricalQuantile, MatchesOracle)
{
  testing::for_all(91, 50, [](Gen& gen, int) {
    std::vector<double> v(static_cast<std::size_t>(gen.integer(1, 40)));
    for (auto& x : v) x = gen.normal();
    const double p = gen.uniform();
    EXPECT_NEAR(empirical_quantile(v, p), testing::quantile_type7(v, p), 1e-14);
  });
}

TEST(Rrmse, HandCases)
{
  const Matrix est = Vector::LinSpaced(5, 1.0, 5.0);
  EXPECT_NEAR(rrmse(est, Vector::Constant(1, 3.0)), 2.0 / 1.349, 1e-14);
  EXPECT_NEAR(2.0 / 1.349, 1.48258, 1e-5);
  const Matrix exact = Matrix::Constant(4, 2, 1.5);
  EXPECT_DOUBLE_EQ(rrmse(exact, Vector::Constant(2, 1.5)), 0.0);
}

TEST(Rrmse, MatchesOracleAndProperties)
{
  testing::for_all(92, 40, [](Gen& gen, int) {
    const Index m = gen.integer(4, 60);
    const Index d = gen.integer(1, 4);
    const Matrix est = gen.normal_matrix(m, d);
    const Vector truth = gen.normal_vector(d, 0.3);
    const double base = rrmse(est, truth);
    EXPECT_NEAR(base, testing::rrmse_oracle(est, truth), 1e-12);

    std::vector<Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), gen.engine());
    Matrix shuffled(m, d);
    for (Index i = 0; i < m; ++i) shuffled.row(i) = est.row(perm[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(rrmse(shuffled, truth), base, 1e-12);

    const double c = gen.uniform(-3.0, 3.0);
    EXPECT_NEAR(rrmse((c * est).eval(), (c * truth).eval()), std::abs(c) * base, 1e-12 * (1.0 + base));
  });
}

TEST(Rrmse, RobustToUpperOutlier)
{
  // M = 9: quartiles sit exactly on order statistics 3 and 7, so moving the
  // maximum further up touches no interpolation window.
  Matrix est(9, 1);
  est << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const double base = rrmse(est, Vector::Zero(1));
  est(8, 0) = 1e6;
  EXPECT_DOUBLE_EQ(rrmse(est, Vector::Zero(1)), base);
}

TEST(Rrmse, NormalSamples)
{
  Gen gen(93);
  const double b = 0.3;
  const double s = 0.7;
  Matrix est(100000, 1);
  for (Index i = 0; i < est.rows(); ++i) est(i, 0) = gen.normal(b, s);
  EXPECT_NEAR(rrmse(est, Vector::Zero(1)), std::sqrt(b * b + s * s), 0.02 * std::sqrt(b * b + s * s));
}

TEST(RelativeTable, BaselineAndSwap)
{
  Gen gen(94);
  const Vector truth = Vector::Zero(2);
  EstimatorEstimates est{{"IVQR", gen.normal_matrix(20, 2)},
                         {"A", gen.normal_matrix(20, 2, 0.5)},
                         {"B", gen.normal_matrix(20, 2, 2.0)}};
  double base_abs = 0.0;
  const auto row = relative_rrmse_row(est, truth, {"IVQR", "A", "B"}, "IVQR", &base_abs);
  EXPECT_DOUBLE_EQ(row[0], 1.0);
  EXPECT_NEAR(base_abs, rrmse(est["IVQR"], truth), 1e-15);
  EXPECT_NEAR(row[1], rrmse(est["A"], truth) / base_abs, 1e-14);

  std::swap(est["A"], est["B"]);
  const auto swapped = relative_rrmse_row(est, truth, {"IVQR", "A", "B"}, "IVQR");
  EXPECT_DOUBLE_EQ(swapped[1], row[2]);
  EXPECT_DOUBLE_EQ(swapped[2], row[1]);

  const auto table = relative_rrmse_table({"1"}, {est}, {truth}, {"IVQR", "A", "B"}, "IVQR");
  EXPECT_DOUBLE_EQ(table.cell(0, "B"), swapped[2]);
  EXPECT_THROW(table.cell(0, "C"), InvalidArgument);
}

TEST(RelativeTable, Errors)
{
  const EstimatorEstimates zero{{"IVQR", Matrix::Zero(5, 1)}, {"A", Matrix::Ones(5, 1)}};
  EXPECT_THROW(relative_rrmse_row(zero, Vector::Zero(1), {"IVQR", "A"}, "IVQR"), ZeroDenominator);
  const EstimatorEstimates uneven{{"IVQR", Matrix::Ones(5, 1)}, {"A", Matrix::Ones(4, 1)}};
  EXPECT_THROW(relative_rrmse_row(uneven, Vector::Zero(1), {"IVQR", "A"}, "IVQR"), InvalidArgument);
}

} // namespace
} // namespace ivqr
