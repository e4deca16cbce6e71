#include "ivqravg/bootstrap.hpp"
#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <cmath>

namespace ivqr {
namespace {

using testing::Gen;

TEST(SimplexGrid, Counts)
{
  const auto g1 = simplex_weight_grid(1);
  ASSERT_EQ(g1.size(), 3u);
  EXPECT_EQ(g1[0].w3, 1.0);
  EXPECT_EQ(g1[1].w2, 1.0);
  EXPECT_EQ(g1[2].w1, 1.0);
  const auto g2 = simplex_weight_grid(2);
  ASSERT_EQ(g2.size(), 6u);
  EXPECT_TRUE(std::any_of(g2.begin(), g2.end(), [](const WeightTriple& w) {
    return w.w1 == 0.5 && w.w2 == 0.5 && w.w3 == 0.0;
  }));
  EXPECT_EQ(simplex_weight_grid(164).size(), 13695u);
  EXPECT_THROW(simplex_weight_grid(0), InvalidArgument);
}

TEST(SimplexGrid, PointsSumToOne)
{
  for (const auto& w : simplex_weight_grid(37)) {
    EXPECT_GE(w.w1, 0.0);
    EXPECT_GE(w.w2, 0.0);
    EXPECT_GE(w.w3, 0.0);
    EXPECT_NEAR(w.w1 + w.w2 + w.w3, 1.0, 1e-15);
  }
}

ComponentEstimates scalar_components(double a, double t, double q)
{
  return {Vector::Constant(1, a), Vector::Constant(1, t), Vector::Constant(1, q)};
}

TEST(GridRmse, HandCase)
{
  const std::vector<ComponentEstimates> draws{scalar_components(1.0, 3.0, -1.0), scalar_components(-1.0, 1.0, 1.0)};
  const auto grid = simplex_weight_grid(1);
  const Vector rmse = grid_rmse(draws, Vector::Zero(1), grid);
  EXPECT_DOUBLE_EQ(rmse(0), 1.0);              // (0, 0, 1)
  EXPECT_DOUBLE_EQ(rmse(1), std::sqrt(5.0));   // (0, 1, 0)
  EXPECT_DOUBLE_EQ(rmse(2), 1.0);              // (1, 0, 0)
  EXPECT_EQ(select_weight(grid, rmse), 2u);
}

TEST(GridRmse, InvariantToGridOrder)
{
  testing::for_all(71, 20, [](Gen& gen, int) {
    std::vector<ComponentEstimates> draws;
    for (int b = 0; b < gen.integer(1, 8); ++b) {
      draws.push_back({gen.normal_vector(3), gen.normal_vector(3), gen.normal_vector(3)});
    }
    const Vector center = gen.normal_vector(3);
    auto grid = simplex_weight_grid(gen.integer(1, 12));
    const Vector rmse = grid_rmse(draws, center, grid);
    std::vector<std::size_t> perm(grid.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), gen.engine());
    std::vector<WeightTriple> shuffled;
    for (auto p : perm) shuffled.push_back(grid[p]);
    const Vector rmse2 = grid_rmse(draws, center, shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      EXPECT_NEAR(rmse2(static_cast<Index>(i)), rmse(static_cast<Index>(perm[i])), 1e-12);
    }
    const auto& a = grid[select_weight(grid, rmse)];
    const auto& b = shuffled[select_weight(shuffled, rmse2)];
    EXPECT_EQ(a.w1, b.w1);
    EXPECT_EQ(a.w2, b.w2);
  });
}

TEST(SelectWeight, TieBreak)
{
  const auto grid = simplex_weight_grid(2);
  const Vector flat = Vector::Constant(static_cast<Index>(grid.size()), 0.7);
  const auto& w = grid[select_weight(grid, flat)];
  EXPECT_EQ(w.w1, 1.0);
  // Among equal w1, the larger w3 wins.
  Vector rmse = Vector::Constant(static_cast<Index>(grid.size()), 2.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].w1 == 0.5) rmse(static_cast<Index>(i)) = 1.0;
  }
  EXPECT_EQ(grid[select_weight(grid, rmse)].w3, 0.5);
}

TEST(BootstrapIndices, DeterministicAndInRange)
{
  const auto a = bootstrap_indices(50, 9, 3, 0);
  EXPECT_EQ(a, bootstrap_indices(50, 9, 3, 0));
  EXPECT_NE(a, bootstrap_indices(50, 9, 3, 1));
  EXPECT_NE(a, bootstrap_indices(50, 9, 4, 0));
  for (Index i : a) {
    EXPECT_GE(i, 0);
    EXPECT_LT(i, 50);
  }
}

TEST(BootstrapAverage, SinglePointGrid)
{
  Gen gen(72);
  const Dataset data = gen.iv_dataset(150, 1, 2);
  const std::vector<WeightTriple> grid{WeightTriple{1.0, 0.0, 0.0}};
  for (int draws : {1, 5}) {
    const auto r = bootstrap_average(data, QuantileLevel(0.5), draws, grid, 3);
    EXPECT_TRUE(r.beta_bs == r.original.ivqr);
  }
}

TEST(BootstrapAverage, NoiselessExogenousTies)
{
  const Vector x = Vector::LinSpaced(30, -1.0, 2.0);
  const Vector y = (2.0 + 3.0 * x.array()).matrix();
  const Dataset data(y, Matrix::Ones(30, 1), x, x);
  const auto grid = simplex_weight_grid(4);
  const auto r = bootstrap_average(data, QuantileLevel(0.5), 6, grid, 5);
  EXPECT_LT(r.grid_rmse.maxCoeff() - r.grid_rmse.minCoeff(), 1e-9);
  EXPECT_EQ(r.optimal_weight.w1, 1.0);
}

TEST(BootstrapAverage, ConvexHullAndDeterminism)
{
  Gen gen(73);
  const Dataset data = gen.iv_dataset(200, 2, 3, 0.6);
  const auto grid = simplex_weight_grid(10);
  BootstrapOptions serial;
  BootstrapOptions parallel;
  parallel.workers = 3;
  const auto a = bootstrap_average(data, QuantileLevel(0.4), 8, grid, 17, {}, serial);
  const auto b = bootstrap_average(data, QuantileLevel(0.4), 8, grid, 17, {}, parallel);
  EXPECT_TRUE(a.beta_bs == b.beta_bs);
  EXPECT_TRUE(a.grid_rmse == b.grid_rmse);
  EXPECT_EQ(a.optimal_index, b.optimal_index);
  for (Index j = 0; j < a.beta_bs.size(); ++j) {
    const double lo = std::min({a.original.ivqr(j), a.original.tsls(j), a.original.qr(j)});
    const double hi = std::max({a.original.ivqr(j), a.original.tsls(j), a.original.qr(j)});
    EXPECT_GE(a.beta_bs(j), lo - 1e-12);
    EXPECT_LE(a.beta_bs(j), hi + 1e-12);
  }
  EXPECT_EQ(a.draws_used, 8);
}

// Two observations, intercept only, tau = 0.25: every component estimate is
// available in closed form (QR gives the smaller value, 2SLS the mean, IVQR
// the smaller value up to the bandwidth floor), so each grid RMSE can be
// enumerated by hand.
TEST(BootstrapAverage, TwoObservationEnumeration)
{
  const Vector y = (Vector(2) << 1.0, 3.0).finished();
  const Dataset data(y, Matrix::Ones(2, 1), Matrix(), Matrix());
  const auto grid = simplex_weight_grid(1);
  const std::uint64_t seed = 2024;
  const auto r = bootstrap_average(data, QuantileLevel(0.25), 2, grid, seed);
  ASSERT_EQ(r.draws_used, 2);
  EXPECT_NEAR(r.original.ivqr(0), 1.0, 1e-6);

  std::vector<std::array<double, 3>> comps;
  for (std::uint64_t b = 0; b < 2; ++b) {
    const auto rows = bootstrap_indices(2, seed, b, 0);
    const double a = y(rows[0]);
    const double c = y(rows[1]);
    comps.push_back({testing::two_point_ivqr(a, c, 0.25, SmoothingRule{}.floor), 0.5 * (a + c), std::min(a, c)});
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (const auto& c : comps) {
      const double v = grid[g].w1 * c[0] + grid[g].w2 * c[1] + grid[g].w3 * c[2] - 1.0;
      total += v * v;
    }
    EXPECT_NEAR(r.grid_rmse(static_cast<Index>(g)), std::sqrt(total / 2.0), 1e-6) << "grid point " << g;
  }
}

TEST(BootstrapAverage, Validation)
{
  Gen gen(74);
  const Dataset data = gen.iv_dataset(50, 1, 1);
  EXPECT_THROW(bootstrap_average(data, QuantileLevel(0.5), 0, simplex_weight_grid(2), 1), InvalidArgument);
  EXPECT_THROW(bootstrap_average(data, QuantileLevel(0.5), 2, {}, 1), InvalidArgument);
}

} // namespace
} // namespace ivqr
