#include "ivqravg/averaging.hpp"
#include "ivqravg/dgp.hpp"
#include "ivqravg/errors.hpp"

#include "generators.hpp"

#include <gtest/gtest.h>

namespace ivqr {
namespace {

using testing::Gen;

Matrix scalar(double v)
{
  return Matrix::Constant(1, 1, v);
}

TEST(EmpiricalWeight, Arithmetic)
{
  const Vector one = Vector::Ones(1);
  // trace term 2, quadratic term n (b1 - b2)^2 = 6
  auto w = empirical_weight(Vector::Constant(1, 1.0), Vector::Constant(1, 1.0 + std::sqrt(6.0 / 4.0)),
                            scalar(3.0), scalar(1.0), one, 4);
  EXPECT_NEAR(w.value, 0.25, 1e-15);
  EXPECT_FALSE(w.degenerate);

  w = empirical_weight(Vector::Constant(1, 0.5), Vector::Constant(1, 0.5), scalar(3.0), scalar(1.0), one, 10);
  EXPECT_DOUBLE_EQ(w.value, 1.0);

  w = empirical_weight(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0), scalar(2.0), scalar(2.0), one, 10);
  EXPECT_DOUBLE_EQ(w.value, 0.0);

  w = empirical_weight(Vector::Zero(1), Vector::Zero(1), scalar(2.0), scalar(2.0), one, 10);
  EXPECT_TRUE(w.degenerate);
  EXPECT_DOUBLE_EQ(w.value, 0.0);
}

TEST(EmpiricalWeight, ClampsAndKeepsRaw)
{
  const Vector one = Vector::Ones(1);
  const auto w = empirical_weight(Vector::Zero(1), Vector::Constant(1, 1.0), scalar(1.0), scalar(2.0), one, 3);
  EXPECT_DOUBLE_EQ(w.raw, -1.0 / 2.0);
  EXPECT_DOUBLE_EQ(w.value, 0.0);
}

TEST(EmpiricalWeight, Validation)
{
  EXPECT_THROW(empirical_weight(Vector::Zero(2), Vector::Zero(1), scalar(1.0), scalar(1.0), Vector::Ones(1), 5),
               InvalidArgument);
  EXPECT_THROW(empirical_weight(Vector::Zero(1), Vector::Zero(1), scalar(1.0), scalar(1.0), -Vector::Ones(1), 5),
               InvalidArgument);
}

TEST(EmpiricalWeight, Properties)
{
  testing::for_all(61, 200, [](Gen& gen, int) {
    const Index d = gen.integer(1, 4);
    const Vector b1 = gen.normal_vector(d);
    const Vector b2 = gen.normal_vector(d);
    const Matrix a1 = gen.normal_matrix(d, d);
    const Matrix a2 = gen.normal_matrix(d, d);
    const Matrix s1 = a1 * a1.transpose();
    const Matrix s2 = a2 * a2.transpose();
    Vector ups(d);
    for (Index j = 0; j < d; ++j) ups(j) = gen.uniform(0.1, 2.0);
    const Index n = gen.integer(1, 1000);
    const auto w = empirical_weight(b1, b2, s1, s2, ups, n);
    EXPECT_GE(w.value, 0.0);
    EXPECT_LE(w.value, 1.0);
    const double c = gen.uniform(0.01, 100.0);
    const auto ws = empirical_weight(b1, b2, s1, s2, (c * ups).eval(), n);
    EXPECT_NEAR(ws.raw, w.raw, 1e-10 * (1.0 + std::abs(w.raw)));
  });
}

class AveragingOnModel2 : public ::testing::Test
{
protected:
  static SimulatedData make()
  {
    Engine rng = keyed_engine({6201});
    Model2Params p;
    p.c0 = 0.2;
    return gen_model2(p, 600, QuantileLevel(0.5), rng);
  }
  SimulatedData sim_ = make();
};

TEST_F(AveragingOnModel2, OverridesGiveExactEndpoints)
{
  const QuantileLevel tau(0.5);
  const auto stage = fit_conservative(sim_.data, tau);
  AveragingOptions zero;
  zero.weight_override = 0.0;
  AveragingOptions one;
  one.weight_override = 1.0;
  for (auto kind : {AdditionalMoments::QR, AdditionalMoments::TwoSLSSlope}) {
    const auto r0 = averaging_estimate(sim_.data, tau, kind, stage, {}, zero);
    EXPECT_TRUE(r0.beta_avg == r0.beta_conservative);
    const auto r1 = averaging_estimate(sim_.data, tau, kind, stage, {}, one);
    EXPECT_TRUE(r1.beta_avg == r1.beta_aggressive);
  }
  AveragingOptions bad;
  bad.weight_override = 1.5;
  EXPECT_THROW(averaging_estimate(sim_.data, tau, AdditionalMoments::QR, stage, {}, bad), InvalidArgument);
}

TEST_F(AveragingOnModel2, ConvexCombinationAndVariances)
{
  const QuantileLevel tau(0.5);
  const auto stage = fit_conservative(sim_.data, tau);
  for (auto kind : {AdditionalMoments::QR, AdditionalMoments::TwoSLSSlope}) {
    const auto r = averaging_estimate(sim_.data, tau, kind, stage);
    EXPECT_GE(r.weight, 0.0);
    EXPECT_LE(r.weight, 1.0);
    const Vector expected = (1.0 - r.weight) * r.beta_conservative + r.weight * r.beta_aggressive;
    EXPECT_LT((r.beta_avg - expected).cwiseAbs().maxCoeff(), 1e-14);
    for (Index j = 0; j < r.beta_avg.size(); ++j) {
      const double lo = std::min(r.beta_conservative(j), r.beta_aggressive(j));
      const double hi = std::max(r.beta_conservative(j), r.beta_aggressive(j));
      EXPECT_GE(r.beta_avg(j), lo - 1e-14);
      EXPECT_LE(r.beta_avg(j), hi + 1e-14);
    }
    for (const Matrix* s : {&r.sigma1, &r.sigma2}) {
      EXPECT_TRUE(*s == s->transpose());
      const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(*s).eigenvalues();
      EXPECT_GE(ev.minCoeff(), -1e-10 * s->trace());
    }
    EXPECT_GT(r.jacobian_bandwidth.h, 0.0);
    EXPECT_EQ(r.upsilon.size(), sim_.data.d_x());
  }
}

TEST_F(AveragingOnModel2, WrappersAgree)
{
  const QuantileLevel tau(0.5);
  const auto stage = fit_conservative(sim_.data, tau);
  const auto a = averaging_estimate(sim_.data, tau, AdditionalMoments::QR, stage);
  const auto b = averaging_estimate(sim_.data, tau, AdditionalMoments::QR);
  EXPECT_TRUE(a.beta_avg == b.beta_avg);
  EXPECT_EQ(a.weight, b.weight);
}

TEST(Averaging, JacobianFallback)
{
  // Phi^-1(tau) = 1 makes the plug-in denominator vanish.
  const double tau = 0.5 * std::erfc(-1.0 / std::sqrt(2.0));
  Gen gen(63);
  const Dataset data = gen.iv_dataset(300, 1, 2);
  const auto stage = fit_conservative(data, QuantileLevel(tau));
  EXPECT_TRUE(stage.jacobian_fallback);
  EXPECT_DOUBLE_EQ(stage.jacobian_bandwidth.h, stage.estimation_bandwidth);
}

TEST(Averaging, UpsilonLength)
{
  Gen gen(64);
  const Dataset data = gen.iv_dataset(200, 1, 2);
  AveragingOptions opts;
  opts.upsilon = Vector::Ones(5);
  EXPECT_THROW(averaging_estimate(data, QuantileLevel(0.5), AdditionalMoments::QR, {}, opts), InvalidArgument);
}

} // namespace
} // namespace ivqr
