#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

namespace ivqr {
namespace {

using testing::Gen;

Matrix with_intercept(const Matrix& x)
{
  Matrix out(x.rows(), x.cols() + 1);
  out << Matrix::Ones(x.rows(), 1), x;
  return out;
}

TEST(QuantileRegression, InterceptOnly)
{
  const Matrix x = Matrix::Ones(3, 1);
  const Vector y = Vector::LinSpaced(3, 1.0, 3.0);
  EXPECT_NEAR(qr_fit(x, y, QuantileLevel(0.5)).beta(0), 2.0, 1e-12);
  EXPECT_NEAR(qr_fit(x, y, QuantileLevel(0.25)).beta(0), 1.0, 1e-12);
}

TEST(QuantileRegression, NoiselessLine)
{
  const Vector xs = Vector::LinSpaced(20, -2.0, 3.0);
  const Matrix x = with_intercept(xs);
  const Vector y = (2.0 + 3.0 * xs.array()).matrix();
  for (double tau : {0.1, 0.5, 0.9}) {
    const Vector b = qr_fit(x, y, QuantileLevel(tau)).beta;
    EXPECT_NEAR(b(0), 2.0, 1e-10);
    EXPECT_NEAR(b(1), 3.0, 1e-10);
  }
}

TEST(QuantileRegression, RankDeficient)
{
  Matrix x(5, 2);
  x.col(0).setOnes();
  x.col(1).setConstant(2.0);
  EXPECT_THROW(qr_fit(x, Vector::Ones(5), QuantileLevel(0.5)), RankDeficiency);
  EXPECT_THROW(qr_fit(x, Vector::Ones(4), QuantileLevel(0.5)), InvalidArgument);
}

TEST(QuantileRegression, MatchesBruteForce)
{
  testing::for_all(31, 30, [](Gen& gen, int) {
    const Index n = gen.integer(4, 11);
    const Index d = gen.integer(1, 3);
    Matrix x = with_intercept(gen.normal_matrix(n, d - 1));
    Vector y = gen.normal_vector(n, 2.0);
    if (gen.coin(0.3)) {
      for (Index i = 0; i < n; ++i) y(i) = std::round(y(i)); // ties
    }
    const double tau = gen.uniform(0.05, 0.95);
    const double oracle = testing::brute_force_qr_loss(x, y, tau);
    const LinearFit fit = qr_fit(x, y, QuantileLevel(tau));
    EXPECT_NEAR(check_loss(fit.residuals, tau), oracle, 1e-9 * (1.0 + oracle));
    EXPECT_TRUE(fit.converged);
  });
}

TEST(QuantileRegression, LocallyOptimal)
{
  testing::for_all(32, 10, [](Gen& gen, int) {
    const Index n = gen.integer(50, 400);
    const Matrix x = with_intercept(gen.normal_matrix(n, 3));
    Vector y = x * Vector::LinSpaced(4, 1.0, 2.0) + gen.normal_vector(n);
    const double tau = gen.uniform(0.1, 0.9);
    const LinearFit fit = qr_fit(x, y, QuantileLevel(tau));
    const double base = check_loss(fit.residuals, tau);
    for (Index j = 0; j < 4; ++j) {
      for (double delta : {-1e-4, 1e-4}) {
        Vector b = fit.beta;
        b(j) += delta;
        EXPECT_LE(base, check_loss(y - x * b, tau) + 1e-12 * base);
      }
    }
  });
}

TEST(QuantileRegression, Equivariance)
{
  testing::for_all(33, 10, [](Gen& gen, int) {
    const Index n = gen.integer(30, 120);
    const Matrix x = with_intercept(gen.normal_matrix(n, 2));
    const Vector y = x * Vector::Ones(3) + gen.normal_vector(n);
    const QuantileLevel tau(gen.uniform(0.2, 0.8));
    const double c = gen.uniform(0.5, 3.0);
    const double shift = gen.normal(0.0, 5.0);
    const Vector base = qr_fit(x, y, tau).beta;
    const Vector scaled = qr_fit(x, (c * y).eval(), tau).beta;
    const Vector shifted = qr_fit(x, (y.array() + shift).matrix(), tau).beta;
    EXPECT_LT((scaled - c * base).cwiseAbs().maxCoeff(), 1e-8 * c * (1.0 + base.cwiseAbs().maxCoeff()));
    EXPECT_NEAR(shifted(0), base(0) + shift, 1e-8 * (1.0 + std::abs(shift)));
    EXPECT_LT((shifted.tail(2) - base.tail(2)).cwiseAbs().maxCoeff(), 1e-8);
  });
}

TEST(QuantileRegression, DuplicatedRows)
{
  Gen gen(34);
  const Matrix x0 = with_intercept(gen.normal_matrix(30, 2));
  const Vector y0 = x0 * Vector::Ones(3) + gen.normal_vector(30);
  Matrix x(90, 3);
  Vector y(90);
  for (Index i = 0; i < 90; ++i) {
    const Index src = gen.integer(0, 29);
    x.row(i) = x0.row(src);
    y(i) = y0(src);
  }
  const LinearFit fit = qr_fit(x, y, QuantileLevel(0.5));
  EXPECT_TRUE(fit.converged);
  const double loss = check_loss(fit.residuals, 0.5);
  for (Index j = 0; j < 3; ++j) {
    Vector b = fit.beta;
    b(j) += 1e-5;
    EXPECT_LE(loss, check_loss(y - x * b, 0.5) + 1e-12);
  }
}

TEST(Tsls, ExactLinearData)
{
  const Vector v = Vector::LinSpaced(3, 0.0, 2.0);
  const Dataset data(v, Matrix::Ones(3, 1), v, v);
  const LinearFit fit = tsls_fit(data);
  EXPECT_NEAR(fit.beta(0), 0.0, 1e-12);
  EXPECT_NEAR(fit.beta(1), 1.0, 1e-12);
}

TEST(Tsls, ExogenousIsOls)
{
  Gen gen(35);
  const Matrix x = gen.normal_matrix(50, 2);
  const Vector y = gen.normal_vector(50);
  const Dataset data(y, Matrix::Ones(50, 1), x, x);
  const Vector ols = data.regressors().colPivHouseholderQr().solve(y);
  EXPECT_LT((tsls_fit(data).beta - ols).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tsls, MatchesNormalEquations)
{
  testing::for_all(36, 20, [](Gen& gen, int) {
    const Dataset data = gen.iv_dataset(10, 1, 2);
    const Vector oracle = testing::tsls_normal_equations(data.regressors(), data.instruments(), data.y());
    EXPECT_LT((tsls_fit(data).beta - oracle).cwiseAbs().maxCoeff(), 1e-10);
  });
}

TEST(Tsls, ResidualsOrthogonalToProjection)
{
  testing::for_all(37, 10, [](Gen& gen, int) {
    const Dataset data = gen.iv_dataset(gen.integer(20, 200), 2, 4);
    const LinearFit fit = tsls_fit(data);
    const Matrix xhat = project_onto_instruments(data);
    const double scale = data.y().cwiseAbs().maxCoeff() * xhat.cwiseAbs().maxCoeff() * static_cast<double>(data.n());
    EXPECT_LT((xhat.transpose() * fit.residuals).cwiseAbs().maxCoeff(), 1e-8 * scale);
  });
}

TEST(Tsls, Equivariance)
{
  Gen gen(38);
  const Dataset data = gen.iv_dataset(80, 1, 2);
  const Vector base = tsls_fit(data).beta;
  const Dataset scaled((3.0 * data.y()).eval(), data.x_exog(), data.endog(), data.z_excl());
  const Dataset shifted((data.y().array() + 4.0).matrix(), data.x_exog(), data.endog(), data.z_excl());
  EXPECT_TRUE(tsls_fit(scaled).beta.isApprox(3.0 * base, 1e-12));
  const Vector s = tsls_fit(shifted).beta;
  EXPECT_NEAR(s(0), base(0) + 4.0, 1e-10);
  EXPECT_NEAR(s(1), base(1), 1e-10);
}

TEST(Tsls, SingularInstruments)
{
  Gen gen(39);
  const Matrix z = gen.normal_matrix(20, 1);
  Matrix zz(20, 2);
  zz << z, 2.0 * z;
  const Dataset data(gen.normal_vector(20), Matrix::Ones(20, 1), gen.normal_matrix(20, 1), zz);
  EXPECT_THROW(tsls_fit(data), RankDeficiency);
}

} // namespace
} // namespace ivqr
