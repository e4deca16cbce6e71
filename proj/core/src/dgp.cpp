#include "ivqravg/dgp.hpp"

#include "ivqravg/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <random>

namespace ivqr {

namespace {

constexpr int kInstruments = 12;
constexpr int kRegressors = 6;

const boost::math::normal& standard_normal()
{
  static const boost::math::normal dist;
  return dist;
}

const boost::math::chi_squared& chi4()
{
  static const boost::math::chi_squared dist(4.0);
  return dist;
}

double intercept_quantile(const Model1Params& p, double u)
{
  if (p.intercept_kind == InterceptKind::ChiSq3) {
    return boost::math::quantile(boost::math::chi_squared(3.0), u);
  }
  return boost::math::quantile(boost::math::students_t(p.c3), u);
}

// First-stage errors and the standard normal structural draw with
// Cov(eps_j, raw) = c0 and Var(raw) = 1.
struct ErrorBlock
{
  double eps[kRegressors];
  double raw;
};

ErrorBlock draw_errors(double c0, Engine& rng, std::normal_distribution<double>& normal)
{
  ErrorBlock e{};
  double sum = 0.0;
  for (double& v : e.eps) {
    v = normal(rng);
    sum += v;
  }
  const double nu = normal(rng);
  e.raw = c0 * sum + std::sqrt(1.0 - kRegressors * c0 * c0) * nu;
  return e;
}

void validate_c0(double c0)
{
  if (!(c0 >= 0.0 && c0 <= 0.4)) {
    throw InvalidArgument("c0 must lie in [0, 0.4] for a positive definite error covariance");
  }
}

void validate_n(Index n)
{
  if (n < 2) throw InvalidArgument("simulated sample size must be at least 2");
}

Dataset assemble(Vector y, const Matrix& regressors, Matrix instruments, bool intercept)
{
  const Index n = y.size();
  Matrix exog = intercept ? Matrix(Matrix::Ones(n, 1)) : Matrix(n, 0);
  return Dataset(std::move(y), std::move(exog), regressors, std::move(instruments));
}

} // namespace

void Model1Params::validate() const
{
  if (!(c1 >= 0.0 && c1 <= 1.0)) throw InvalidArgument("model 1: c1 must lie in [0, 1]");
  if (!(c2 >= 0.0) || !std::isfinite(c2)) throw InvalidArgument("model 1: c2 must be nonnegative");
  if (intercept_kind == InterceptKind::StudentT) {
    if (!(c3 >= 1.0) || !std::isfinite(c3)) throw InvalidArgument("model 1: c3 must be at least 1");
    if (c2 != 0.0) throw InvalidArgument("model 1: the t intercept design requires c2 = 0");
  }
}

void Model2Params::validate() const
{
  validate_c0(c0);
}

void Model3Params::validate() const
{
  validate_c0(c0);
  if (!(hetero >= 0.0) || !std::isfinite(hetero)) throw InvalidArgument("model 3: hetero must be nonnegative");
}

std::string to_string(ErrorKind kind)
{
  return kind == ErrorKind::Gaussian ? "gaussian" : "chisq4";
}

ErrorKind error_kind_from_string(const std::string& name)
{
  if (name == "gaussian") return ErrorKind::Gaussian;
  if (name == "chisq4") return ErrorKind::ChiSq4Transformed;
  throw InvalidArgument("unknown error kind '" + name + "' (expected gaussian or chisq4)");
}

ErrorDistribution error_distribution(ErrorKind kind)
{
  return kind == ErrorKind::Gaussian ? ErrorDistribution::GaussianStd : ErrorDistribution::ChiSq4OfGaussian;
}

double transform_error(double raw, ErrorDistribution dist)
{
  if (dist == ErrorDistribution::GaussianStd) return raw;
  // Upper tail through the complement keeps precision for large draws.
  if (raw <= 0.0) {
    const double p = boost::math::cdf(standard_normal(), raw);
    return p > 0.0 ? boost::math::quantile(chi4(), p) : 0.0;
  }
  const double q = boost::math::cdf(standard_normal(), -raw);
  return boost::math::quantile(boost::math::complement(chi4(), q));
}

double error_quantile(QuantileLevel tau, ErrorDistribution dist)
{
  if (dist == ErrorDistribution::GaussianStd) {
    return boost::math::quantile(standard_normal(), tau.value());
  }
  return boost::math::quantile(chi4(), tau.value());
}

Vector recenter_error(const Vector& raw, QuantileLevel tau, ErrorDistribution dist)
{
  const double shift = error_quantile(tau, dist);
  Vector out(raw.size());
  for (Index i = 0; i < raw.size(); ++i) out(i) = transform_error(raw(i), dist) - shift;
  return out;
}

Vector SimulatedData::scored_truth() const
{
  return scored_part(truth);
}

Vector SimulatedData::scored_part(const Vector& beta) const
{
  Vector out(static_cast<Index>(scored.size()));
  for (std::size_t k = 0; k < scored.size(); ++k) out(static_cast<Index>(k)) = beta(scored[k]);
  return out;
}

Vector model1_truth(const Model1Params& p, QuantileLevel tau)
{
  p.validate();
  const double t = tau.value();
  Vector truth(2);
  truth << 60.0 + intercept_quantile(p, t), 100.0 * p.c2 * std::pow(t, 4);
  return truth;
}

SimulatedData gen_model1(const Model1Params& p, Index n, QuantileLevel tau, Engine& rng)
{
  p.validate();
  validate_n(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector y(n);
  Matrix d(n, 1);
  Matrix z(n, 1);
  Vector u(n);
  for (Index i = 0; i < n; ++i) {
    double ui = unit(rng);
    while (ui <= 0.0) ui = unit(rng);
    const double zi = unit(rng) < 0.5 ? 1.0 : 0.0;
    const double vi = unit(rng);
    const double di = (zi == 1.0 && vi < 0.5 + p.c1 * (ui - 0.5)) ? 1.0 : 0.0;
    u(i) = ui;
    z(i, 0) = zi;
    d(i, 0) = di;
    y(i) = 60.0 + intercept_quantile(p, ui) + 100.0 * p.c2 * std::pow(ui, 4) * di;
  }
  SimulatedData out{assemble(std::move(y), d, std::move(z), true), model1_truth(p, tau), {0, 1}, std::move(u)};
  return out;
}

SimulatedData gen_model2(const Model2Params& p, Index n, QuantileLevel tau, Engine& rng)
{
  p.validate();
  validate_n(n);
  const ErrorDistribution dist = error_distribution(p.error_kind);
  const double shift = error_quantile(tau, dist);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix z(n, kInstruments);
  Matrix x(n, kRegressors);
  Vector u(n);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < kInstruments; ++k) z(i, k) = normal(rng);
    const ErrorBlock e = draw_errors(p.c0, rng, normal);
    double sum_x = 0.0;
    for (int j = 0; j < kRegressors; ++j) {
      x(i, j) = 0.5 * (z(i, j) + z(i, j + kRegressors)) + e.eps[j];
      sum_x += x(i, j);
    }
    u(i) = transform_error(e.raw, dist) - shift;
    y(i) = 1.0 + 2.5 * sum_x + u(i);
  }

  SimulatedData out{assemble(std::move(y), x, std::move(z), p.intercept), Vector(), {}, std::move(u)};
  const Index offset = p.intercept ? 1 : 0;
  out.truth = Vector::Constant(kRegressors + offset, 2.5);
  if (p.intercept) out.truth(0) = 1.0;
  for (Index j = 0; j < kRegressors; ++j) out.scored.push_back(j + offset);
  return out;
}

SimulatedData gen_model3(const Model3Params& p, Index n, QuantileLevel tau, Engine& rng)
{
  p.validate();
  validate_n(n);
  const ErrorDistribution dist = error_distribution(p.error_kind);
  const double shift = error_quantile(tau, dist);
  // Population standard deviation of Z_j + Z_{j+6} + eps_j.
  const double offset_x = 3.1 * std::sqrt(3.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix z(n, kInstruments);
  Matrix x(n, kRegressors);
  Vector u(n);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < kInstruments; ++k) z(i, k) = normal(rng);
    const ErrorBlock e = draw_errors(p.c0, rng, normal);
    const double rank = boost::math::cdf(standard_normal(), e.raw);
    const double theta = p.hetero * std::pow(rank, 4);
    double index = 0.0;
    for (int j = 0; j < kRegressors; ++j) {
      const double v = z(i, j) + z(i, j + kRegressors) + e.eps[j] + offset_x;
      x(i, j) = v > 0.0 ? v : 0.0;
      index += theta * x(i, j);
    }
    u(i) = transform_error(e.raw, dist) - shift;
    y(i) = 1.0 + index + u(i);
  }

  SimulatedData out{assemble(std::move(y), x, std::move(z), p.intercept), Vector(), {}, std::move(u)};
  const Index off = p.intercept ? 1 : 0;
  out.truth = Vector::Constant(kRegressors + off, p.hetero * std::pow(tau.value(), 4));
  if (p.intercept) out.truth(0) = 1.0;
  for (Index j = 0; j < kRegressors; ++j) out.scored.push_back(j + off);
  return out;
}

} // namespace ivqr
