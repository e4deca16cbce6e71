#include "ivqravg/moments.hpp"

#include "ivqravg/errors.hpp"
#include "ivqravg/smoothing.hpp"

namespace ivqr {

MomentModel::MomentModel(const Dataset& data, QuantileLevel tau, MomentSet set)
  : data_(&data)
  , tau_(tau.value())
  , set_(set)
{
  const Index n = data.n();
  switch (set.kind) {
    case MomentKind::Conservative:
      indicator_instruments_ = data.instruments();
      slope_instruments_.resize(n, 0);
      break;
    case MomentKind::AggressiveQR:
      indicator_instruments_.resize(n, data.d_z() + data.d_endog());
      indicator_instruments_ << data.instruments(), data.endog();
      slope_instruments_.resize(n, 0);
      break;
    case MomentKind::Aggressive2SLS: {
      indicator_instruments_ = data.instruments();
      slope_instruments_ = data.nonconstant_instruments();
      const Eigen::RowVectorXd center = slope_instruments_.colwise().mean();
      slope_instruments_.rowwise() -= center;
      break;
    }
  }
}

Vector MomentModel::mean(const Vector& beta) const
{
  const Dataset& d = *data_;
  if (beta.size() != d.d_x()) {
    throw InvalidArgument("coefficient vector has wrong length");
  }
  const Vector fitted_minus_y = d.regressors() * beta - d.y();
  const double inv_h = 1.0 / set_.bandwidth;
  Vector s(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    s(i) = smoothed_indicator(fitted_minus_y(i) * inv_h) - tau_;
  }
  const double inv_n = 1.0 / static_cast<double>(d.n());
  Vector m(dimension());
  m.head(indicator_rows()) = indicator_instruments_.transpose() * s * inv_n;
  if (slope_instruments_.cols() > 0) {
    m.tail(slope_instruments_.cols()) = -(slope_instruments_.transpose() * fitted_minus_y) * inv_n;
  }
  return m;
}

MomentEvaluation MomentModel::evaluate(const Vector& beta) const
{
  const Dataset& d = *data_;
  if (beta.size() != d.d_x()) {
    throw InvalidArgument("coefficient vector has wrong length");
  }
  const Vector fitted_minus_y = d.regressors() * beta - d.y();
  const double inv_h = 1.0 / set_.bandwidth;
  MomentEvaluation out;
  out.rows.resize(d.n(), dimension());
  const Index ri = indicator_rows();
  for (Index i = 0; i < d.n(); ++i) {
    const double s = smoothed_indicator(fitted_minus_y(i) * inv_h) - tau_;
    out.rows.row(i).head(ri) = indicator_instruments_.row(i) * s;
    if (slope_instruments_.cols() > 0) {
      out.rows.row(i).tail(slope_instruments_.cols()) =
        slope_instruments_.row(i) * (-fitted_minus_y(i));
    }
  }
  out.mean = out.rows.colwise().mean().transpose();
  return out;
}

Matrix MomentModel::jacobian(const Vector& beta, double h) const
{
  const Dataset& d = *data_;
  if (beta.size() != d.d_x()) {
    throw InvalidArgument("coefficient vector has wrong length");
  }
  if (!(h > 0.0)) {
    throw InvalidArgument("Jacobian bandwidth must be positive");
  }
  const Vector fitted_minus_y = d.regressors() * beta - d.y();
  const double inv_h = 1.0 / h;
  const double inv_n = 1.0 / static_cast<double>(d.n());
  Vector k(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    k(i) = smoothing_kernel(fitted_minus_y(i) * inv_h) * inv_h;
  }
  Matrix g(dimension(), d.d_x());
  g.topRows(indicator_rows()) =
    indicator_instruments_.transpose() * k.asDiagonal() * d.regressors() * inv_n;
  if (slope_instruments_.cols() > 0) {
    g.bottomRows(slope_instruments_.cols()) =
      -(slope_instruments_.transpose() * d.regressors()) * inv_n;
  }
  return g;
}

MomentEvaluation sample_moments(const Dataset& data,
                                const Vector& beta,
                                QuantileLevel tau,
                                const MomentSet& set)
{
  return MomentModel(data, tau, set).evaluate(beta);
}

Matrix covariance_of_rows(const MomentEvaluation& eval)
{
  const double inv_n = 1.0 / static_cast<double>(eval.rows.rows());
  Matrix s = (eval.rows.transpose() * eval.rows) * inv_n - eval.mean * eval.mean.transpose();
  // exact symmetry
  return (s + s.transpose()) * 0.5;
}

Matrix moment_covariance(const Dataset& data,
                         const Vector& beta_check,
                         QuantileLevel tau,
                         const MomentSet& set)
{
  return covariance_of_rows(sample_moments(data, beta_check, tau, set));
}

} // namespace ivqr
