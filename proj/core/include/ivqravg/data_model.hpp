#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>

namespace ivqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

//! Quantile level strictly inside (0, 1).
class QuantileLevel
{
public:
  explicit QuantileLevel(double tau);
  double value() const noexcept { return tau_; }

private:
  double tau_;
};

//! Observations for a linear quantile model with instruments.
//!
//! The regressor matrix is X = [x_exog | d_endog] and the full instrument
//! matrix is Z = [x_exog | z_excl]. Both are materialized at construction so
//! estimators can use them directly. When the first exogenous column is all
//! ones it is treated as the intercept.
class Dataset
{
public:
  Dataset(Vector y, Matrix x_exog, Matrix d_endog, Matrix z_excl);

  Index n() const noexcept { return y_.size(); }
  Index d_exog() const noexcept { return x_exog_.cols(); }
  Index d_endog() const noexcept { return d_endog_.cols(); }
  Index d_excl() const noexcept { return z_excl_.cols(); }
  Index d_x() const noexcept { return x_.cols(); }
  Index d_z() const noexcept { return z_.cols(); }

  const Vector& y() const noexcept { return y_; }
  const Matrix& x_exog() const noexcept { return x_exog_; }
  const Matrix& endog() const noexcept { return d_endog_; }
  const Matrix& z_excl() const noexcept { return z_excl_; }
  const Matrix& regressors() const noexcept { return x_; }
  const Matrix& instruments() const noexcept { return z_; }

  bool has_intercept() const noexcept { return has_intercept_; }

  //! Instruments without the intercept column (Z_{-1}); all of Z when the
  //! design carries no intercept.
  Matrix nonconstant_instruments() const;
  Index d_nonconstant_instruments() const noexcept
  {
    return has_intercept_ ? z_.cols() - 1 : z_.cols();
  }

  //! Row subset (with repetition), e.g. for a bootstrap resample.
  Dataset select_rows(std::span<const Index> rows) const;

private:
  Vector y_;
  Matrix x_exog_;
  Matrix d_endog_;
  Matrix z_excl_;
  Matrix x_;
  Matrix z_;
  bool has_intercept_ = false;
};

enum class MomentKind
{
  Conservative,
  AggressiveQR,
  Aggressive2SLS
};

std::string to_string(MomentKind kind);

//! Active moment stack plus the smoothing bandwidth of its indicator rows.
struct MomentSet
{
  MomentSet(MomentKind kind, double bandwidth);

  MomentKind kind;
  double bandwidth;

  //! Number of moment rows r for the given data layout.
  Index dimension(const Dataset& data) const;
};

struct EstimatorResult
{
  Vector beta;
  double objective = 0.0;
  double bandwidth_used = 0.0;
  bool converged = false;
  int iterations = 0;
  //! The GMM weighting matrix needed a ridge to be inverted.
  bool regularized = false;
};

} // namespace ivqr
