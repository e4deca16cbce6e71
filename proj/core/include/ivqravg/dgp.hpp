#pragma once

#include "ivqravg/data_model.hpp"
#include "ivqravg/rng.hpp"

#include <string>
#include <vector>

namespace ivqr {

enum class InterceptKind
{
  ChiSq3,
  StudentT
};

//! Binary treatment, binary instrument.
struct Model1Params
{
  double c1 = 0.0; //!< endogeneity, in [0, 1]
  double c2 = 0.0; //!< slope heterogeneity, >= 0
  InterceptKind intercept_kind = InterceptKind::ChiSq3;
  double c3 = 3.0; //!< t degrees of freedom, >= 1
  void validate() const;
};

enum class ErrorKind
{
  Gaussian,
  ChiSq4Transformed
};

std::string to_string(ErrorKind kind);
ErrorKind error_kind_from_string(const std::string& name);

//! Six endogenous regressors, twelve instruments, constant slopes.
struct Model2Params
{
  double c0 = 0.0; //!< covariance of each first-stage error with u, in [0, 0.4]
  ErrorKind error_kind = ErrorKind::Gaussian;
  //! Estimate an intercept. Without it the design is the six slopes only.
  bool intercept = true;
  void validate() const;
};

//! Model 2 layout with rank-heterogeneous slopes and shifted, clipped
//! nonnegative regressors.
struct Model3Params
{
  double c0 = 0.0;
  double hetero = 1.0;
  ErrorKind error_kind = ErrorKind::Gaussian;
  bool intercept = true;
  void validate() const;
};

enum class ErrorDistribution
{
  GaussianStd,
  ChiSq4OfGaussian
};

ErrorDistribution error_distribution(ErrorKind kind);

//! Monotone transform of a standard normal draw (identity or chi2_4 quantile
//! of its CDF value), before recentering.
double transform_error(double raw, ErrorDistribution dist);

//! Population tau-quantile of the transformed error.
double error_quantile(QuantileLevel tau, ErrorDistribution dist);

//! transform_error(raw) - error_quantile(tau): population tau-quantile zero.
Vector recenter_error(const Vector& raw, QuantileLevel tau, ErrorDistribution dist);

struct SimulatedData
{
  Dataset data;
  //! True coefficient vector, aligned with data.regressors().
  Vector truth;
  //! Coefficients that enter the robust RMSE.
  std::vector<Index> scored;
  //! Structural error (recentered u for models 2 and 3, U for model 1).
  Vector error;

  Vector scored_truth() const;
  Vector scored_part(const Vector& beta) const;
};

//! (60 + Q(tau), 100 c2 tau^4).
Vector model1_truth(const Model1Params& p, QuantileLevel tau);

SimulatedData gen_model1(const Model1Params& p, Index n, QuantileLevel tau, Engine& rng);
SimulatedData gen_model2(const Model2Params& p, Index n, QuantileLevel tau, Engine& rng);
SimulatedData gen_model3(const Model3Params& p, Index n, QuantileLevel tau, Engine& rng);

} // namespace ivqr
