#pragma once

#include "ivqravg/data_model.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace ivqr {

//! Sample quantile by linear interpolation of order statistics at the
//! 1-based position 1 + (M - 1) p. p = 0 gives the minimum, p = 1 the maximum.
double empirical_quantile(std::span<const double> samples, double p);

//! Interquartile range divided by 1.349 (robust Gaussian scale).
double robust_scale(std::span<const double> samples);

//! Robust RMSE of an M x d matrix of estimates (one replication per row)
//! around the true parameter vector: median bias replaces bias and
//! IQR / 1.349 replaces the standard deviation, summed over coefficients.
double rrmse(const Matrix& estimates, const Vector& truth);

//! Relative robust RMSE table. Rows are DGPs, columns are estimators.
struct MetricsTable
{
  std::vector<std::string> dgp_ids;
  std::vector<std::string> estimators;
  //! cells[row][col], relative to the baseline estimator of that row
  std::vector<std::vector<double>> cells;
  //! absolute rRMSE of the baseline per row
  std::vector<double> baseline_absolute;
  std::string baseline;

  double cell(std::size_t row, const std::string& estimator) const;
};

//! Estimates of one estimator across the replications of one DGP.
using EstimatorEstimates = std::map<std::string, Matrix>;

//! One row of a relative table from a single DGP. Every estimator must have
//! the same number of replications; the baseline rRMSE must be positive.
std::vector<double> relative_rrmse_row(const EstimatorEstimates& per_estimator,
                                       const Vector& truth,
                                       const std::vector<std::string>& order,
                                       const std::string& baseline,
                                       double* baseline_absolute = nullptr);

MetricsTable relative_rrmse_table(const std::vector<std::string>& dgp_ids,
                                  const std::vector<EstimatorEstimates>& per_dgp,
                                  const std::vector<Vector>& truths,
                                  const std::vector<std::string>& estimators,
                                  const std::string& baseline);

} // namespace ivqr
