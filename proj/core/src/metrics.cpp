#include "ivqravg/metrics.hpp"

#include "ivqravg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ivqr {

double empirical_quantile(std::span<const double> samples, double p)
{
  if (samples.empty()) {
    throw InvalidArgument("empirical quantile of an empty sample");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("quantile probability must lie in [0, 1]");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) {
    return sorted[lo];
  }
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double robust_scale(std::span<const double> samples)
{
  return (empirical_quantile(samples, 0.75) - empirical_quantile(samples, 0.25)) / 1.349;
}

double rrmse(const Matrix& estimates, const Vector& truth)
{
  if (estimates.rows() < 2) {
    throw InvalidArgument("rRMSE needs at least two replications");
  }
  if (estimates.cols() != truth.size()) {
    throw InvalidArgument("rRMSE: estimate width does not match truth length");
  }
  double total = 0.0;
  std::vector<double> column(static_cast<std::size_t>(estimates.rows()));
  for (Index j = 0; j < estimates.cols(); ++j) {
    for (Index m = 0; m < estimates.rows(); ++m) {
      column[static_cast<std::size_t>(m)] = estimates(m, j);
    }
    const double bias = empirical_quantile(column, 0.5) - truth(j);
    const double iqr = empirical_quantile(column, 0.75) - empirical_quantile(column, 0.25);
    total += bias * bias + (iqr / 1.349) * (iqr / 1.349);
  }
  return std::sqrt(total);
}

double MetricsTable::cell(std::size_t row, const std::string& estimator) const
{
  const auto it = std::find(estimators.begin(), estimators.end(), estimator);
  if (it == estimators.end()) {
    throw InvalidArgument("estimator not in table: " + estimator);
  }
  return cells.at(row).at(static_cast<std::size_t>(it - estimators.begin()));
}

std::vector<double> relative_rrmse_row(const EstimatorEstimates& per_estimator,
                                       const Vector& truth,
                                       const std::vector<std::string>& order,
                                       const std::string& baseline,
                                       double* baseline_absolute)
{
  const auto base = per_estimator.find(baseline);
  if (base == per_estimator.end()) {
    throw InvalidArgument("baseline estimator missing: " + baseline);
  }
  const Index reps = base->second.rows();
  const double base_rrmse = rrmse(base->second, truth);
  if (!(base_rrmse > 0.0)) {
    throw ZeroDenominator("baseline rRMSE is zero; relative table is undefined");
  }
  if (baseline_absolute != nullptr) {
    *baseline_absolute = base_rrmse;
  }
  std::vector<double> row;
  row.reserve(order.size());
  for (const auto& name : order) {
    const auto it = per_estimator.find(name);
    if (it == per_estimator.end()) {
      throw InvalidArgument("estimator missing: " + name);
    }
    if (it->second.rows() != reps) {
      throw InvalidArgument("estimators do not share the same replications");
    }
    row.push_back(name == baseline ? 1.0 : rrmse(it->second, truth) / base_rrmse);
  }
  return row;
}

MetricsTable relative_rrmse_table(const std::vector<std::string>& dgp_ids,
                                  const std::vector<EstimatorEstimates>& per_dgp,
                                  const std::vector<Vector>& truths,
                                  const std::vector<std::string>& estimators,
                                  const std::string& baseline)
{
  if (dgp_ids.size() != per_dgp.size() || truths.size() != per_dgp.size()) {
    throw InvalidArgument("relative table: mismatched DGP inputs");
  }
  if (std::find(estimators.begin(), estimators.end(), baseline) == estimators.end()) {
    throw InvalidArgument("baseline must be one of the table estimators");
  }
  MetricsTable table;
  table.dgp_ids = dgp_ids;
  table.estimators = estimators;
  table.baseline = baseline;
  for (std::size_t r = 0; r < per_dgp.size(); ++r) {
    double abs_base = 0.0;
    table.cells.push_back(
      relative_rrmse_row(per_dgp[r], truths[r], estimators, baseline, &abs_base));
    table.baseline_absolute.push_back(abs_base);
  }
  return table;
}

} // namespace ivqr
