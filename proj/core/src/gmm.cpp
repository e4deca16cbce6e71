#include "ivqravg/gmm.hpp"

#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"
#include "ivqravg/metrics.hpp"
#include "ivqravg/moments.hpp"
#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ivqr {

void GmmConfig::validate() const
{
  if (!(tolerance > 0.0)) throw InvalidArgument("GMM tolerance must be positive");
  if (max_iterations < 1) throw InvalidArgument("GMM needs at least one iteration");
  if (multistart_points < 1 || multistart_points > 3) {
    throw InvalidArgument("multistart_points must be between 1 and 3");
  }
  if (!(weighting_ridge >= 0.0)) throw InvalidArgument("weighting ridge must be nonnegative");
}

double default_estimation_bandwidth(const Dataset& data, const SmoothingRule& rule)
{
  const Vector resid = tsls_fit(data).residuals;
  const std::vector<double> r(resid.data(), resid.data() + resid.size());
  double scale = robust_scale(r);
  if (!(scale > 0.0)) scale = resid.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return rule.floor;
  return default_smoothing_bandwidth(data, scale, rule);
}

EstimatorResult initial_mm_estimate(const Dataset& data, QuantileLevel tau, double h, const GmmConfig& cfg)
{
  cfg.validate();
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidArgument("smoothing bandwidth must be positive");
  }
  const Matrix xhat = project_onto_instruments(data);
  const LinearFit start = tsls_fit(data);

  // Bandwidth continuation starts at the spread of the 2SLS residuals.
  const std::vector<double> r(start.residuals.data(), start.residuals.data() + start.residuals.size());
  const double spread = std::max(robust_scale(r), h);

  const double tolerance = 1e-7 * (1.0 + xhat.cwiseAbs().maxCoeff());
  const auto root = detail::solve_smoothed_equations(data.regressors(), xhat, data.y(), tau.value(), h,
                                                     start.beta, spread, cfg.max_iterations, tolerance);
  EstimatorResult out;
  out.beta = root.beta;
  out.objective = root.max_abs_equation * root.max_abs_equation;
  out.bandwidth_used = h;
  out.converged = root.converged;
  out.iterations = root.iterations;
  if (!out.beta.allFinite()) {
    throw SolverFailure("initial method-of-moments estimate is not finite");
  }
  return out;
}

GmmWeighting gmm_weighting(const Matrix& sigma, double ridge)
{
  const Index r = sigma.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success) {
    throw SolverFailure("eigendecomposition of the moment covariance failed");
  }
  Vector values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  const double bottom = values.minCoeff();
  GmmWeighting w;
  if (!(top > 0.0)) {
    throw RankDeficiency("moment covariance is zero");
  }
  if (!(bottom > 0.0) || top / bottom > 1e12) {
    const double lambda = std::max(ridge * sigma.trace() / static_cast<double>(r), 1e-300);
    values = values.cwiseMax(0.0).array() + lambda;
    w.regularized = true;
  }
  w.root = values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return w;
}

GmmAnchors compute_anchors(const Dataset& data, QuantileLevel tau, double h, const GmmConfig& cfg)
{
  GmmAnchors a;
  a.beta_check = initial_mm_estimate(data, tau, h, cfg).beta;
  a.tsls = tsls_fit(data).beta;
  if (cfg.multistart_points >= 3) a.qr = qr_fit(data, tau).beta;
  return a;
}

EstimatorResult two_step_gmm(const Dataset& data,
                             QuantileLevel tau,
                             const MomentSet& set,
                             const GmmConfig& cfg,
                             const GmmAnchors& anchors)
{
  cfg.validate();
  if (anchors.beta_check.size() != data.d_x()) {
    throw InvalidArgument("anchor beta_check has wrong length");
  }
  const MomentModel model(data, tau, set);
  if (model.dimension() < data.d_x()) {
    throw InvalidArgument("moment stack has fewer rows than parameters");
  }
  const Matrix sigma = covariance_of_rows(model.evaluate(anchors.beta_check));
  const GmmWeighting weighting = gmm_weighting(sigma, cfg.weighting_ridge);
  const Matrix& root = weighting.root;

  std::vector<Vector> starts{anchors.beta_check};
  if (cfg.multistart_points >= 2 && anchors.tsls.size() == data.d_x()) starts.push_back(anchors.tsls);
  if (cfg.multistart_points >= 3 && anchors.qr.size() == data.d_x()) starts.push_back(anchors.qr);

  detail::LmOptions lm;
  lm.max_iterations = cfg.max_iterations;
  lm.relative_tolerance = cfg.tolerance;

  std::vector<detail::OptimResult> runs;
  for (const Vector& s : starts) {
    runs.push_back(detail::levenberg_marquardt(
      [&](const Vector& b) { return Vector(root * model.mean(b)); },
      [&](const Vector& b) { return Matrix(root * model.jacobian(b)); },
      s, lm));
  }

  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    if (r.x.allFinite()) best_value = std::min(best_value, r.objective);
  }
  if (!std::isfinite(best_value)) {
    throw SolverFailure("GMM objective is not finite at any start");
  }
  const double slack = cfg.tolerance * (1.0 + best_value) + 1e-14;
  const detail::OptimResult* chosen = nullptr;
  double chosen_distance = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    if (!r.x.allFinite() || r.objective > best_value + slack) continue;
    const double dist = (r.x - anchors.beta_check).norm();
    if (dist < chosen_distance) {
      chosen = &r;
      chosen_distance = dist;
    }
  }

  // Derivative-free polish on the rugged small-h surface.
  const Matrix& x = data.regressors();
  Vector steps(data.d_x());
  for (Index j = 0; j < x.cols(); ++j) {
    const double rms = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(x.rows()));
    steps(j) = rms > 0.0 ? 2.0 * set.bandwidth / rms : 2.0 * set.bandwidth;
  }
  detail::NelderMeadOptions nm;
  nm.max_evaluations = 50 * static_cast<int>(data.d_x() + 1);
  nm.f_tolerance = cfg.tolerance;
  const auto polished = detail::nelder_mead(
    [&](const Vector& b) { return (root * model.mean(b)).squaredNorm(); }, chosen->x, steps, nm);

  EstimatorResult out;
  out.beta = chosen->x;
  out.objective = chosen->objective;
  if (polished.x.allFinite() && polished.objective < chosen->objective) {
    out.beta = polished.x;
    out.objective = polished.objective;
  }
  out.bandwidth_used = set.bandwidth;
  out.converged = chosen->converged;
  out.iterations = chosen->iterations + polished.iterations;
  out.regularized = weighting.regularized;
  return out;
}

EstimatorResult two_step_gmm(const Dataset& data, QuantileLevel tau, const MomentSet& set, const GmmConfig& cfg)
{
  const GmmAnchors anchors = compute_anchors(data, tau, set.bandwidth, cfg);
  return two_step_gmm(data, tau, set, cfg, anchors);
}

} // namespace ivqr
