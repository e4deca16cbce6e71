#include "ivqravg/averaging.hpp"

#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"
#include "ivqravg/metrics.hpp"
#include "ivqravg/moments.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ivqr {

std::string to_string(AdditionalMoments additional)
{
  return additional == AdditionalMoments::QR ? "qr" : "2sls";
}

std::string to_string(JacobianBandwidthRule rule)
{
  return rule == JacobianBandwidthRule::Plugin ? "plugin" : "nonparametric";
}

EmpiricalWeight empirical_weight(const Vector& beta1,
                                 const Vector& beta2,
                                 const Matrix& sigma1,
                                 const Matrix& sigma2,
                                 const Vector& upsilon,
                                 Index n)
{
  const Index d = beta1.size();
  if (beta2.size() != d || sigma1.rows() != d || sigma1.cols() != d || sigma2.rows() != d ||
      sigma2.cols() != d || upsilon.size() != d) {
    throw InvalidArgument("empirical weight: dimension mismatch");
  }
  if (n < 1) throw InvalidArgument("empirical weight needs n >= 1");
  if ((upsilon.array() < 0.0).any()) {
    throw InvalidArgument("upsilon entries must be nonnegative");
  }
  const double trace = (upsilon.asDiagonal() * (sigma1 - sigma2)).trace();
  const Vector diff = beta1 - beta2;
  const double quad = static_cast<double>(n) * diff.dot(upsilon.asDiagonal() * diff);
  const double denominator = quad + trace;

  EmpiricalWeight w;
  if (denominator == 0.0) {
    w.degenerate = true;
    return w;
  }
  w.raw = trace / denominator;
  w.value = std::clamp(w.raw, 0.0, 1.0);
  return w;
}

namespace {

Matrix ridge_inverse(const Matrix& a, double ridge, bool& regularized)
{
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw SolverFailure("eigendecomposition failed in sandwich variance");
  }
  Vector values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) {
    throw RankDeficiency("sandwich information matrix is zero");
  }
  if (!(values.minCoeff() > 0.0) || top / values.minCoeff() > 1e12) {
    const double lambda = std::max(ridge * sym.trace() / static_cast<double>(sym.rows()), 1e-300);
    values = values.cwiseMax(0.0).array() + lambda;
    regularized = true;
  }
  const Matrix& v = eig.eigenvectors();
  Matrix inv = v * values.cwiseInverse().asDiagonal() * v.transpose();
  return 0.5 * (inv + inv.transpose());
}

double residual_scale(const Dataset& data, const Vector& beta)
{
  const Vector resid = data.y() - data.regressors() * beta;
  const std::vector<double> r(resid.data(), resid.data() + resid.size());
  return robust_scale(r);
}

} // namespace

Matrix sandwich_variance(const Dataset& data,
                         QuantileLevel tau,
                         const MomentSet& set,
                         const Vector& beta,
                         double jacobian_bandwidth,
                         double ridge,
                         bool* regularized)
{
  const MomentModel model(data, tau, set);
  const Matrix sigma = covariance_of_rows(model.evaluate(beta));
  const GmmWeighting w = gmm_weighting(sigma, ridge);
  const Matrix g = w.root * model.jacobian(beta, jacobian_bandwidth);
  bool reg = w.regularized;
  Matrix out = ridge_inverse(g.transpose() * g, ridge, reg);
  if (regularized != nullptr) *regularized = reg;
  return out;
}

ConservativeStage fit_conservative(const Dataset& data,
                                   QuantileLevel tau,
                                   const GmmConfig& cfg,
                                   const AveragingOptions& options)
{
  ConservativeStage stage;
  stage.estimation_bandwidth = options.estimation_bandwidth
                                 ? *options.estimation_bandwidth
                                 : default_estimation_bandwidth(data, options.smoothing);
  const double h = stage.estimation_bandwidth;
  const MomentSet conservative(MomentKind::Conservative, h);

  stage.initial = initial_mm_estimate(data, tau, h, cfg);
  stage.anchors.beta_check = stage.initial.beta;
  stage.anchors.tsls = tsls_fit(data).beta;
  if (cfg.multistart_points >= 3) stage.anchors.qr = qr_fit(data, tau).beta;
  stage.conservative = two_step_gmm(data, tau, conservative, cfg, stage.anchors);

  const Vector& beta1 = stage.conservative.beta;
  try {
    if (options.jacobian_rule == JacobianBandwidthRule::Nonparametric) {
      stage.jacobian_bandwidth =
        nonparametric_ivqr_bandwidth(data, data.y() - data.regressors() * beta1);
    } else {
      const double sigma_hat = residual_scale(data, beta1);
      if (!(sigma_hat > 0.0)) throw ZeroDenominator("residual spread at the conservative estimate is zero");
      stage.jacobian_bandwidth =
        gaussian_plugin_bandwidth(data.regressors(), data.instruments(), tau, sigma_hat, PluginVariant::IVQR);
    }
  } catch (const ZeroDenominator&) {
    stage.jacobian_fallback = true;
  } catch (const InvalidArgument&) {
    stage.jacobian_fallback = true;
  }
  if (stage.jacobian_fallback) {
    stage.jacobian_bandwidth = BandwidthReport{};
    stage.jacobian_bandwidth.h = h;
    stage.jacobian_bandwidth.method = BandwidthMethod::Default;
  }

  stage.sigma1 = sandwich_variance(data, tau, conservative, beta1, stage.jacobian_bandwidth.h,
                                   cfg.weighting_ridge, &stage.sigma1_regularized);
  return stage;
}

AveragingResult averaging_estimate(const Dataset& data,
                                   QuantileLevel tau,
                                   AdditionalMoments additional,
                                   const ConservativeStage& stage,
                                   const GmmConfig& cfg,
                                   const AveragingOptions& options)
{
  const Index d = data.d_x();
  AveragingResult out;
  out.upsilon = options.upsilon.size() == 0 ? Vector(Vector::Ones(d)) : options.upsilon;
  if (out.upsilon.size() != d) {
    throw InvalidArgument("upsilon must have one entry per coefficient");
  }
  const double h = stage.estimation_bandwidth;
  const MomentSet aggressive(additional == AdditionalMoments::QR ? MomentKind::AggressiveQR
                                                                 : MomentKind::Aggressive2SLS,
                             h);

  out.conservative = stage.conservative;
  out.aggressive = two_step_gmm(data, tau, aggressive, cfg, stage.anchors);
  out.beta_conservative = stage.conservative.beta;
  out.beta_aggressive = out.aggressive.beta;
  out.estimation_bandwidth = h;
  out.jacobian_bandwidth = stage.jacobian_bandwidth;
  out.jacobian_fallback = stage.jacobian_fallback;

  bool reg2 = false;
  out.sigma1 = stage.sigma1;
  out.sigma2 = sandwich_variance(data, tau, aggressive, out.beta_conservative, stage.jacobian_bandwidth.h,
                                 cfg.weighting_ridge, &reg2);
  out.regularized = stage.sigma1_regularized || reg2 || stage.conservative.regularized ||
                    out.aggressive.regularized;

  const EmpiricalWeight w = empirical_weight(out.beta_conservative, out.beta_aggressive, out.sigma1,
                                             out.sigma2, out.upsilon, data.n());
  out.weight_raw = w.raw;
  out.weight_degenerate = w.degenerate;
  out.weight = w.value;
  if (options.weight_override) {
    const double forced = *options.weight_override;
    if (!(forced >= 0.0 && forced <= 1.0)) {
      throw InvalidArgument("weight override must lie in [0, 1]");
    }
    out.weight = forced;
  }
  out.beta_avg = (1.0 - out.weight) * out.beta_conservative + out.weight * out.beta_aggressive;
  if (out.weight == 0.0) out.beta_avg = out.beta_conservative;
  if (out.weight == 1.0) out.beta_avg = out.beta_aggressive;
  return out;
}

AveragingResult averaging_estimate(const Dataset& data,
                                   QuantileLevel tau,
                                   AdditionalMoments additional,
                                   const GmmConfig& cfg,
                                   const AveragingOptions& options)
{
  const ConservativeStage stage = fit_conservative(data, tau, cfg, options);
  return averaging_estimate(data, tau, additional, stage, cfg, options);
}

} // namespace ivqr
