#include "ivqravg/smoothing.hpp"

#include "ivqravg/errors.hpp"
#include "ivqravg/metrics.hpp"
#include "ivqravg/moments.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

namespace ivqr {

double smoothed_indicator(double v)
{
  if (!std::isfinite(v)) {
    throw InvalidArgument("smoothed indicator needs a finite argument");
  }
  if (v <= -1.0) return 0.0;
  if (v >= 1.0) return 1.0;
  const double v2 = v * v;
  return 0.5 + (15.0 / 16.0) * v * (1.0 - v2 * (2.0 / 3.0) + v2 * v2 / 5.0);
}

double smoothing_kernel(double u)
{
  if (!(u > -1.0 && u < 1.0)) return 0.0;
  const double t = 1.0 - u * u;
  return (15.0 / 16.0) * t * t;
}

double default_smoothing_bandwidth(std::size_t n, double residual_scale, const SmoothingRule& rule)
{
  if (!(residual_scale > 0.0) || !std::isfinite(residual_scale)) {
    throw InvalidArgument("residual scale must be positive and finite");
  }
  if (n == 0) {
    throw InvalidArgument("bandwidth rule needs at least one observation");
  }
  return std::max(rule.floor, rule.constant * residual_scale / std::sqrt(static_cast<double>(n)));
}

double default_smoothing_bandwidth(const Dataset& data, double residual_scale, const SmoothingRule& rule)
{
  return default_smoothing_bandwidth(static_cast<std::size_t>(data.n()), residual_scale, rule);
}

std::string to_string(BandwidthMethod method)
{
  switch (method) {
    case BandwidthMethod::PluginGaussianQR:
      return "plugin-gaussian-qr";
    case BandwidthMethod::PluginGaussianIVQR:
      return "plugin-gaussian-ivqr";
    case BandwidthMethod::NonparametricIVQR:
      return "nonparametric-ivqr";
    case BandwidthMethod::Default:
      return "default";
  }
  return "unknown";
}

double gaussian_alpha(QuantileLevel tau, double sigma_hat)
{
  if (!(sigma_hat > 0.0) || !std::isfinite(sigma_hat)) {
    throw InvalidArgument("sigma_hat must be positive and finite");
  }
  const boost::math::normal standard;
  const double q = boost::math::quantile(standard, tau.value());
  const double curvature = 1.0 - q * q;
  return curvature * curvature * boost::math::pdf(standard, q) / std::pow(sigma_hat, 5);
}

BandwidthReport gaussian_plugin_bandwidth(const Matrix& regressors,
                                      const Matrix& instruments,
                                      QuantileLevel tau,
                                      double sigma_hat,
                                      PluginVariant variant)
{
  if (regressors.rows() != instruments.rows() || regressors.rows() == 0) {
    throw InvalidArgument("plug-in bandwidth: regressors and instruments need the same rows");
  }
  const double alpha = gaussian_alpha(tau, sigma_hat);
  const Index n = regressors.rows();
  const double nd = static_cast<double>(n);

  // sum_{j,k} n^-1 sum_i X_ij^2 W_ik^2 = n^-1 sum_i (sum_j X_ij^2)(sum_k W_ik^2)
  const Vector x_sq = regressors.rowwise().squaredNorm();
  const Vector w_sq = instruments.rowwise().squaredNorm();
  const double fourth = x_sq.dot(w_sq) / nd;
  // sum_{j,k} (n^-1 sum_i X_ij W_ik)^2
  const double cross = (regressors.transpose() * instruments / nd).squaredNorm();

  const double denominator = alpha * cross;
  if (!(denominator > 0.0) || !std::isfinite(denominator)) {
    throw ZeroDenominator("plug-in bandwidth denominator is zero (degenerate design or "
                          "Gaussian curvature vanishes at this quantile)");
  }
  BandwidthReport report;
  report.h = std::pow(nd, -0.2) * std::pow(4.5 * fourth / denominator, 0.2);
  report.alpha_tau = alpha;
  report.sigma_hat = sigma_hat;
  report.method = variant == PluginVariant::QR ? BandwidthMethod::PluginGaussianQR
                                               : BandwidthMethod::PluginGaussianIVQR;
  if (!std::isfinite(report.h)) {
    throw ZeroDenominator("plug-in bandwidth is not finite");
  }
  return report;
}

namespace {

constexpr std::size_t kMaxCells = 32;
constexpr std::size_t kMinCellSize = 5;

using CellKey = std::vector<double>;

std::map<CellKey, std::vector<Index>> design_cells(const Dataset& data)
{
  std::map<CellKey, std::vector<Index>> cells;
  const Matrix& x = data.regressors();
  const Matrix& z = data.instruments();
  CellKey key(static_cast<std::size_t>(x.cols() + z.cols()));
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) key[static_cast<std::size_t>(j)] = x(i, j);
    for (Index k = 0; k < z.cols(); ++k) key[static_cast<std::size_t>(x.cols() + k)] = z(i, k);
    cells[key].push_back(i);
    if (cells.size() > kMaxCells) break;
  }
  return cells;
}

double normal_density(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

} // namespace

bool is_discrete_design(const Dataset& data)
{
  const auto cells = design_cells(data);
  if (cells.size() > kMaxCells) return false;
  return std::all_of(cells.begin(), cells.end(),
                     [](const auto& c) { return c.second.size() >= kMinCellSize; });
}

BandwidthReport nonparametric_ivqr_bandwidth(const Dataset& data, const Vector& residuals)
{
  if (residuals.size() != data.n()) {
    throw InvalidArgument("residual vector has wrong length");
  }
  const auto cells = design_cells(data);
  if (cells.size() > kMaxCells) {
    throw InvalidArgument("design has too many distinct regressor/instrument cells for "
                          "the nonparametric Jacobian bandwidth");
  }
  const double nd = static_cast<double>(data.n());
  const Index dx = data.d_x();
  const Index dz = data.d_z();

  double numerator = 0.0;
  Matrix curvature = Matrix::Zero(dx, dz);
  for (const auto& [key, rows] : cells) {
    if (rows.size() < kMinCellSize) {
      throw InvalidArgument("a design cell has fewer than 5 observations");
    }
    std::vector<double> r;
    r.reserve(rows.size());
    for (Index i : rows) r.push_back(residuals(i));
    const double nc = static_cast<double>(r.size());

    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= nc;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (nc - 1.0));
    double spread = std::min(sd, robust_scale(r));
    if (!(spread > 0.0)) spread = sd;
    if (!(spread > 0.0)) {
      throw ZeroDenominator("residuals are constant within a design cell");
    }

    // Normal-reference AMISE bandwidths for a Gaussian kernel:
    // density 1.059 s n^-1/5, second derivative 0.9397 s n^-1/9.
    const double h0 = 1.059 * spread * std::pow(nc, -0.2);
    const double h2 = 0.9397 * spread * std::pow(nc, -1.0 / 9.0);
    double f0 = 0.0;
    double f2 = 0.0;
    for (double v : r) {
      const double a = v / h0;
      f0 += normal_density(a);
      const double b = v / h2;
      f2 += (b * b - 1.0) * normal_density(b);
    }
    f0 /= nc * h0;
    f2 /= nc * h2 * h2 * h2;

    const double p = nc / nd;
    const auto xs = Eigen::Map<const Vector>(key.data(), dx);
    const auto zs = Eigen::Map<const Vector>(key.data() + dx, dz);
    numerator += p * f0 * xs.squaredNorm() * zs.squaredNorm();
    curvature += p * f2 * xs * zs.transpose();
  }
  const double denominator = curvature.squaredNorm();
  if (!(denominator > 0.0)) {
    throw ZeroDenominator("nonparametric bandwidth denominator is zero");
  }
  BandwidthReport report;
  report.h = std::pow(nd, -0.2) * std::pow(4.5 * numerator / denominator, 0.2);
  report.method = BandwidthMethod::NonparametricIVQR;
  if (!std::isfinite(report.h) || !(report.h > 0.0)) {
    throw ZeroDenominator("nonparametric bandwidth is not finite");
  }
  return report;
}

Matrix estimate_jacobian(const Dataset& data, const Vector& beta, double h, const MomentSet& set)
{
  // tau only enters the moment levels, not their derivatives
  return MomentModel(data, QuantileLevel(0.5), set).jacobian(beta, h);
}

} // namespace ivqr
