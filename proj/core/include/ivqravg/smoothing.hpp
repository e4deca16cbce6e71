#pragma once

#include "ivqravg/data_model.hpp"

#include <limits>
#include <string>

namespace ivqr {

//! Smoothed replacement for the step function 1{v >= 0} on the scaled
//! residual v = (x'b - y) / h: the integrated biweight kernel.
//! 0 for v <= -1, 1 for v >= 1, 0.5 + (15/16)(v - 2v^3/3 + v^5/5) between.
double smoothed_indicator(double v);

//! Derivative of smoothed_indicator: the biweight kernel (15/16)(1 - u^2)^2
//! on (-1, 1), zero elsewhere.
double smoothing_kernel(double u);

//! Rule for the default estimation bandwidth max(floor, c * scale / sqrt(n)).
struct SmoothingRule
{
  double constant = 1.0;
  double floor = 1e-4;
};

double default_smoothing_bandwidth(std::size_t n,
                                   double residual_scale,
                                   const SmoothingRule& rule = {});
double default_smoothing_bandwidth(const Dataset& data,
                                   double residual_scale,
                                   const SmoothingRule& rule = {});

enum class BandwidthMethod
{
  PluginGaussianQR,
  PluginGaussianIVQR,
  NonparametricIVQR,
  Default
};

std::string to_string(BandwidthMethod method);

struct BandwidthReport
{
  double h = 0.0;
  double alpha_tau = std::numeric_limits<double>::quiet_NaN();
  double sigma_hat = std::numeric_limits<double>::quiet_NaN();
  BandwidthMethod method = BandwidthMethod::Default;
};

enum class PluginVariant
{
  QR,
  IVQR
};

//! sigma^-5 [1 - q^2]^2 phi(q) with q the standard normal tau-quantile.
double gaussian_alpha(QuantileLevel tau, double sigma_hat);

//! Gaussian plug-in bandwidth for kernel estimation of the quantile-moment
//! Jacobian, extended to a general error scale:
//!
//!   h = n^{-1/5} ( 4.5 sum_{j,k} mean(X_j^2 W_k^2)
//!                  / (alpha sum_{j,k} mean(X_j W_k)^2) )^{1/5}
//!
//! with W = instruments (W = X for the QR variant).
//! Throws ZeroDenominator when alpha or the cross-moment sum vanishes.
BandwidthReport gaussian_plugin_bandwidth(const Matrix& regressors,
                                      const Matrix& instruments,
                                      QuantileLevel tau,
                                      double sigma_hat,
                                      PluginVariant variant);

//! AMSE-optimal Jacobian bandwidth for designs whose regressors and
//! instruments take few distinct values (e.g. a binary treatment with a
//! binary instrument). The conditional density of the residual and its
//! second derivative at zero are estimated cell by cell with Gaussian
//! kernels on normal-reference bandwidths.
//! Throws InvalidArgument when the design is not discrete enough.
BandwidthReport nonparametric_ivqr_bandwidth(const Dataset& data, const Vector& residuals);

//! True when nonparametric_ivqr_bandwidth applies to this design.
bool is_discrete_design(const Dataset& data);

//! Analytic Jacobian (1/n) sum_i d g_i / d beta' of the moment stack at beta,
//! with bandwidth h for the smoothed-indicator rows. Rows of the linear
//! 2SLS slope block do not depend on h.
Matrix estimate_jacobian(const Dataset& data, const Vector& beta, double h, const MomentSet& set);

} // namespace ivqr
