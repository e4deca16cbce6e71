#pragma once

#include "ivqravg/data_model.hpp"
#include "ivqravg/smoothing.hpp"

namespace ivqr {

struct GmmConfig
{
  int max_iterations = 200;
  //! Relative tolerance on objective decrease and parameter steps.
  double tolerance = 1e-10;
  //! Number of anchors used as starting points (1 to 3: initial MM, 2SLS, QR).
  int multistart_points = 3;
  //! Relative ridge added to the moment covariance when it is ill-conditioned.
  double weighting_ridge = 1e-10;

  void validate() const;
};

//! Default estimation bandwidth with the robust spread of the 2SLS residuals
//! as scale. Constant residuals fall back to the rule's floor.
double default_estimation_bandwidth(const Dataset& data, const SmoothingRule& rule = {});

//! Exactly identified smoothed estimate with the projected regressors
//! Xh = Z (Z'Z)^-1 Z'X as instruments:
//!   (1/n) sum_i Xh_i (I~((X_i'b - Y_i)/h) - tau) = 0,
//! started from two-stage least squares.
EstimatorResult initial_mm_estimate(const Dataset& data,
                                    QuantileLevel tau,
                                    double h,
                                    const GmmConfig& cfg = {});

//! Inverse of a moment covariance in square-root form: W = root' root.
struct GmmWeighting
{
  Matrix root;
  bool regularized = false;
};

//! Eigendecomposition-based inverse; adds ridge * trace / r to the spectrum
//! when the condition number exceeds 1e12.
GmmWeighting gmm_weighting(const Matrix& sigma, double ridge);

//! Starting points of the two-step solver. beta_check also fixes the
//! weighting matrix.
struct GmmAnchors
{
  Vector beta_check;
  Vector tsls;
  Vector qr;
};

GmmAnchors compute_anchors(const Dataset& data, QuantileLevel tau, double h, const GmmConfig& cfg = {});

//! Two-step GMM: minimizes M(b)' S^-1 M(b) with S the moment covariance of
//! the active stack at beta_check. Best of the multistart runs; near-ties go
//! to the solution closest to beta_check.
EstimatorResult two_step_gmm(const Dataset& data,
                             QuantileLevel tau,
                             const MomentSet& set,
                             const GmmConfig& cfg,
                             const GmmAnchors& anchors);
EstimatorResult two_step_gmm(const Dataset& data,
                             QuantileLevel tau,
                             const MomentSet& set,
                             const GmmConfig& cfg = {});

} // namespace ivqr
