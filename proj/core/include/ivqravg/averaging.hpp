#pragma once

#include "ivqravg/data_model.hpp"
#include "ivqravg/gmm.hpp"
#include "ivqravg/smoothing.hpp"

#include <optional>
#include <string>

namespace ivqr {

//! Extra moments stacked onto the conservative ones.
enum class AdditionalMoments
{
  QR,         //!< D_i (I~(.) - tau): exogeneity of the endogenous regressors
  TwoSLSSlope //!< demeaned instruments times the linear residual
};

std::string to_string(AdditionalMoments additional);

//! How the Jacobian bandwidth of the sandwich variances is chosen.
enum class JacobianBandwidthRule
{
  Plugin,       //!< Gaussian plug-in with regressors and instruments
  Nonparametric //!< cell-wise density estimates for discrete designs
};

std::string to_string(JacobianBandwidthRule rule);

struct EmpiricalWeight
{
  double value = 0.0; //!< clamped to [0, 1]
  double raw = 0.0;   //!< before clamping
  bool degenerate = false;
};

//! w = tr(U (S1 - S2)) / (n (b1 - b2)' U (b1 - b2) + tr(U (S1 - S2)))
//! with U = diag(upsilon). A zero denominator gives 0 and sets degenerate.
EmpiricalWeight empirical_weight(const Vector& beta1,
                                 const Vector& beta2,
                                 const Matrix& sigma1,
                                 const Matrix& sigma2,
                                 const Vector& upsilon,
                                 Index n);

struct AveragingOptions
{
  JacobianBandwidthRule jacobian_rule = JacobianBandwidthRule::Plugin;
  //! Replaces the empirical weight when set.
  std::optional<double> weight_override;
  //! Diagonal of the loss weighting; identity when empty.
  Vector upsilon;
  SmoothingRule smoothing;
  //! Estimation bandwidth h; the default rule when unset.
  std::optional<double> estimation_bandwidth;
};

//! Everything that depends only on the conservative moments. Shared by the
//! QR and 2SLS averaging variants.
struct ConservativeStage
{
  double estimation_bandwidth = 0.0;
  GmmAnchors anchors;
  EstimatorResult initial;
  EstimatorResult conservative;
  BandwidthReport jacobian_bandwidth;
  //! The requested Jacobian rule failed and the estimation bandwidth was used.
  bool jacobian_fallback = false;
  Matrix sigma1;
  bool sigma1_regularized = false;
};

ConservativeStage fit_conservative(const Dataset& data,
                                   QuantileLevel tau,
                                   const GmmConfig& cfg = {},
                                   const AveragingOptions& options = {});

struct AveragingResult
{
  Vector beta_conservative;
  Vector beta_aggressive;
  Matrix sigma1;
  Matrix sigma2;
  double weight = 0.0;
  double weight_raw = 0.0;
  bool weight_degenerate = false;
  Vector beta_avg;
  Vector upsilon;

  EstimatorResult conservative;
  EstimatorResult aggressive;
  double estimation_bandwidth = 0.0;
  BandwidthReport jacobian_bandwidth;
  bool jacobian_fallback = false;
  //! A ridge was needed in a weighting matrix or a sandwich inverse.
  bool regularized = false;
};

//! Sandwich variance (G' S^-1 G)^-1 with G and S of the given stack at beta.
Matrix sandwich_variance(const Dataset& data,
                         QuantileLevel tau,
                         const MomentSet& set,
                         const Vector& beta,
                         double jacobian_bandwidth,
                         double ridge,
                         bool* regularized = nullptr);

AveragingResult averaging_estimate(const Dataset& data,
                                   QuantileLevel tau,
                                   AdditionalMoments additional,
                                   const ConservativeStage& stage,
                                   const GmmConfig& cfg = {},
                                   const AveragingOptions& options = {});

AveragingResult averaging_estimate(const Dataset& data,
                                   QuantileLevel tau,
                                   AdditionalMoments additional,
                                   const GmmConfig& cfg = {},
                                   const AveragingOptions& options = {});

} // namespace ivqr
