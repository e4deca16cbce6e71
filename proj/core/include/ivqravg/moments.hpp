#pragma once

#include "ivqravg/data_model.hpp"

namespace ivqr {

struct MomentEvaluation
{
  Matrix rows; //!< n x r, g_i(beta, tau)
  Vector mean; //!< r, column mean of rows
};

//! Evaluates one moment stack on a fixed dataset.
//!
//! Layout of the r moment rows:
//!   Conservative    Z_i (I~((X_i'b - Y_i)/h) - tau)
//!   AggressiveQR    the above stacked over D_i (I~(.) - tau)
//!   Aggressive2SLS  the above stacked over (Z_{-1,i} - mean Z_{-1}) (Y_i - X_i'b)
//!
//! Holds a reference to the dataset; the dataset must outlive the model.
class MomentModel
{
public:
  MomentModel(const Dataset& data, QuantileLevel tau, MomentSet set);

  Index dimension() const noexcept { return indicator_instruments_.cols() + slope_instruments_.cols(); }
  Index indicator_rows() const noexcept { return indicator_instruments_.cols(); }
  const MomentSet& set() const noexcept { return set_; }
  const Dataset& data() const noexcept { return *data_; }

  Vector mean(const Vector& beta) const;
  MomentEvaluation evaluate(const Vector& beta) const;

  //! Jacobian with bandwidth h on the indicator rows.
  Matrix jacobian(const Vector& beta, double h) const;
  Matrix jacobian(const Vector& beta) const { return jacobian(beta, set_.bandwidth); }

private:
  const Dataset* data_;
  double tau_;
  MomentSet set_;
  Matrix indicator_instruments_; // n x (d_Z [+ d_D])
  Matrix slope_instruments_;     // n x q, demeaned non-intercept instruments
};

MomentEvaluation sample_moments(const Dataset& data,
                                const Vector& beta,
                                QuantileLevel tau,
                                const MomentSet& set);

//! (1/n) sum g_i g_i' - M M' from precomputed rows.
Matrix covariance_of_rows(const MomentEvaluation& eval);

//! Moment covariance evaluated at a preliminary estimate.
Matrix moment_covariance(const Dataset& data,
                         const Vector& beta_check,
                         QuantileLevel tau,
                         const MomentSet& set);

} // namespace ivqr
