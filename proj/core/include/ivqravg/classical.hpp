#pragma once

#include "ivqravg/data_model.hpp"

namespace ivqr {

struct LinearFit
{
  Vector beta;
  Vector residuals; //!< y - X beta
  bool converged = true;
  int iterations = 0;
};

//! Check loss sum_i rho_tau(r_i) with rho_tau(u) = u (tau - 1{u <= 0}).
double check_loss(const Vector& residuals, double tau);

//! Linear quantile regression of y on X. IRLS with a vertex polish; falls
//! back to a smoothed root when IRLS does not settle.
//! Throws RankDeficiency when X does not have full column rank.
LinearFit qr_fit(const Matrix& x, const Vector& y, QuantileLevel tau);
LinearFit qr_fit(const Dataset& data, QuantileLevel tau);

//! Projection of the regressors onto the instrument space, Z (Z'Z)^-1 Z'X.
//! Throws RankDeficiency when Z or the projection loses rank.
Matrix project_onto_instruments(const Dataset& data);

//! Two-stage least squares, (Xh'Xh)^-1 Xh'y with Xh the projected regressors.
LinearFit tsls_fit(const Dataset& data);

} // namespace ivqr
