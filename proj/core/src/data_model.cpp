#include "ivqravg/data_model.hpp"

#include "ivqravg/errors.hpp"

#include <cmath>

namespace ivqr {

QuantileLevel::QuantileLevel(double tau)
  : tau_(tau)
{
  if (!(tau > 0.0 && tau < 1.0)) {
    throw InvalidArgument("quantile level must lie strictly between 0 and 1, got " +
                          std::to_string(tau));
  }
}

namespace {

void check_rows(const Matrix& m, Index n, const char* name)
{
  if (m.rows() != n) {
    throw InvalidArgument(std::string(name) + " has " + std::to_string(m.rows()) +
                          " rows, expected " + std::to_string(n));
  }
  if (!m.allFinite()) {
    throw InvalidArgument(std::string(name) + " contains non-finite entries");
  }
}

} // namespace

Dataset::Dataset(Vector y, Matrix x_exog, Matrix d_endog, Matrix z_excl)
  : y_(std::move(y))
  , x_exog_(std::move(x_exog))
  , d_endog_(std::move(d_endog))
  , z_excl_(std::move(z_excl))
{
  const Index n = y_.size();
  if (!y_.allFinite()) {
    throw InvalidArgument("outcome contains non-finite entries");
  }
  // Eigen reports 0 rows for a default-constructed block; normalize to n x 0.
  if (x_exog_.size() == 0) x_exog_.resize(n, 0);
  if (d_endog_.size() == 0) d_endog_.resize(n, 0);
  if (z_excl_.size() == 0) z_excl_.resize(n, 0);
  check_rows(x_exog_, n, "exogenous regressors");
  check_rows(d_endog_, n, "endogenous regressors");
  check_rows(z_excl_, n, "excluded instruments");

  const Index dx = x_exog_.cols() + d_endog_.cols();
  const Index dz = x_exog_.cols() + z_excl_.cols();
  if (dx == 0) {
    throw InvalidArgument("dataset has no regressors");
  }
  if (n < dx + 1) {
    throw InvalidArgument("need at least d_X + 1 = " + std::to_string(dx + 1) +
                          " observations, got " + std::to_string(n));
  }
  if (dz < dx) {
    throw InvalidArgument("order condition fails: " + std::to_string(dz) +
                          " instruments for " + std::to_string(dx) + " regressors");
  }

  x_.resize(n, dx);
  x_ << x_exog_, d_endog_;
  z_.resize(n, dz);
  z_ << x_exog_, z_excl_;
  has_intercept_ = x_exog_.cols() > 0 && (x_exog_.col(0).array() == 1.0).all();
}

Matrix Dataset::nonconstant_instruments() const
{
  if (has_intercept_) {
    return z_.rightCols(z_.cols() - 1);
  }
  return z_;
}

Dataset Dataset::select_rows(std::span<const Index> rows) const
{
  const auto m = static_cast<Index>(rows.size());
  Vector y(m);
  Matrix xe(m, x_exog_.cols()), d(m, d_endog_.cols()), z(m, z_excl_.cols());
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= n()) {
      throw InvalidArgument("row index out of range");
    }
    y(i) = y_(r);
    xe.row(i) = x_exog_.row(r);
    d.row(i) = d_endog_.row(r);
    z.row(i) = z_excl_.row(r);
  }
  return Dataset(std::move(y), std::move(xe), std::move(d), std::move(z));
}

std::string to_string(MomentKind kind)
{
  switch (kind) {
    case MomentKind::Conservative:
      return "conservative";
    case MomentKind::AggressiveQR:
      return "aggressive-qr";
    case MomentKind::Aggressive2SLS:
      return "aggressive-2sls";
  }
  return "unknown";
}

MomentSet::MomentSet(MomentKind k, double h)
  : kind(k)
  , bandwidth(h)
{
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidArgument("smoothing bandwidth must be positive and finite");
  }
}

Index MomentSet::dimension(const Dataset& data) const
{
  switch (kind) {
    case MomentKind::Conservative:
      return data.d_z();
    case MomentKind::AggressiveQR:
      return data.d_z() + data.d_endog();
    case MomentKind::Aggressive2SLS:
      return data.d_z() + data.d_nonconstant_instruments();
  }
  return data.d_z();
}

} // namespace ivqr
