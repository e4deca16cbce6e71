#include "ivqravg/classical.hpp"

#include "ivqravg/errors.hpp"
#include "ivqravg/metrics.hpp"
#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ivqr {

namespace {

constexpr int kIrlsIterations = 200;
constexpr double kIrlsRidge = 1e-8;
constexpr int kWarmStartIterations = 30;

void require_full_rank(const Matrix& m, const char* what)
{
  if (m.rows() < m.cols()) {
    throw RankDeficiency(std::string(what) + " has fewer rows than columns");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  if (qr.rank() < m.cols()) {
    throw RankDeficiency(std::string(what) + " is rank deficient (rank " + std::to_string(qr.rank()) +
                         " < " + std::to_string(m.cols()) + ")");
  }
}

double spread_of(const Vector& v)
{
  std::vector<double> s(v.data(), v.data() + v.size());
  double scale = s.size() >= 2 ? robust_scale(s) : 0.0;
  if (!(scale > 0.0)) scale = v.cwiseAbs().maxCoeff();
  return scale > 0.0 ? scale : 1.0;
}

// Basis of d observations with the smallest |r| that keeps X_B nonsingular.
bool initial_basis(const Matrix& x, const Vector& r, std::vector<Index>& basis)
{
  const Index n = x.rows();
  const Index d = x.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(r(a)) < std::abs(r(b)); });
  basis.clear();
  Matrix rows(d, d);
  for (Index k = 0; k < n && static_cast<Index>(basis.size()) < d; ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    const auto filled = static_cast<Index>(basis.size());
    rows.row(filled) = x.row(i);
    Eigen::FullPivLU<Matrix> lu(rows.topRows(filled + 1));
    lu.setThreshold(1e-10);
    if (lu.rank() == filled + 1) basis.push_back(i);
  }
  return static_cast<Index>(basis.size()) == d;
}

// Exact minimization of the check loss by simplex edge descent: from a
// vertex (d interpolated observations) move along the edge that frees the
// most violating basis point, with an exact weighted-median line search.
bool simplex_refine(const Matrix& x, const Vector& y, double tau, Vector& beta, double& loss, int& steps)
{
  const Index n = x.rows();
  const Index d = x.cols();
  std::vector<Index> basis;
  if (!initial_basis(x, y - x * beta, basis)) return false;

  Matrix xb(d, d);
  Vector yb(d);
  auto solve_basis = [&](Vector& out) {
    for (Index k = 0; k < d; ++k) {
      xb.row(k) = x.row(basis[static_cast<std::size_t>(k)]);
      yb(k) = y(basis[static_cast<std::size_t>(k)]);
    }
    Eigen::PartialPivLU<Matrix> lu(xb);
    out = lu.solve(yb);
    return lu;
  };

  Vector current;
  auto lu = solve_basis(current);
  if (!current.allFinite()) return false;
  double current_loss = check_loss(y - x * current, tau);

  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<double, Index>> breaks;
  std::vector<std::pair<double, Index>> candidates;
  // Residuals this small are ties at zero (e.g. duplicated rows).
  const double zero = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());
  const int max_steps = static_cast<int>(10 * n + 100);
  for (steps = 0; steps < max_steps; ++steps) {
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (Index b : basis) in_basis[static_cast<std::size_t>(b)] = 1;
    Vector r = y - x * current;
    for (Index i = 0; i < n; ++i) {
      if (std::abs(r(i)) <= zero) r(i) = 0.0;
    }

    // Subgradient multipliers of the basis points.
    Vector g = Vector::Zero(d);
    for (Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      g += x.row(i).transpose() * (r(i) > 0.0 ? tau : tau - 1.0);
    }
    const Vector lambda = -xb.transpose().partialPivLu().solve(g);
    candidates.clear();
    for (Index k = 0; k < d; ++k) {
      if (lambda(k) - tau > 1e-12) candidates.emplace_back(-(lambda(k) - tau), -(k + 1));
      else if ((tau - 1.0) - lambda(k) > 1e-12) candidates.emplace_back(-((tau - 1.0) - lambda(k)), k + 1);
    }
    if (candidates.empty()) break; // optimal vertex
    std::sort(candidates.begin(), candidates.end());

    // First violating edge with a strict descent direction.
    Index leave = -1;
    Index enter = -1;
    for (const auto& cand : candidates) {
      const Index k = std::abs(cand.second) - 1;
      Vector unit = Vector::Zero(d);
      unit(k) = cand.second < 0 ? -1.0 : 1.0;
      const Vector a = x * lu.solve(unit);

      double slope = 0.0;
      breaks.clear();
      for (Index i = 0; i < n; ++i) {
        if (a(i) == 0.0) continue;
        const bool positive = r(i) > 0.0 || (r(i) == 0.0 && a(i) < 0.0);
        slope -= a(i) * (positive ? tau : tau - 1.0);
        if (r(i) != 0.0 && r(i) / a(i) > 0.0) breaks.emplace_back(r(i) / a(i), i);
      }
      if (slope >= -1e-12) continue;
      std::sort(breaks.begin(), breaks.end());
      for (const auto& br : breaks) {
        slope += std::abs(a(br.second));
        if (slope >= 0.0) {
          enter = br.second;
          break;
        }
      }
      if (enter >= 0) {
        leave = k;
        break;
      }
    }
    if (leave < 0) break;

    const std::vector<Index> previous = basis;
    basis[static_cast<std::size_t>(leave)] = enter;
    Vector next;
    auto next_lu = solve_basis(next);
    const double next_loss = next.allFinite() ? check_loss(y - x * next, tau) : current_loss;
    if (!next.allFinite() || !(next_loss <= current_loss + 1e-12 * (1.0 + current_loss))) {
      basis = previous;
      lu = solve_basis(current);
      break;
    }
    current = next;
    current_loss = next_loss;
    lu = next_lu;
  }
  if (current_loss <= loss) {
    beta = current;
    loss = current_loss;
  }
  return true;
}

} // namespace

double check_loss(const Vector& residuals, double tau)
{
  double total = 0.0;
  for (Index i = 0; i < residuals.size(); ++i) {
    const double u = residuals(i);
    total += u > 0.0 ? tau * u : (tau - 1.0) * u;
  }
  return total;
}

LinearFit qr_fit(const Matrix& x, const Vector& y, QuantileLevel tau_level)
{
  if (x.rows() != y.size()) {
    throw InvalidArgument("quantile regression: X and y have different lengths");
  }
  require_full_rank(x, "regressor matrix");
  const double tau = tau_level.value();
  const Index d = x.cols();

  LinearFit fit;
  Vector beta = x.colPivHouseholderQr().solve(y);
  const double scale = spread_of(y - x * beta);
  const double floor = 1e-10 * scale;

  Vector best = beta;
  double best_loss = check_loss(y - x * beta, tau);
  bool settled = false;
  bool refined = false;
  Vector w(y.size());
  for (int it = 0; it < kIrlsIterations; ++it) {
    fit.iterations = it + 1;
    const Vector r = y - x * beta;
    for (Index i = 0; i < r.size(); ++i) {
      w(i) = (r(i) > 0.0 ? tau : 1.0 - tau) / std::max(std::abs(r(i)), floor);
    }
    Matrix a = x.transpose() * w.asDiagonal() * x;
    a.diagonal().array() += kIrlsRidge * a.trace() / static_cast<double>(d);
    const Vector next = a.ldlt().solve(x.transpose() * w.asDiagonal() * y);
    if (!next.allFinite()) break;
    const double step = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    const double loss = check_loss(y - x * beta, tau);
    if (loss < best_loss) {
      best_loss = loss;
      best = beta;
    }
    if (step <= 1e-10 * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
      settled = true;
      break;
    }
    if (it + 1 == kWarmStartIterations) {
      int steps = 0;
      refined = simplex_refine(x, y, tau, best, best_loss, steps);
      fit.iterations += steps;
      if (refined) break;
    }
  }

  if (!settled && !refined) {
    const auto root =
      detail::solve_smoothed_equations(x, x, y, tau, 1e-3 * scale, best, scale, kIrlsIterations, 1e-10);
    if (root.beta.allFinite()) {
      const double root_loss = check_loss(y - x * root.beta, tau);
      if (root_loss < best_loss) {
        best_loss = root_loss;
        best = root.beta;
      }
    }
  }
  if (!refined) {
    int steps = 0;
    refined = simplex_refine(x, y, tau, best, best_loss, steps);
  }

  fit.beta = best;
  fit.residuals = y - x * best;
  fit.converged = refined || settled;
  return fit;
}

LinearFit qr_fit(const Dataset& data, QuantileLevel tau)
{
  return qr_fit(data.regressors(), data.y(), tau);
}

Matrix project_onto_instruments(const Dataset& data)
{
  const Matrix& z = data.instruments();
  const Matrix& x = data.regressors();
  Eigen::ColPivHouseholderQR<Matrix> qr(z);
  qr.setThreshold(1e-10);
  if (qr.rank() < z.cols()) {
    throw RankDeficiency("instrument cross-product Z'Z is singular");
  }
  // Z (Z'Z)^-1 Z'X = Z * (least-squares coefficients of X on Z)
  const Matrix coef = qr.solve(x);
  Matrix projected = z * coef;
  Eigen::ColPivHouseholderQR<Matrix> check(projected);
  check.setThreshold(1e-10);
  if (check.rank() < x.cols()) {
    throw RankDeficiency("projected regressors are rank deficient (Z'X lacks full column rank)");
  }
  return projected;
}

LinearFit tsls_fit(const Dataset& data)
{
  const Matrix xhat = project_onto_instruments(data);
  const Matrix gram = xhat.transpose() * xhat;
  LinearFit fit;
  fit.beta = gram.ldlt().solve(xhat.transpose() * data.y());
  if (!fit.beta.allFinite()) {
    throw RankDeficiency("two-stage least squares normal equations are singular");
  }
  fit.residuals = data.y() - data.regressors() * fit.beta;
  return fit;
}

} // namespace ivqr
