#pragma once

// Independent reference computations used to check the library.

#include "ivqravg/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace ivqr::testing {

//! Composite Simpson integral of (15/16)(1 - u^2)^2 from -1 to v.
inline double integrated_kernel(double v, int panels = 2000)
{
  if (v <= -1.0) return 0.0;
  if (v >= 1.0) return 1.0;
  auto k = [](double u) { return 15.0 / 16.0 * (1.0 - u * u) * (1.0 - u * u); };
  const double a = -1.0;
  const double step = (v - a) / panels;
  double s = k(a) + k(v);
  for (int i = 1; i < panels; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * k(a + i * step);
  return s * step / 3.0;
}

//! 2SLS from the textbook normal equations with explicit inverses.
inline Vector tsls_normal_equations(const Matrix& x, const Matrix& z, const Vector& y)
{
  const Matrix zz_inv = (z.transpose() * z).inverse();
  const Matrix a = x.transpose() * z * zz_inv * z.transpose() * x;
  const Vector b = x.transpose() * z * zz_inv * z.transpose() * y;
  return a.inverse() * b;
}

inline double check_loss_oracle(const Vector& r, double tau)
{
  double s = 0.0;
  for (Index i = 0; i < r.size(); ++i) s += r(i) * (tau - (r(i) <= 0.0 ? 1.0 : 0.0));
  return s;
}

//! Minimum check loss over every basic solution (d interpolated rows).
//! Some minimizer of the linear program is always basic.
inline double brute_force_qr_loss(const Matrix& x, const Vector& y, double tau, Vector* argmin = nullptr)
{
  const Index n = x.rows();
  const Index d = x.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(n), 0);
  std::fill(pick.end() - d, pick.end(), 1);
  do {
    Matrix xb(d, d);
    Vector yb(d);
    Index k = 0;
    for (Index i = 0; i < n; ++i) {
      if (pick[static_cast<std::size_t>(i)] == 0) continue;
      xb.row(k) = x.row(i);
      yb(k) = y(i);
      ++k;
    }
    Eigen::FullPivLU<Matrix> lu(xb);
    if (!lu.isInvertible()) continue;
    const Vector b = lu.solve(yb);
    const double loss = check_loss_oracle(y - x * b, tau);
    if (loss < best) {
      best = loss;
      if (argmin != nullptr) *argmin = b;
    }
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

//! Central finite differences of a vector function.
inline Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double step)
{
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (Index c = 0; c < x.size(); ++c) {
    Vector up = x;
    Vector down = x;
    up(c) += step;
    down(c) -= step;
    j.col(c) = (f(up) - f(down)) / (2.0 * step);
  }
  return j;
}

//! Type-7 sample quantile written out directly.
inline double quantile_type7(std::vector<double> v, double p)
{
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

//! Robust RMSE from its definition, coefficient by coefficient.
inline double rrmse_oracle(const Matrix& est, const Vector& truth)
{
  double total = 0.0;
  for (Index j = 0; j < est.cols(); ++j) {
    std::vector<double> c(est.col(j).data(), est.col(j).data() + est.rows());
    const double bias = quantile_type7(c, 0.5) - truth(j);
    const double spread = (quantile_type7(c, 0.75) - quantile_type7(c, 0.25)) / 1.349;
    total += bias * bias + spread * spread;
  }
  return std::sqrt(total);
}

//! The sigma = 1 Gaussian plug-in bandwidth for the QR Jacobian, written
//! from the closed form with a double loop over coefficient pairs.
inline double plugin_sigma1_bandwidth(const Matrix& x, double tau_quantile_z)
{
  const double n = static_cast<double>(x.rows());
  const double phi = std::exp(-0.5 * tau_quantile_z * tau_quantile_z) / std::sqrt(2.0 * M_PI);
  const double alpha = (1.0 - tau_quantile_z * tau_quantile_z) * (1.0 - tau_quantile_z * tau_quantile_z) * phi;
  double num = 0.0;
  double den = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index k = 0; k < x.cols(); ++k) {
      double m2 = 0.0;
      double m1 = 0.0;
      for (Index i = 0; i < x.rows(); ++i) {
        m2 += x(i, j) * x(i, j) * x(i, k) * x(i, k);
        m1 += x(i, j) * x(i, k);
      }
      m2 /= n;
      m1 /= n;
      num += m2;
      den += m1 * m1;
    }
  }
  return std::pow(n, -0.2) * std::pow(4.5 * num / (alpha * den), 0.2);
}

// Smoothed intercept-only IVQR on the two values {a, b}. Distinct values put
// the lower one at the kernel center with the other outside the support; a
// repeated value leaves only the bandwidth floor, so the root sits at
// a + floor * v with integrated_kernel(v) = tau.
inline double two_point_ivqr(double a, double b, double tau, double floor)
{
  if (a != b) return std::min(a, b);
  double lo = -1.0;
  double hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (integrated_kernel(mid) < tau ? lo : hi) = mid;
  }
  return a + floor * 0.5 * (lo + hi);
}

} // namespace ivqr::testing
