#pragma once

// Internal numerical optimizers shared by the GMM and quantile solvers.

#include "ivqravg/data_model.hpp"

#include <functional>

namespace ivqr::detail {

//! f(x) -> residual vector F; optional Jacobian dF/dx'.
using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;
using ScalarFn = std::function<double(const Vector&)>;

struct LmOptions
{
  int max_iterations = 200;
  double relative_tolerance = 1e-10; // on objective decrease and step size
  double absolute_objective = 0.0;   // stop once ||F||^2 <= this
};

struct OptimResult
{
  Vector x;
  double objective = 0.0; // ||F||^2 for LM, f(x) for Nelder-Mead
  int iterations = 0;
  bool converged = false;
};

//! Levenberg-Marquardt on 0.5 ||F(x)||^2. Steps are accepted only when they
//! reduce the objective, so the objective is nonincreasing.
OptimResult levenberg_marquardt(const ResidualFn& residual,
                                const JacobianFn& jacobian,
                                const Vector& start,
                                const LmOptions& options);

struct NelderMeadOptions
{
  int max_evaluations = 2000;
  double f_tolerance = 1e-12; // relative spread of simplex values
  double x_tolerance = 1e-9;  // relative simplex diameter
};

//! Nelder-Mead simplex minimization starting from x0 with per-coordinate
//! initial steps. The best vertex value is nonincreasing.
OptimResult nelder_mead(const ScalarFn& f,
                        const Vector& start,
                        const Vector& steps,
                        const NelderMeadOptions& options);

//! Root of the exactly identified smoothed quantile equations
//!   (1/n) W'(I~((X b - y)/h) - tau) = 0,
//! with W an n x d instrument matrix for the d regressors in X. Uses
//! Levenberg-Marquardt with the analytic Jacobian and a bandwidth
//! continuation that starts at continuation_h (when larger than h) and halves
//! down to h.
struct SmoothedRootResult
{
  Vector beta;
  double max_abs_equation = 0.0;
  int iterations = 0;
  bool converged = false;
};

SmoothedRootResult solve_smoothed_equations(const Matrix& regressors,
                                            const Matrix& instruments,
                                            const Vector& y,
                                            double tau,
                                            double h,
                                            const Vector& start,
                                            double continuation_h,
                                            int max_iterations,
                                            double tolerance);

} // namespace ivqr::detail
