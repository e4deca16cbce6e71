#include "optimize.hpp"

#include "ivqravg/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ivqr::detail {

OptimResult levenberg_marquardt(const ResidualFn& residual,
                                const JacobianFn& jacobian,
                                const Vector& start,
                                const LmOptions& options)
{
  OptimResult out;
  out.x = start;
  Vector f = residual(out.x);
  out.objective = f.squaredNorm();
  if (!std::isfinite(out.objective)) {
    return out;
  }
  if (out.objective <= options.absolute_objective) {
    out.converged = true;
    return out;
  }

  double lambda = -1.0;
  const Index d = start.size();
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Matrix j = jacobian(out.x);
    const Vector g = j.transpose() * f;
    const Matrix a = j.transpose() * j;
    Vector diag = a.diagonal().cwiseMax(1e-12 * std::max(1.0, a.diagonal().maxCoeff()));
    if (lambda < 0.0) {
      lambda = 1e-3 * diag.maxCoeff();
    }
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      out.converged = true;
      return out;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Matrix damped = a;
      damped.diagonal() += lambda * diag;
      const Eigen::LDLT<Matrix> ldlt(damped);
      Vector step = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Vector candidate = out.x + step;
      const Vector f_new = residual(candidate);
      const double obj_new = f_new.squaredNorm();
      if (std::isfinite(obj_new) && obj_new < out.objective) {
        const double decrease = out.objective - obj_new;
        const double prev = out.objective;
        out.x = candidate;
        f = f_new;
        out.objective = obj_new;
        lambda = std::max(lambda / 3.0, 1e-15 * diag.maxCoeff());
        accepted = true;
        if (obj_new <= options.absolute_objective) {
          out.converged = true;
          return out;
        }
        if (decrease <= options.relative_tolerance * prev &&
            step.norm() <= std::sqrt(options.relative_tolerance) * (1.0 + out.x.norm())) {
          out.converged = true;
          return out;
        }
        break;
      }
      lambda *= 4.0;
      if (step.norm() <= 1e-15 * (1.0 + out.x.norm())) {
        break;
      }
    }
    if (!accepted) {
      // No descent step even with heavy damping: local stationary point.
      out.converged = true;
      return out;
    }
  }
  (void)d;
  return out;
}

OptimResult nelder_mead(const ScalarFn& f,
                        const Vector& start,
                        const Vector& steps,
                        const NelderMeadOptions& options)
{
  const Index d = start.size();
  const auto m = static_cast<std::size_t>(d + 1);
  std::vector<Vector> simplex(m, start);
  std::vector<double> values(m);
  for (Index j = 0; j < d; ++j) {
    simplex[static_cast<std::size_t>(j + 1)](j) += steps(j);
  }
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < m; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(m);
  OptimResult out;
  int iterations = 0;
  while (evals < options.max_evaluations) {
    ++iterations;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[m - 2];

    double diameter = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      diameter = std::max(diameter, (simplex[i] - simplex[best]).lpNorm<Eigen::Infinity>());
    }
    const double spread = values[worst] - values[best];
    if (spread <= options.f_tolerance * (std::abs(values[best]) + 1e-300) &&
        diameter <= options.x_tolerance * (1.0 + simplex[best].lpNorm<Eigen::Infinity>())) {
      out.converged = true;
      break;
    }
    if (diameter <= 1e-14 * (1.0 + simplex[best].lpNorm<Eigen::Infinity>())) {
      out.converged = true;
      break;
    }

    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i < m; ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(d);

    const Vector reflected = centroid + (centroid - simplex[worst]);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Vector expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Vector contracted = outside ? Vector(centroid + 0.5 * (reflected - centroid))
                                      : Vector(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  out.x = simplex[best];
  out.objective = values[best];
  out.iterations = iterations;
  return out;
}

SmoothedRootResult solve_smoothed_equations(const Matrix& regressors,
                                            const Matrix& instruments,
                                            const Vector& y,
                                            double tau,
                                            double h,
                                            const Vector& start,
                                            double continuation_h,
                                            int max_iterations,
                                            double tolerance)
{
  const double inv_n = 1.0 / static_cast<double>(regressors.rows());
  double bandwidth = std::max(h, continuation_h);
  SmoothedRootResult out;
  out.beta = start;

  auto equations = [&](const Vector& b, double bw) {
    const Vector e = regressors * b - y;
    Vector s(e.size());
    for (Index i = 0; i < e.size(); ++i) s(i) = smoothed_indicator(e(i) / bw) - tau;
    return Vector(instruments.transpose() * s * inv_n);
  };
  auto jacobian = [&](const Vector& b, double bw) {
    const Vector e = regressors * b - y;
    Vector k(e.size());
    for (Index i = 0; i < e.size(); ++i) k(i) = smoothing_kernel(e(i) / bw) / bw;
    return Matrix(instruments.transpose() * k.asDiagonal() * regressors * inv_n);
  };

  // Widen until the start leaves the flat region of every indicator.
  for (int k = 0; k < 60; ++k) {
    Eigen::FullPivLU<Matrix> lu(jacobian(out.beta, bandwidth));
    if (lu.rank() == regressors.cols()) break;
    bandwidth *= 2.0;
  }

  const double target = tolerance * tolerance;
  while (true) {
    const double bw = bandwidth;
    LmOptions lm;
    lm.max_iterations = max_iterations;
    lm.relative_tolerance = 1e-14;
    lm.absolute_objective = bw > h ? 1e-3 * target : target * 1e-2;
    const OptimResult r = levenberg_marquardt(
      [&](const Vector& b) { return equations(b, bw); },
      [&](const Vector& b) { return jacobian(b, bw); },
      out.beta, lm);
    out.iterations += r.iterations;
    if (r.x.allFinite()) out.beta = r.x;
    if (bandwidth <= h) break;
    bandwidth = std::max(h, 0.5 * bandwidth);
  }
  out.max_abs_equation = equations(out.beta, h).lpNorm<Eigen::Infinity>();
  out.converged = out.max_abs_equation <= tolerance;
  return out;
}

} // namespace ivqr::detail
