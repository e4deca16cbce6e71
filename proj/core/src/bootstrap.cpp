#include "ivqravg/bootstrap.hpp"

#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"
#include "ivqravg/parallel.hpp"
#include "ivqravg/rng.hpp"

#include <cmath>
#include <optional>
#include <random>

namespace ivqr {

namespace {

constexpr std::uint64_t kBootstrapTag = 0x626f6f74ULL;

} // namespace

std::vector<WeightTriple> simplex_weight_grid(int k)
{
  if (k < 1) throw InvalidArgument("simplex grid needs k >= 1");
  std::vector<WeightTriple> grid;
  grid.reserve(static_cast<std::size_t>((k + 1) * (k + 2) / 2));
  const double kd = static_cast<double>(k);
  for (int a = 0; a <= k; ++a) {
    for (int b = 0; a + b <= k; ++b) {
      const int c = k - a - b;
      grid.push_back({a / kd, b / kd, c / kd});
    }
  }
  return grid;
}

ComponentEstimates fit_components(const Dataset& data,
                                  QuantileLevel tau,
                                  const GmmConfig& cfg,
                                  const SmoothingRule& smoothing)
{
  ComponentEstimates c;
  const double h = default_estimation_bandwidth(data, smoothing);
  c.ivqr = initial_mm_estimate(data, tau, h, cfg).beta;
  c.tsls = tsls_fit(data).beta;
  c.qr = qr_fit(data, tau).beta;
  if (!c.ivqr.allFinite() || !c.tsls.allFinite() || !c.qr.allFinite()) {
    throw SolverFailure("component estimate is not finite");
  }
  return c;
}

std::vector<Index> bootstrap_indices(Index n, std::uint64_t seed, std::uint64_t b, std::uint64_t attempt)
{
  if (n < 1) throw InvalidArgument("cannot resample an empty dataset");
  Engine engine = keyed_engine({kBootstrapTag, seed, b, attempt});
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = pick(engine);
  return rows;
}

Vector grid_rmse(const std::vector<ComponentEstimates>& draws,
                 const Vector& center,
                 const std::vector<WeightTriple>& grid)
{
  if (draws.empty()) throw InvalidArgument("grid RMSE needs at least one draw");
  // Mean squared error is a quadratic form in (w1, w2, w3): accumulate the
  // 3 x 3 Gram matrix of deviations once, in draw order.
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (const auto& d : draws) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> dev(center.size(), 3);
    dev.col(0) = d.ivqr - center;
    dev.col(1) = d.tsls - center;
    dev.col(2) = d.qr - center;
    gram += dev.transpose() * dev;
  }
  gram /= static_cast<double>(draws.size());
  Vector out(static_cast<Index>(grid.size()));
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const Eigen::Vector3d w(grid[s].w1, grid[s].w2, grid[s].w3);
    out(static_cast<Index>(s)) = std::sqrt(std::max(0.0, w.dot(gram * w)));
  }
  return out;
}

std::size_t select_weight(const std::vector<WeightTriple>& grid, const Vector& rmse)
{
  if (grid.empty() || rmse.size() != static_cast<Index>(grid.size())) {
    throw InvalidArgument("grid and RMSE vector must be nonempty and of equal size");
  }
  const double best = rmse.minCoeff();
  const double slack = 1e-10 * best + 1e-14;
  std::optional<std::size_t> pick;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (!(rmse(static_cast<Index>(s)) <= best + slack)) continue;
    if (!pick) {
      pick = s;
      continue;
    }
    const WeightTriple& cur = grid[*pick];
    const WeightTriple& cand = grid[s];
    if (cand.w1 > cur.w1 || (cand.w1 == cur.w1 && cand.w3 > cur.w3)) pick = s;
  }
  return *pick;
}

BootstrapResult bootstrap_average(const Dataset& data,
                                  QuantileLevel tau,
                                  int draws,
                                  const std::vector<WeightTriple>& grid,
                                  std::uint64_t seed,
                                  const GmmConfig& cfg,
                                  const BootstrapOptions& options)
{
  if (draws < 1) throw InvalidArgument("bootstrap needs at least one draw");
  if (grid.empty()) throw InvalidArgument("bootstrap weight grid is empty");

  BootstrapResult out;
  out.original = fit_components(data, tau, cfg, options.smoothing);

  const auto count = static_cast<std::size_t>(draws);
  std::vector<std::optional<ComponentEstimates>> fits(count);
  std::vector<int> attempts(count, 0);
  parallel_for(count, options.workers, [&](std::size_t b) {
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      attempts[b] = static_cast<int>(attempt) + 1;
      try {
        const auto rows = bootstrap_indices(data.n(), seed, b, attempt);
        const Dataset resample = data.select_rows(rows);
        fits[b] = fit_components(resample, tau, cfg, options.smoothing);
        return;
      } catch (const Error&) {
      }
    }
  });

  std::vector<ComponentEstimates> used;
  used.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    if (attempts[b] > 1) ++out.redraws;
    if (fits[b]) {
      used.push_back(std::move(*fits[b]));
    } else {
      ++out.draws_skipped;
    }
  }
  if (static_cast<double>(out.draws_skipped) > 0.1 * static_cast<double>(draws)) {
    throw SolverFailure("more than 10% of bootstrap draws failed (" + std::to_string(out.draws_skipped) +
                        " of " + std::to_string(draws) + ")");
  }
  out.draws_used = static_cast<int>(used.size());
  if (used.empty()) throw SolverFailure("no bootstrap draw succeeded");

  out.grid_rmse = grid_rmse(used, out.original.ivqr, grid);
  out.optimal_index = select_weight(grid, out.grid_rmse);
  out.optimal_weight = grid[out.optimal_index];
  const WeightTriple& w = out.optimal_weight;
  out.beta_bs = w.w1 * out.original.ivqr + w.w2 * out.original.tsls + w.w3 * out.original.qr;
  return out;
}

} // namespace ivqr
