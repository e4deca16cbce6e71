#pragma once

#include "ivqravg/data_model.hpp"
#include "ivqravg/gmm.hpp"
#include "ivqravg/smoothing.hpp"

#include <cstdint>
#include <vector>

namespace ivqr {

//! Weights on (IVQR, 2SLS, QR).
struct WeightTriple
{
  double w1 = 1.0;
  double w2 = 0.0;
  double w3 = 0.0;
};

//! All (a/k, b/k, c/k) with a + b + c = k, ordered by (a, b) ascending.
std::vector<WeightTriple> simplex_weight_grid(int k);

//! The three component estimates on one sample.
struct ComponentEstimates
{
  Vector ivqr;
  Vector tsls;
  Vector qr;
};

//! IVQR (exactly identified projected-instrument estimate at the default
//! bandwidth), 2SLS and QR. Throws on any failure or non-finite estimate.
ComponentEstimates fit_components(const Dataset& data,
                                  QuantileLevel tau,
                                  const GmmConfig& cfg = {},
                                  const SmoothingRule& smoothing = {});

//! Row indices of resample b (attempt 0 is the first try, 1 the redraw).
std::vector<Index> bootstrap_indices(Index n, std::uint64_t seed, std::uint64_t b, std::uint64_t attempt);

//! sqrt((1/B) sum_b || w1 a_b + w2 t_b + w3 q_b - center ||^2) per grid point.
Vector grid_rmse(const std::vector<ComponentEstimates>& draws,
                 const Vector& center,
                 const std::vector<WeightTriple>& grid);

//! Index of the smallest RMSE; near-ties go to larger w1, then larger w3.
std::size_t select_weight(const std::vector<WeightTriple>& grid, const Vector& rmse);

struct BootstrapOptions
{
  SmoothingRule smoothing;
  std::size_t workers = 1;
};

struct BootstrapResult
{
  WeightTriple optimal_weight;
  std::size_t optimal_index = 0;
  Vector beta_bs;
  Vector grid_rmse;
  int draws_used = 0;
  int draws_skipped = 0;
  int redraws = 0;
  ComponentEstimates original;
};

BootstrapResult bootstrap_average(const Dataset& data,
                                  QuantileLevel tau,
                                  int draws,
                                  const std::vector<WeightTriple>& grid,
                                  std::uint64_t seed,
                                  const GmmConfig& cfg = {},
                                  const BootstrapOptions& options = {});

} // namespace ivqr
