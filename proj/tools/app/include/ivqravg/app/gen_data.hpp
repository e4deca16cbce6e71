#pragma once

#include "ivqravg/app/csv.hpp"
#include "ivqravg/dgp.hpp"

#include <cstdint>
#include <string>

namespace ivqr::app {

struct GenDataOptions
{
  int model = 2; //!< 1, 2 or 3
  Index n = 1000;
  double tau = 0.5;
  std::uint64_t seed = 0;
  Model1Params m1;
  Model2Params m2;
  Model3Params m3;
};

//! Draws one sample with the stream of replication 0 of DGP 0.
SimulatedData generate_dataset(const GenDataOptions& options);

//! Columns y, d1.., x1.. (nonconstant exogenous regressors) and z1..
//! (excluded instruments). The intercept is left out.
CsvTable dataset_table(const Dataset& data);

} // namespace ivqr::app
