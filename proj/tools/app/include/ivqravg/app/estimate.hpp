#pragma once

#include "ivqravg/data_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ivqr::app {

//! Method names accepted by the estimate command, in report order.
const std::vector<std::string>& estimate_method_names();

struct EstimateOptions
{
  std::filesystem::path data;
  double tau = 0.5;
  std::string outcome;
  std::vector<std::string> endog;
  std::vector<std::string> exog;
  std::vector<std::string> excl_instruments;
  bool intercept = true;
  std::vector<std::string> methods{"ivqr"};
  int bootstrap_draws = 50;
  int grid_steps = 164;
  std::uint64_t seed = 0;
  //! auto, plugin or nonparametric
  std::string jacobian_bandwidth = "auto";
};

//! Dataset with the declared column roles; adds an all-ones intercept first
//! unless disabled.
Dataset dataset_from_csv(const EstimateOptions& options);

//! Names of the columns of the regressor matrix, in order.
std::vector<std::string> coefficient_names(const EstimateOptions& options);

struct EstimateOutcome
{
  nlohmann::ordered_json report;
  //! Wall-clock seconds per method, for the console summary only.
  std::vector<std::pair<std::string, double>> timings;
};

//! Runs the requested methods. The report is a deterministic function of
//! the options and the data.
EstimateOutcome run_estimate(const EstimateOptions& options);

//! Human-readable summary of a report.
std::string format_summary(const EstimateOutcome& outcome);

} // namespace ivqr::app
