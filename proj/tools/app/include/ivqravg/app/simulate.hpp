#pragma once

#include "ivqravg/dgp.hpp"
#include "ivqravg/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ivqr::app {

enum class SimulationModel
{
  M1,
  M2,
  M3
};

std::string to_string(SimulationModel model);

//! Estimator column names, in table order.
const std::vector<std::string>& simulation_estimator_names();

//! One row of a simulation table.
struct DgpSpec
{
  std::string id;
  Model1Params m1;
  Model2Params m2;
  Model3Params m3;
};

struct SimulationConfig
{
  SimulationModel model = SimulationModel::M2;
  std::vector<DgpSpec> dgps;
  Index n = 1000;
  int replications = 200;
  int bootstrap_draws = 50;
  std::vector<double> taus{0.5};
  std::vector<std::string> estimators = simulation_estimator_names();
  std::uint64_t seed = 0;
  int grid_steps = 164;
  std::string output_dir = "results";
  //! auto (nonparametric for model 1, plug-in otherwise), plugin, nonparametric
  std::string jacobian_bandwidth = "auto";
  //! Models 2 and 3: estimate an intercept.
  bool intercept = true;

  //! Missing fields take the defaults of the chosen model (n = 1000,
  //! M = 400 for model 1 and 200 otherwise, B = 50, k = 164, its DGP grid).
  static SimulationConfig from_json(const nlohmann::json& doc);
  nlohmann::ordered_json to_json() const;
  void validate() const;
  //! Column names and values describing a DGP row.
  std::vector<std::pair<std::string, std::string>> describe(const DgpSpec& dgp) const;
};

//! Default DGP rows of a model.
std::vector<DgpSpec> default_dgp_grid(SimulationModel model);

struct CellDiagnostics
{
  int replications_effective = 0;
  int dropped = 0;
  std::vector<std::string> drop_reasons;
  double mean_estimation_bandwidth = 0.0;
  double mean_jacobian_bandwidth = 0.0;
  int jacobian_fallbacks = 0;
  int regularized = 0;
  int nonconverged = 0;
  double mean_weight_qr = 0.0;
  double mean_weight_2sls = 0.0;
  double mean_raw_weight_qr = 0.0;
  double mean_raw_weight_2sls = 0.0;
  double mean_bs_w1 = 0.0;
  double mean_bs_w2 = 0.0;
  double mean_bs_w3 = 0.0;
  int bootstrap_skipped = 0;
};

struct TauResult
{
  double tau = 0.5;
  MetricsTable table;
  std::vector<CellDiagnostics> diagnostics;  //!< per DGP row
  std::vector<EstimatorEstimates> estimates; //!< per DGP row, scored coefficients only
  std::vector<Vector> truths;                //!< per DGP row
};

struct SimulationResult
{
  SimulationConfig config;
  std::vector<TauResult> per_tau;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

//! Runs every (DGP, tau, replication) cell on `workers` threads. Output is
//! independent of the worker count. Throws SolverFailure when more than 5%
//! of the replications of a cell fail.
SimulationResult run_simulation(const SimulationConfig& config, std::size_t workers, const ProgressFn& progress = {});

//! Writes table_tau_<tau>.csv per quantile, results.json and plotdata.csv.
void write_outputs(const SimulationResult& result, const std::filesystem::path& dir);

} // namespace ivqr::app
