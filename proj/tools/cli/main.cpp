#include "ivqravg/app/csv.hpp"
#include "ivqravg/app/estimate.hpp"
#include "ivqravg/app/gen_data.hpp"
#include "ivqravg/app/simulate.hpp"
#include "ivqravg/errors.hpp"
#include "ivqravg/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

int run_estimate_command(const ivqr::app::EstimateOptions& options, const std::string& out)
{
  const auto outcome = ivqr::app::run_estimate(options);
  if (out.empty() || out == "-") {
    std::cout << outcome.report.dump(2) << "\n";
  } else {
    std::ofstream file(out);
    if (!file) throw ivqr::InvalidArgument("cannot write '" + out + "'");
    file << outcome.report.dump(2) << "\n";
    std::cerr << ivqr::app::format_summary(outcome);
  }
  return 0;
}

int run_simulate_command(const std::string& config_path,
                         std::uint64_t seed,
                         const std::string& out,
                         std::size_t workers,
                         bool quiet)
{
  std::ifstream in(config_path);
  if (!in) throw ivqr::InvalidArgument("cannot open config '" + config_path + "'");
  const nlohmann::json doc = nlohmann::json::parse(in);
  auto config = ivqr::app::SimulationConfig::from_json(doc);
  config.seed = seed;
  if (!out.empty()) config.output_dir = out;
  config.validate();

  ivqr::app::ProgressFn progress;
  if (!quiet) {
    progress = [](std::size_t done, std::size_t total) {
      if (done == total || done % 50 == 0) std::cerr << "\r" << done << "/" << total << " replications" << std::flush;
    };
  }
  const auto result = ivqr::app::run_simulation(config, workers, progress);
  if (!quiet) std::cerr << "\n";
  ivqr::app::write_outputs(result, config.output_dir);
  if (!quiet) std::cerr << "wrote " << config.output_dir << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Averaging estimators for instrumental variable quantile regression"};
  app.require_subcommand(1);

  ivqr::app::EstimateOptions est;
  std::string est_out;
  bool no_intercept = false;
  auto* estimate = app.add_subcommand("estimate", "Estimate coefficients from a CSV file");
  estimate->add_option("--data", est.data, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  estimate->add_option("--tau", est.tau, "Quantile level in (0, 1)")->required();
  estimate->add_option("--outcome", est.outcome, "Outcome column")->required();
  estimate->add_option("--endog", est.endog, "Endogenous regressor columns")->required()->delimiter(',');
  estimate->add_option("--exog", est.exog, "Exogenous regressor columns")->delimiter(',');
  estimate->add_option("--excl-instruments", est.excl_instruments, "Excluded instrument columns")
    ->required()
    ->delimiter(',');
  estimate->add_flag("--no-intercept", no_intercept, "Do not add an intercept");
  estimate->add_option("--method,--methods", est.methods, "ivqr, qr, tsls, avg-qr, avg-2sls, agg-qr, agg-2sls, bs")
    ->delimiter(',')
    ->capture_default_str();
  estimate->add_option("--bootstrap-draws", est.bootstrap_draws, "Bootstrap draws for bs")->capture_default_str();
  estimate->add_option("--grid-steps", est.grid_steps, "Steps k of the bootstrap weight simplex")
    ->capture_default_str();
  estimate->add_option("--seed", est.seed, "Seed of the bootstrap streams")->capture_default_str();
  estimate->add_option("--jacobian-bandwidth", est.jacobian_bandwidth, "auto, plugin or nonparametric")
    ->capture_default_str();
  estimate->add_option("--out", est_out, "JSON report path (stdout when absent)");

  std::string config_path;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  std::size_t workers = 0;
  bool quiet = false;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment");
  simulate->add_option("--config", config_path, "JSON experiment configuration")->required();
  simulate->add_option("--seed", sim_seed, "Master seed")->required();
  simulate->add_option("--out", sim_out, "Output directory (overrides output_dir)");
  simulate->add_option("--workers", workers, "Worker threads (default: IVQR_THREADS or all cores)");
  simulate->add_flag("--quiet", quiet, "No progress output");

  ivqr::app::GenDataOptions gen;
  std::string gen_out;
  std::string dist = "chisq3";
  std::string error_kind = "gaussian";
  double c0 = 0.0;
  double hetero = 1.0;
  bool gen_no_intercept = false;
  auto* gen_data = app.add_subcommand("gen-data", "Write one simulated sample as CSV");
  gen_data->add_option("--model", gen.model, "Design 1, 2 or 3")->capture_default_str()->check(CLI::Range(1, 3));
  gen_data->add_option("--n", gen.n, "Sample size")->capture_default_str();
  gen_data->add_option("--tau", gen.tau, "Quantile level")->capture_default_str();
  gen_data->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  gen_data->add_option("--c0", c0, "Models 2 and 3: endogeneity")->capture_default_str();
  gen_data->add_option("--c1", gen.m1.c1, "Model 1: endogeneity")->capture_default_str();
  gen_data->add_option("--c2", gen.m1.c2, "Model 1: slope heterogeneity")->capture_default_str();
  gen_data->add_option("--c3", gen.m1.c3, "Model 1: t degrees of freedom")->capture_default_str();
  gen_data->add_option("--dist", dist, "Model 1 intercept distribution: chisq3 or t")->capture_default_str();
  gen_data->add_option("--error", error_kind, "Models 2 and 3: gaussian or chisq4")->capture_default_str();
  gen_data->add_option("--hetero", hetero, "Model 3: slope heterogeneity")->capture_default_str();
  gen_data->add_flag("--no-intercept", gen_no_intercept, "Models 2 and 3: drop the intercept");
  gen_data->add_option("--out", gen_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*estimate) {
      est.intercept = !no_intercept;
      return run_estimate_command(est, est_out);
    }
    if (*simulate) {
      const std::size_t w = workers > 0 ? workers : ivqr::default_worker_count();
      return run_simulate_command(config_path, sim_seed, sim_out, w, quiet);
    }
    if (*gen_data) {
      if (dist == "chisq3") {
        gen.m1.intercept_kind = ivqr::InterceptKind::ChiSq3;
      } else if (dist == "t") {
        gen.m1.intercept_kind = ivqr::InterceptKind::StudentT;
      } else {
        throw ivqr::InvalidArgument("--dist must be chisq3 or t");
      }
      const auto kind = ivqr::error_kind_from_string(error_kind);
      gen.m2.c0 = c0;
      gen.m2.error_kind = kind;
      gen.m2.intercept = !gen_no_intercept;
      gen.m3.c0 = c0;
      gen.m3.hetero = hetero;
      gen.m3.error_kind = kind;
      gen.m3.intercept = !gen_no_intercept;
      const auto sim = ivqr::app::generate_dataset(gen);
      ivqr::app::write_csv(gen_out, ivqr::app::dataset_table(sim.data));
      std::cerr << "truth:";
      for (Eigen::Index j = 0; j < sim.truth.size(); ++j) std::cerr << " " << sim.truth(j);
      std::cerr << "\n";
      return 0;
    }
  } catch (const ivqr::SolverFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const ivqr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid JSON: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
