#include "ivqravg/app/estimate.hpp"

#include "ivqravg/app/csv.hpp"
#include "ivqravg/averaging.hpp"
#include "ivqravg/bootstrap.hpp"
#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <optional>
#include <sstream>

namespace ivqr::app {

namespace {

using Json = nlohmann::ordered_json;

Json to_json(const Vector& v)
{
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix columns_of(const CsvTable& table, const std::vector<std::string>& names, Index rows)
{
  Matrix m(rows, static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& col = table.column(names[j]);
    for (Index i = 0; i < rows; ++i) m(i, static_cast<Index>(j)) = col[static_cast<std::size_t>(i)];
  }
  return m;
}

JacobianBandwidthRule jacobian_rule(const std::string& choice, const Dataset& data)
{
  if (choice == "plugin") return JacobianBandwidthRule::Plugin;
  if (choice == "nonparametric") return JacobianBandwidthRule::Nonparametric;
  if (choice == "auto") {
    return is_discrete_design(data) ? JacobianBandwidthRule::Nonparametric : JacobianBandwidthRule::Plugin;
  }
  throw InvalidArgument("unknown Jacobian bandwidth rule '" + choice + "' (expected auto, plugin or nonparametric)");
}

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

} // namespace

const std::vector<std::string>& estimate_method_names()
{
  static const std::vector<std::string> names{"ivqr", "qr", "tsls", "avg-qr", "avg-2sls", "agg-qr", "agg-2sls", "bs"};
  return names;
}

Dataset dataset_from_csv(const EstimateOptions& options)
{
  const CsvTable table = read_csv(options.data);
  if (options.outcome.empty()) throw InvalidArgument("an outcome column is required");
  const auto n = static_cast<Index>(table.rows());
  if (n == 0) throw InvalidArgument("data file has no observations");

  const auto& y_col = table.column(options.outcome);
  Vector y = Eigen::Map<const Vector>(y_col.data(), n);
  Matrix exog = columns_of(table, options.exog, n);
  if (options.intercept) {
    Matrix with(n, exog.cols() + 1);
    with << Matrix::Ones(n, 1), exog;
    exog = std::move(with);
  }
  return Dataset(std::move(y), std::move(exog), columns_of(table, options.endog, n),
                 columns_of(table, options.excl_instruments, n));
}

std::vector<std::string> coefficient_names(const EstimateOptions& options)
{
  std::vector<std::string> names;
  if (options.intercept) names.emplace_back("(intercept)");
  names.insert(names.end(), options.exog.begin(), options.exog.end());
  names.insert(names.end(), options.endog.begin(), options.endog.end());
  return names;
}

EstimateOutcome run_estimate(const EstimateOptions& options)
{
  const QuantileLevel tau(options.tau);
  for (const auto& m : options.methods) {
    const auto& known = estimate_method_names();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw InvalidArgument("unknown method '" + m + "'");
    }
  }
  if (options.methods.empty()) throw InvalidArgument("no method requested");
  auto wants = [&](const std::string& m) {
    return std::find(options.methods.begin(), options.methods.end(), m) != options.methods.end();
  };

  const Dataset data = dataset_from_csv(options);
  EstimateOutcome outcome;
  Json report;
  report["tau"] = tau.value();
  report["n"] = data.n();
  report["coefficients"] = coefficient_names(options);

  const GmmConfig cfg;
  AveragingOptions avg;
  const bool needs_stage =
    wants("ivqr") || wants("avg-qr") || wants("avg-2sls") || wants("agg-qr") || wants("agg-2sls");
  std::optional<ConservativeStage> stage;
  std::optional<AveragingResult> with_qr;
  std::optional<AveragingResult> with_2sls;
  Json methods = Json::object();

  if (needs_stage) {
    avg.jacobian_rule = jacobian_rule(options.jacobian_bandwidth, data);
    Stopwatch sw;
    stage = fit_conservative(data, tau, cfg, avg);
    outcome.timings.emplace_back("ivqr", sw.seconds());
    Json bw;
    bw["estimation"] = stage->estimation_bandwidth;
    bw["jacobian"] = stage->jacobian_bandwidth.h;
    bw["jacobian_method"] = to_string(stage->jacobian_bandwidth.method);
    bw["jacobian_fallback"] = stage->jacobian_fallback;
    report["bandwidths"] = bw;
  }

  for (const auto& m : estimate_method_names()) {
    if (!wants(m)) continue;
    Json entry;
    Stopwatch sw;
    if (m == "ivqr") {
      const EstimatorResult& r = stage->conservative;
      entry["beta"] = to_json(r.beta);
      entry["objective"] = r.objective;
      entry["converged"] = r.converged;
      entry["regularized"] = r.regularized;
    } else if (m == "qr") {
      const LinearFit f = qr_fit(data, tau);
      entry["beta"] = to_json(f.beta);
      entry["check_loss"] = check_loss(f.residuals, tau.value());
      entry["converged"] = f.converged;
    } else if (m == "tsls") {
      entry["beta"] = to_json(tsls_fit(data).beta);
    } else if (m == "avg-qr" || m == "avg-2sls" || m == "agg-qr" || m == "agg-2sls") {
      const bool qr_moments = m == "avg-qr" || m == "agg-qr";
      auto& cached = qr_moments ? with_qr : with_2sls;
      if (!cached) {
        cached = averaging_estimate(data, tau, qr_moments ? AdditionalMoments::QR : AdditionalMoments::TwoSLSSlope,
                                    *stage, cfg, avg);
      }
      const AveragingResult& r = *cached;
      if (m.rfind("avg", 0) == 0) {
        entry["beta"] = to_json(r.beta_avg);
        entry["weight"] = r.weight;
        entry["weight_raw"] = r.weight_raw;
        entry["weight_degenerate"] = r.weight_degenerate;
        entry["beta_conservative"] = to_json(r.beta_conservative);
        entry["beta_aggressive"] = to_json(r.beta_aggressive);
      } else {
        entry["beta"] = to_json(r.beta_aggressive);
        entry["objective"] = r.aggressive.objective;
        entry["converged"] = r.aggressive.converged;
      }
      entry["regularized"] = r.regularized;
    } else if (m == "bs") {
      if (options.bootstrap_draws < 1) throw InvalidArgument("--bootstrap-draws must be at least 1");
      const auto grid = simplex_weight_grid(options.grid_steps);
      const BootstrapResult r = bootstrap_average(data, tau, options.bootstrap_draws, grid, options.seed, cfg);
      entry["beta"] = to_json(r.beta_bs);
      entry["weights"] = {r.optimal_weight.w1, r.optimal_weight.w2, r.optimal_weight.w3};
      entry["grid_size"] = grid.size();
      entry["draws_used"] = r.draws_used;
      entry["draws_skipped"] = r.draws_skipped;
      entry["redraws"] = r.redraws;
      entry["beta_ivqr"] = to_json(r.original.ivqr);
      entry["beta_tsls"] = to_json(r.original.tsls);
      entry["beta_qr"] = to_json(r.original.qr);
    }
    if (m != "ivqr") outcome.timings.emplace_back(m, sw.seconds());
    methods[m] = entry;
  }
  report["methods"] = methods;
  report["seed"] = options.seed;
  outcome.report = std::move(report);
  return outcome;
}

std::string format_summary(const EstimateOutcome& outcome)
{
  std::ostringstream out;
  const Json& r = outcome.report;
  out << "tau = " << r["tau"].get<double>() << ", n = " << r["n"].get<long long>() << "\n";
  const auto names = r["coefficients"].get<std::vector<std::string>>();
  std::size_t width = 10;
  for (const auto& n : names) width = std::max(width, n.size() + 2);
  out << std::left << std::setw(static_cast<int>(width)) << "method";
  for (const auto& n : names) out << std::right << std::setw(static_cast<int>(width)) << n;
  out << "\n";
  for (const auto& [method, entry] : r["methods"].items()) {
    out << std::left << std::setw(static_cast<int>(width)) << method;
    for (const auto& v : entry["beta"]) {
      out << std::right << std::setw(static_cast<int>(width)) << std::fixed << std::setprecision(5)
          << v.get<double>();
    }
    out << "\n";
  }
  out.unsetf(std::ios::floatfield);
  for (const auto& [method, entry] : r["methods"].items()) {
    if (entry.contains("weight")) {
      out << method << ": weight " << entry["weight"].get<double>() << " (raw "
          << entry["weight_raw"].get<double>() << ")\n";
    }
    if (entry.contains("weights")) {
      const auto w = entry["weights"];
      out << method << ": weights (ivqr, 2sls, qr) = (" << w[0].get<double>() << ", " << w[1].get<double>()
          << ", " << w[2].get<double>() << ") over " << entry["grid_size"].get<long long>() << " grid points\n";
    }
  }
  if (r.contains("bandwidths")) {
    out << "bandwidths: estimation " << r["bandwidths"]["estimation"].get<double>() << ", jacobian "
        << r["bandwidths"]["jacobian"].get<double>() << " (" << r["bandwidths"]["jacobian_method"].get<std::string>()
        << ")\n";
  }
  out << "timings:";
  for (const auto& [method, secs] : outcome.timings) out << " " << method << " " << secs << "s";
  out << "\n";
  return out.str();
}

} // namespace ivqr::app
