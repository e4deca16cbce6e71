#include "ivqravg/app/simulate.hpp"

#include "ivqravg/averaging.hpp"
#include "ivqravg/bootstrap.hpp"
#include "ivqravg/classical.hpp"
#include "ivqravg/errors.hpp"
#include "ivqravg/parallel.hpp"
#include "ivqravg/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>

namespace ivqr::app {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kBootstrapStreamTag = 0x42535f415647ULL;
constexpr double kMaxDropShare = 0.05;
constexpr std::size_t kMaxReasons = 5;

std::string fixed(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tau_label(double tau)
{
  return fixed(tau, 2);
}

DgpSpec m1_row(const std::string& id, double c1, double c2, InterceptKind kind = InterceptKind::ChiSq3, double c3 = 3.0)
{
  DgpSpec d;
  d.id = id;
  d.m1.c1 = c1;
  d.m1.c2 = c2;
  d.m1.intercept_kind = kind;
  d.m1.c3 = c3;
  return d;
}

bool wants(const SimulationConfig& c, const std::string& name)
{
  return std::find(c.estimators.begin(), c.estimators.end(), name) != c.estimators.end();
}

struct ReplicationOutcome
{
  bool ok = false;
  std::string error;
  std::map<std::string, Vector> estimates;
  Vector truth;
  double h_estimation = 0.0;
  double h_jacobian = 0.0;
  bool jacobian_fallback = false;
  bool regularized = false;
  bool nonconverged = false;
  double weight_qr = 0.0;
  double weight_2sls = 0.0;
  double raw_qr = 0.0;
  double raw_2sls = 0.0;
  WeightTriple bs{0.0, 0.0, 0.0};
  int bs_skipped = 0;
};

SimulatedData generate(const SimulationConfig& config, const DgpSpec& dgp, QuantileLevel tau, Engine& rng)
{
  switch (config.model) {
    case SimulationModel::M1:
      return gen_model1(dgp.m1, config.n, tau, rng);
    case SimulationModel::M2: {
      Model2Params p = dgp.m2;
      p.intercept = config.intercept;
      return gen_model2(p, config.n, tau, rng);
    }
    case SimulationModel::M3: {
      Model3Params p = dgp.m3;
      p.intercept = config.intercept;
      return gen_model3(p, config.n, tau, rng);
    }
  }
  throw InvalidArgument("unknown simulation model");
}

JacobianBandwidthRule resolve_rule(const SimulationConfig& config)
{
  if (config.jacobian_bandwidth == "plugin") return JacobianBandwidthRule::Plugin;
  if (config.jacobian_bandwidth == "nonparametric") return JacobianBandwidthRule::Nonparametric;
  return config.model == SimulationModel::M1 ? JacobianBandwidthRule::Nonparametric : JacobianBandwidthRule::Plugin;
}

ReplicationOutcome run_replication(const SimulationConfig& config,
                                   const std::vector<WeightTriple>& grid,
                                   std::size_t dgp_index,
                                   std::size_t tau_index,
                                   std::size_t rep)
{
  ReplicationOutcome out;
  const QuantileLevel tau(config.taus[tau_index]);
  Engine rng = keyed_engine({config.seed, dgp_index, tau_index, rep});
  const SimulatedData sim = generate(config, config.dgps[dgp_index], tau, rng);
  out.truth = sim.scored_truth();
  const Dataset& data = sim.data;

  try {
    const GmmConfig cfg;
    AveragingOptions options;
    options.jacobian_rule = resolve_rule(config);
    const ConservativeStage stage = fit_conservative(data, tau, cfg, options);
    out.estimates["IVQR"] = sim.scored_part(stage.conservative.beta);
    out.h_estimation = stage.estimation_bandwidth;
    out.h_jacobian = stage.jacobian_bandwidth.h;
    out.jacobian_fallback = stage.jacobian_fallback;
    out.regularized = stage.conservative.regularized || stage.sigma1_regularized;
    out.nonconverged = !stage.conservative.converged;

    if (wants(config, "QR")) out.estimates["QR"] = sim.scored_part(qr_fit(data, tau).beta);
    if (wants(config, "TSLS")) out.estimates["TSLS"] = sim.scored_part(tsls_fit(data).beta);
    if (wants(config, "AVG_QR") || wants(config, "AGG_QR")) {
      const AveragingResult r = averaging_estimate(data, tau, AdditionalMoments::QR, stage, cfg, options);
      out.estimates["AVG_QR"] = sim.scored_part(r.beta_avg);
      out.estimates["AGG_QR"] = sim.scored_part(r.beta_aggressive);
      out.weight_qr = r.weight;
      out.raw_qr = r.weight_raw;
      out.regularized = out.regularized || r.regularized;
      out.nonconverged = out.nonconverged || !r.aggressive.converged;
    }
    if (wants(config, "AVG_2SLS") || wants(config, "AGG_2SLS")) {
      const AveragingResult r = averaging_estimate(data, tau, AdditionalMoments::TwoSLSSlope, stage, cfg, options);
      out.estimates["AVG_2SLS"] = sim.scored_part(r.beta_avg);
      out.estimates["AGG_2SLS"] = sim.scored_part(r.beta_aggressive);
      out.weight_2sls = r.weight;
      out.raw_2sls = r.weight_raw;
      out.regularized = out.regularized || r.regularized;
      out.nonconverged = out.nonconverged || !r.aggressive.converged;
    }
    if (wants(config, "BS_AVG")) {
      const std::uint64_t seed = stream_key({kBootstrapStreamTag, config.seed, dgp_index, tau_index, rep});
      const BootstrapResult r = bootstrap_average(data, tau, config.bootstrap_draws, grid, seed, cfg);
      out.estimates["BS_AVG"] = sim.scored_part(r.beta_bs);
      out.bs = r.optimal_weight;
      out.bs_skipped = r.draws_skipped;
    }
    for (const auto& [name, beta] : out.estimates) {
      if (!beta.allFinite()) throw SolverFailure(name + " estimate is not finite");
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.what();
    out.estimates.clear();
  }
  return out;
}

double get_number(const nlohmann::json& j, const char* key, double fallback)
{
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw InvalidArgument(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

DgpSpec parse_dgp(const nlohmann::json& j, SimulationModel model, std::size_t index)
{
  if (!j.is_object()) throw InvalidArgument("dgp_grid entries must be objects");
  DgpSpec d;
  d.id = j.contains("id") ? (j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump())
                          : std::to_string(index + 1);
  switch (model) {
    case SimulationModel::M1: {
      d.m1.c1 = get_number(j, "c1", 0.0);
      d.m1.c2 = get_number(j, "c2", 0.0);
      const std::string kind = j.value("intercept_kind", std::string("chisq3"));
      if (kind == "chisq3") {
        d.m1.intercept_kind = InterceptKind::ChiSq3;
      } else if (kind == "t") {
        d.m1.intercept_kind = InterceptKind::StudentT;
      } else {
        throw InvalidArgument("intercept_kind must be chisq3 or t");
      }
      d.m1.c3 = get_number(j, "c3", 3.0);
      d.m1.validate();
      break;
    }
    case SimulationModel::M2:
      d.m2.c0 = get_number(j, "c0", 0.0);
      d.m2.error_kind = error_kind_from_string(j.value("error_kind", std::string("gaussian")));
      d.m2.validate();
      break;
    case SimulationModel::M3:
      d.m3.c0 = get_number(j, "c0", 0.0);
      d.m3.hetero = get_number(j, "hetero", 1.0);
      d.m3.error_kind = error_kind_from_string(j.value("error_kind", std::string("gaussian")));
      d.m3.validate();
      break;
  }
  return d;
}

} // namespace

std::string to_string(SimulationModel model)
{
  switch (model) {
    case SimulationModel::M1:
      return "M1";
    case SimulationModel::M2:
      return "M2";
    case SimulationModel::M3:
      return "M3";
  }
  return "?";
}

const std::vector<std::string>& simulation_estimator_names()
{
  static const std::vector<std::string> names{"IVQR",   "AVG_2SLS", "AGG_2SLS", "TSLS",
                                              "AVG_QR", "AGG_QR",   "QR",       "BS_AVG"};
  return names;
}

std::vector<DgpSpec> default_dgp_grid(SimulationModel model)
{
  std::vector<DgpSpec> grid;
  switch (model) {
    case SimulationModel::M1:
      grid = {m1_row("1", 0.0, 0.0),
              m1_row("2", 0.1, 0.0),
              m1_row("3", 0.3, 0.0),
              m1_row("4", 0.5, 0.0),
              m1_row("5", 0.0, 0.3),
              m1_row("6", 0.2, 0.3),
              m1_row("7", 0.5, 0.3),
              m1_row("8", 0.9, 0.6),
              m1_row("9", 0.2, 0.9),
              m1_row("10", 0.0, 0.0, InterceptKind::StudentT, 3.0),
              m1_row("11", 0.0, 0.0, InterceptKind::StudentT, 1.0),
              m1_row("12", 0.5, 0.0, InterceptKind::StudentT, 5.0),
              m1_row("13", 0.5, 0.0, InterceptKind::StudentT, 3.0),
              m1_row("14", 0.5, 0.0, InterceptKind::StudentT, 1.0)};
      break;
    case SimulationModel::M2:
    case SimulationModel::M3:
      for (int k = 0; k <= 8; ++k) {
        DgpSpec d;
        d.id = std::to_string(k + 1);
        d.m2.c0 = 0.05 * k;
        d.m3.c0 = 0.05 * k;
        grid.push_back(d);
      }
      break;
  }
  return grid;
}

SimulationConfig SimulationConfig::from_json(const nlohmann::json& doc)
{
  if (!doc.is_object()) throw InvalidArgument("simulation config must be a JSON object");
  static const std::vector<std::string> known{"model",          "dgp_grid", "n",          "replications",
                                              "bootstrap_draws", "taus",    "estimators", "seed",
                                              "grid_steps",     "output_dir", "jacobian_bandwidth", "intercept"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidArgument("unknown config field '" + key + "'");
    }
  }
  SimulationConfig c;
  const auto model = doc.contains("model") ? doc.at("model") : nlohmann::json("M2");
  const std::string m = model.is_number() ? "M" + std::to_string(model.get<int>()) : model.get<std::string>();
  if (m == "M1") {
    c.model = SimulationModel::M1;
  } else if (m == "M2") {
    c.model = SimulationModel::M2;
  } else if (m == "M3") {
    c.model = SimulationModel::M3;
  } else {
    throw InvalidArgument("model must be M1, M2 or M3");
  }
  c.replications = c.model == SimulationModel::M1 ? 400 : 200;
  if (doc.contains("dgp_grid")) {
    const auto& g = doc.at("dgp_grid");
    if (!g.is_array() || g.empty()) throw InvalidArgument("dgp_grid must be a nonempty array");
    for (std::size_t i = 0; i < g.size(); ++i) c.dgps.push_back(parse_dgp(g[i], c.model, i));
  } else {
    c.dgps = default_dgp_grid(c.model);
  }
  c.n = static_cast<Index>(get_number(doc, "n", static_cast<double>(c.n)));
  c.replications = static_cast<int>(get_number(doc, "replications", c.replications));
  c.bootstrap_draws = static_cast<int>(get_number(doc, "bootstrap_draws", c.bootstrap_draws));
  c.grid_steps = static_cast<int>(get_number(doc, "grid_steps", c.grid_steps));
  if (doc.contains("taus")) c.taus = doc.at("taus").get<std::vector<double>>();
  if (doc.contains("estimators")) c.estimators = doc.at("estimators").get<std::vector<std::string>>();
  if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
  c.output_dir = doc.value("output_dir", c.output_dir);
  c.jacobian_bandwidth = doc.value("jacobian_bandwidth", c.jacobian_bandwidth);
  c.intercept = doc.value("intercept", c.intercept);
  c.validate();
  return c;
}

void SimulationConfig::validate() const
{
  if (dgps.empty()) throw InvalidArgument("simulation needs at least one DGP");
  if (n < 10) throw InvalidArgument("simulation sample size must be at least 10");
  if (replications < 2) throw InvalidArgument("replications must be at least 2");
  if (taus.empty()) throw InvalidArgument("simulation needs at least one quantile level");
  for (double t : taus) (void)QuantileLevel(t);
  if (grid_steps < 1) throw InvalidArgument("grid_steps must be at least 1");
  const auto& names = simulation_estimator_names();
  for (const auto& e : estimators) {
    if (std::find(names.begin(), names.end(), e) == names.end()) {
      throw InvalidArgument("unknown estimator '" + e + "'");
    }
  }
  if (std::find(estimators.begin(), estimators.end(), "BS_AVG") != estimators.end() && bootstrap_draws < 1) {
    throw InvalidArgument("bootstrap_draws must be at least 1 when BS_AVG is requested");
  }
  if (jacobian_bandwidth != "auto" && jacobian_bandwidth != "plugin" && jacobian_bandwidth != "nonparametric") {
    throw InvalidArgument("jacobian_bandwidth must be auto, plugin or nonparametric");
  }
}

std::vector<std::pair<std::string, std::string>> SimulationConfig::describe(const DgpSpec& d) const
{
  switch (model) {
    case SimulationModel::M1:
      return {{"c1", fixed(d.m1.c1, 2)},
              {"c2", fixed(d.m1.c2, 2)},
              {"dist", d.m1.intercept_kind == InterceptKind::ChiSq3 ? "chisq3" : "t"},
              {"c3", d.m1.intercept_kind == InterceptKind::ChiSq3 ? "NA" : fixed(d.m1.c3, 2)}};
    case SimulationModel::M2:
      return {{"c0", fixed(d.m2.c0, 2)}, {"error", to_string(d.m2.error_kind)}};
    case SimulationModel::M3:
      return {{"c0", fixed(d.m3.c0, 2)}, {"hetero", fixed(d.m3.hetero, 2)}, {"error", to_string(d.m3.error_kind)}};
  }
  return {};
}

Json SimulationConfig::to_json() const
{
  Json j;
  j["model"] = to_string(model);
  Json grid = Json::array();
  for (const auto& d : dgps) {
    Json row;
    row["id"] = d.id;
    switch (model) {
      case SimulationModel::M1:
        row["c1"] = d.m1.c1;
        row["c2"] = d.m1.c2;
        row["intercept_kind"] = d.m1.intercept_kind == InterceptKind::ChiSq3 ? "chisq3" : "t";
        if (d.m1.intercept_kind == InterceptKind::StudentT) row["c3"] = d.m1.c3;
        break;
      case SimulationModel::M2:
        row["c0"] = d.m2.c0;
        row["error_kind"] = to_string(d.m2.error_kind);
        break;
      case SimulationModel::M3:
        row["c0"] = d.m3.c0;
        row["hetero"] = d.m3.hetero;
        row["error_kind"] = to_string(d.m3.error_kind);
        break;
    }
    grid.push_back(row);
  }
  j["dgp_grid"] = grid;
  j["n"] = n;
  j["replications"] = replications;
  j["bootstrap_draws"] = bootstrap_draws;
  j["taus"] = taus;
  j["estimators"] = estimators;
  j["seed"] = seed;
  j["grid_steps"] = grid_steps;
  j["output_dir"] = output_dir;
  j["jacobian_bandwidth"] = jacobian_bandwidth;
  j["intercept"] = intercept;
  return j;
}

SimulationResult run_simulation(const SimulationConfig& config_in, std::size_t workers, const ProgressFn& progress)
{
  config_in.validate();
  SimulationResult result;
  result.config = config_in;
  SimulationConfig& config = result.config;
  // IVQR is the baseline of every table; keep the canonical column order.
  std::vector<std::string> ordered;
  for (const auto& name : simulation_estimator_names()) {
    if (name == "IVQR" || wants(config, name)) ordered.push_back(name);
  }
  config.estimators = ordered;

  const std::vector<WeightTriple> grid =
    wants(config, "BS_AVG") ? simplex_weight_grid(config.grid_steps) : std::vector<WeightTriple>{};
  const std::size_t n_dgp = config.dgps.size();
  const std::size_t n_tau = config.taus.size();
  const auto reps = static_cast<std::size_t>(config.replications);
  const std::size_t total = n_tau * n_dgp * reps;

  std::vector<ReplicationOutcome> outcomes(total);
  std::atomic<std::size_t> done{0};
  std::mutex progress_guard;
  parallel_for(total, workers, [&](std::size_t task) {
    const std::size_t rep = task % reps;
    const std::size_t dgp = (task / reps) % n_dgp;
    const std::size_t tau = task / (reps * n_dgp);
    outcomes[task] = run_replication(config, grid, dgp, tau, rep);
    const std::size_t finished = ++done;
    if (progress) {
      std::lock_guard lock(progress_guard);
      progress(finished, total);
    }
  });

  for (std::size_t t = 0; t < n_tau; ++t) {
    TauResult tr;
    tr.tau = config.taus[t];
    std::vector<std::string> ids;
    for (std::size_t d = 0; d < n_dgp; ++d) {
      ids.push_back(config.dgps[d].id);
      CellDiagnostics diag;
      std::vector<const ReplicationOutcome*> kept;
      Vector truth;
      for (std::size_t r = 0; r < reps; ++r) {
        const ReplicationOutcome& o = outcomes[(t * n_dgp + d) * reps + r];
        truth = o.truth;
        if (o.ok) {
          kept.push_back(&o);
        } else {
          ++diag.dropped;
          if (diag.drop_reasons.size() < kMaxReasons) diag.drop_reasons.push_back(o.error);
        }
      }
      if (static_cast<double>(diag.dropped) > kMaxDropShare * static_cast<double>(reps)) {
        throw SolverFailure("DGP " + config.dgps[d].id + " at tau " + tau_label(tr.tau) + ": " +
                            std::to_string(diag.dropped) + " of " + std::to_string(reps) +
                            " replications failed (first error: " +
                            (diag.drop_reasons.empty() ? std::string("?") : diag.drop_reasons.front()) + ")");
      }
      if (kept.size() < 2) {
        throw SolverFailure("fewer than two successful replications for DGP " + config.dgps[d].id);
      }
      diag.replications_effective = static_cast<int>(kept.size());
      const double m = static_cast<double>(kept.size());
      EstimatorEstimates est;
      for (const auto& name : config.estimators) {
        Matrix mat(static_cast<Index>(kept.size()), truth.size());
        for (std::size_t k = 0; k < kept.size(); ++k) mat.row(static_cast<Index>(k)) = kept[k]->estimates.at(name);
        est[name] = std::move(mat);
      }
      for (const ReplicationOutcome* o : kept) {
        diag.mean_estimation_bandwidth += o->h_estimation / m;
        diag.mean_jacobian_bandwidth += o->h_jacobian / m;
        diag.jacobian_fallbacks += o->jacobian_fallback ? 1 : 0;
        diag.regularized += o->regularized ? 1 : 0;
        diag.nonconverged += o->nonconverged ? 1 : 0;
        diag.mean_weight_qr += o->weight_qr / m;
        diag.mean_weight_2sls += o->weight_2sls / m;
        diag.mean_raw_weight_qr += o->raw_qr / m;
        diag.mean_raw_weight_2sls += o->raw_2sls / m;
        diag.mean_bs_w1 += o->bs.w1 / m;
        diag.mean_bs_w2 += o->bs.w2 / m;
        diag.mean_bs_w3 += o->bs.w3 / m;
        diag.bootstrap_skipped += o->bs_skipped;
      }
      tr.diagnostics.push_back(std::move(diag));
      tr.estimates.push_back(std::move(est));
      tr.truths.push_back(truth);
    }
    tr.table = relative_rrmse_table(ids, tr.estimates, tr.truths, config.estimators, "IVQR");
    result.per_tau.push_back(std::move(tr));
  }
  return result;
}

void write_outputs(const SimulationResult& result, const std::filesystem::path& dir)
{
  std::filesystem::create_directories(dir);
  const SimulationConfig& config = result.config;
  Json cells = Json::array();
  std::ofstream plot(dir / "plotdata.csv");
  if (!plot) throw InvalidArgument("cannot write to output directory '" + dir.string() + "'");
  plot << "tau,dgp,estimator,relative_rrmse,absolute_rrmse\n";

  for (const TauResult& tr : result.per_tau) {
    const std::string label = tau_label(tr.tau);
    std::ofstream table(dir / ("table_tau_" + label + ".csv"));
    if (!table) throw InvalidArgument("cannot write table for tau " + label);
    table << "dgp";
    for (const auto& [name, value] : config.describe(config.dgps.front())) table << "," << name;
    table << ",replications";
    for (const auto& e : config.estimators) table << "," << e;
    table << ",CON\n";

    for (std::size_t d = 0; d < config.dgps.size(); ++d) {
      const auto desc = config.describe(config.dgps[d]);
      const CellDiagnostics& diag = tr.diagnostics[d];
      table << config.dgps[d].id;
      for (const auto& [name, value] : desc) table << "," << value;
      table << "," << diag.replications_effective;
      for (const auto& e : config.estimators) table << "," << fixed(tr.table.cell(d, e), 6);
      table << "," << fixed(tr.table.baseline_absolute[d], 6) << "\n";

      Json cell;
      cell["tau"] = tr.tau;
      cell["dgp"] = config.dgps[d].id;
      for (const auto& [name, value] : desc) cell[name] = value;
      cell["replications_effective"] = diag.replications_effective;
      cell["dropped"] = diag.dropped;
      cell["drop_reasons"] = diag.drop_reasons;
      cell["con_absolute_rrmse"] = tr.table.baseline_absolute[d];
      Json relative;
      Json absolute;
      for (const auto& e : config.estimators) {
        relative[e] = tr.table.cell(d, e);
        const double abs_value = rrmse(tr.estimates[d].at(e), tr.truths[d]);
        absolute[e] = abs_value;
        plot << label << "," << config.dgps[d].id << "," << e << "," << fixed(tr.table.cell(d, e), 6) << ","
             << fixed(abs_value, 6) << "\n";
      }
      cell["relative_rrmse"] = relative;
      cell["absolute_rrmse"] = absolute;
      Json dj;
      dj["mean_estimation_bandwidth"] = diag.mean_estimation_bandwidth;
      dj["mean_jacobian_bandwidth"] = diag.mean_jacobian_bandwidth;
      dj["jacobian_fallbacks"] = diag.jacobian_fallbacks;
      dj["regularized"] = diag.regularized;
      dj["nonconverged"] = diag.nonconverged;
      dj["mean_weight_avg_qr"] = diag.mean_weight_qr;
      dj["mean_raw_weight_avg_qr"] = diag.mean_raw_weight_qr;
      dj["mean_weight_avg_2sls"] = diag.mean_weight_2sls;
      dj["mean_raw_weight_avg_2sls"] = diag.mean_raw_weight_2sls;
      dj["mean_bootstrap_weights"] = {diag.mean_bs_w1, diag.mean_bs_w2, diag.mean_bs_w3};
      dj["bootstrap_draws_skipped"] = diag.bootstrap_skipped;
      cell["diagnostics"] = dj;
      cells.push_back(cell);
    }
  }

  Json doc;
  doc["config"] = config.to_json();
  doc["cells"] = cells;
  std::ofstream json(dir / "results.json");
  if (!json) throw InvalidArgument("cannot write results.json");
  json << doc.dump(2) << "\n";
}

} // namespace ivqr::app
