// Command-line front end: simulation, fitting, prediction, Bayes risk and
// experiment grids. Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mispred/bayes.hpp"
#include "mispred/config.hpp"
#include "mispred/csv.hpp"
#include "mispred/errors.hpp"
#include "mispred/experiments.hpp"
#include "mispred/predictor_io.hpp"
#include "mispred/rng.hpp"
#include "mispred/svg_chart.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mispred;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out = ".";
};

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", path.string()));
  f << text;
}

int cmd_simulate(const Globals& g, const std::string& config_path) {
  SimulateConfig cfg = simulate_config_from_json(read_json_file(config_path));
  if (g.seed) cfg.scenario.seed = *g.seed;
  const ScenarioParams params = make_scenario(cfg.scenario);
  Rng rng = Rng(cfg.scenario.seed).split("data");
  const SimulatedData data = simulate(params, cfg.n, rng);
  const fs::path dir = out_dir(g);
  write_masked_csv_file((dir / "masked.csv").string(), data.masked);
  write_matrix_csv_file((dir / "complete.csv").string(), data.complete);
  write_vector_csv_file((dir / "y.csv").string(), data.y, "y");
  write_text(dir / "params.json", scenario_params_to_json(params).dump(2) + "\n");
  std::cout << fmt::format("wrote {} rows to {}\n", cfg.n, dir.string());
  return 0;
}

int cmd_bayes_risk(const Globals& g, const std::string& sidecar_path, long long monte_carlo) {
  LinearDGP dgp;
  const PatternMixtureModel model = mixture_from_sidecar(read_json_file(sidecar_path), dgp);
  const double risk = bayes_risk(model, dgp);

  // Var(Y) under the model, mixing over patterns.
  double mean_lin = 0.0, second = 0.0;
  for (std::uint32_t bits = 0; bits < model.n_patterns(); ++bits) {
    const double p = model.prob(bits);
    if (p <= 0.0) continue;
    const GaussianComponent& c = model.component_for(bits);
    const double m = dgp.beta.dot(c.mean);
    mean_lin += p * m;
    second += p * (dgp.beta.dot(c.cov * dgp.beta) + m * m);
  }
  const double var_y = second - mean_lin * mean_lin + dgp.noise_sigma * dgp.noise_sigma;
  std::cout << fmt::format("closed_form_risk: {}\n", format_real(risk));
  std::cout << fmt::format("var_y: {}\n", format_real(var_y));
  if (var_y > 0.0) {
    std::cout << fmt::format("bayes_r2: {}\n", format_real(1.0 - risk / var_y));
  } else {
    std::cout << "bayes_r2: undefined (Y is constant)\n";
  }

  if (monte_carlo > 0) {
    const ExpandedBayesCoefficients coeffs = compute_delta(model, dgp);
    Rng rng(g.seed.value_or(0));
    const long long chunk = 1'000'000;
    double sum = 0.0, sum_sq = 0.0;
    long long done = 0;
    for (std::uint64_t block = 0; done < monte_carlo; ++block) {
      const long long n = std::min(chunk, monte_carlo - done);
      Rng x_rng = rng.split(2 * block), y_rng = rng.split(2 * block + 1);
      const auto [masked, complete] = model.sample(n, x_rng);
      const Vector y = gen_response(complete, dgp, y_rng);
      const Vector err = (y - predict_expanded(coeffs, masked)).array().square();
      sum += err.sum();
      sum_sq += err.squaredNorm();
      done += n;
    }
    const double n = static_cast<double>(done);
    const double mc = sum / n;
    const double se = std::sqrt(std::max(0.0, sum_sq / n - mc * mc) / n);
    std::cout << fmt::format("monte_carlo_samples: {}\n", done);
    std::cout << fmt::format("monte_carlo_risk: {}\n", format_real(mc));
    std::cout << fmt::format("monte_carlo_se: {}\n", format_real(se));
    if (se > 0.0) std::cout << fmt::format("z_score: {:.3f}\n", (mc - risk) / se);
  }
  return 0;
}

int cmd_fit(const Globals& g, const std::string& data_path, const std::string& y_path, const std::string& kind,
            const std::string& params_text, const std::string& sidecar_path, std::string model_path) {
  json spec_json{{"kind", kind}};
  if (!params_text.empty()) {
    try {
      spec_json["params"] = json::parse(params_text);
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("--params: invalid JSON: {}", e.what()));
    }
  }
  const EstimatorSpec spec = estimator_spec_from_json(spec_json);
  const MaskedMatrix data = read_masked_csv_file(data_path);
  const Vector y = read_vector_csv_file(y_path);
  if (y.size() != data.rows()) throw ConfigError("data and response row counts differ");
  std::optional<ScenarioParams> truth;
  if (!sidecar_path.empty()) truth = scenario_params_from_json(read_json_file(sidecar_path));
  const std::uint64_t seed = g.seed.value_or(0);
  Rng rng(seed);
  FitOutcome fit = fit_estimator(spec, data, y, rng, truth ? &*truth : nullptr);
  if (model_path.empty()) model_path = (out_dir(g) / "model.json").string();
  const json meta{{"estimator", {{"kind", spec.kind}, {"params", spec.params}}},
                  {"hyperparams", fit.hyperparams},
                  {"seed", seed},
                  {"n_train", data.rows()}};
  save_predictor(model_path, *fit.model, meta);
  std::cout << fmt::format("{} -> {}\n", fit.model->descriptor(), model_path);
  return 0;
}

int cmd_predict(const Globals& g, const std::string& model_path, const std::string& data_path,
                std::string output_path) {
  const auto model = load_predictor(model_path);
  const MaskedMatrix data = read_masked_csv_file(data_path);
  const Vector pred = model->predict(data);
  if (output_path.empty()) output_path = (out_dir(g) / "predictions.csv").string();
  write_vector_csv_file(output_path, pred, "y_pred");
  std::cout << fmt::format("wrote {} predictions to {}\n", pred.size(), output_path);
  return 0;
}

int write_grid_outputs(const Globals& g, const ExperimentConfig& cfg, const std::vector<RunResult>& results,
                       const std::string& command, bool width_axis) {
  const fs::path dir = out_dir(g);
  std::ostringstream rows, aggs;
  write_results_csv(rows, results, cfg.record_wall_time);
  const auto agg = aggregate(results);
  write_aggregates_csv(aggs, agg);
  write_text(dir / "results.csv", rows.str());
  write_text(dir / "aggregates.csv", aggs.str());
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.ok() ? 0 : 1;
  const json manifest{{"command", command},
                      {"config", to_json(cfg)},
                      {"ci_method", "normal approximation: mean +/- 1.96 * sample sd / sqrt(successful reps)"},
                      {"cells", results.size()},
                      {"failed_cells", failed}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  const std::string sid = scenario_id(cfg.scenario);
  const std::string stem = width_axis ? "width_sweep_" : "learning_curve_";
  write_text(dir / (stem + sid + ".svg"), render_svg(results_chart(agg, sid, width_axis)));
  std::cout << fmt::format("cells: {} ok, {} failed\n", results.size() - failed, failed);
  for (const auto& r : results) {
    if (!r.ok()) std::cerr << fmt::format("  {} n={} rep={}: {}\n", r.estimator, r.n_train, r.rep, r.status);
  }
  return failed < results.size() ? 0 : 2;
}

int cmd_learning_curve(const Globals& g, const std::string& config_path) {
  ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
  if (g.seed) cfg.master_seed = *g.seed;
  return write_grid_outputs(g, cfg, learning_curve(cfg, g.jobs), "learning-curve", false);
}

int cmd_width_sweep(const Globals& g, const std::string& config_path) {
  ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
  if (g.seed) cfg.master_seed = *g.seed;
  if (cfg.widths.empty()) throw ConfigError("width sweep config needs \"widths\"");
  return write_grid_outputs(g, cfg, width_sweep(cfg, cfg.widths, g.jobs), "width-sweep", true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear prediction with missing values: simulation, estimators and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed (overrides the config file)");
  app.add_option("--jobs", g.jobs, "Parallel experiment cells")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  std::string config_path, sidecar, data_path, y_path, kind, params_text, model_path, output_path;
  long long monte_carlo = 0;

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario and write data files plus a parameter sidecar");
  sim->add_option("config", config_path, "Simulation config JSON")->required();

  auto* risk = app.add_subcommand("bayes-risk", "Closed-form Bayes risk from a parameter sidecar");
  risk->add_option("sidecar", sidecar, "Sidecar JSON written by simulate")->required();
  risk->add_option("--monte-carlo", monte_carlo, "Monte-Carlo confirmation sample count")->check(CLI::NonNegativeNumber);

  auto* fit = app.add_subcommand("fit", "Fit an estimator and write a model JSON");
  fit->add_option("--data", data_path, "Masked CSV")->required();
  fit->add_option("--y", y_path, "Response CSV")->required();
  fit->add_option("--estimator", kind, "Estimator kind")->required();
  fit->add_option("--params", params_text, "Estimator hyperparameters as a JSON object");
  fit->add_option("--sidecar", sidecar, "Parameter sidecar (bayes_oracle only)");
  fit->add_option("--model", model_path, "Output model path (default: <out>/model.json)");

  auto* pred = app.add_subcommand("predict", "Predict with a saved model");
  pred->add_option("--model", model_path, "Model JSON")->required();
  pred->add_option("--data", data_path, "Masked CSV")->required();
  pred->add_option("--output", output_path, "Predictions CSV (default: <out>/predictions.csv)");

  auto* lc = app.add_subcommand("learning-curve", "Run a learning-curve grid");
  lc->add_option("config", config_path, "Experiment config JSON")->required();

  auto* ws = app.add_subcommand("width-sweep", "Run an MLP hidden-width sweep");
  ws->add_option("config", config_path, "Experiment config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*sim) return cmd_simulate(g, config_path);
    if (*risk) return cmd_bayes_risk(g, sidecar, monte_carlo);
    if (*fit) return cmd_fit(g, data_path, y_path, kind, params_text, sidecar, model_path);
    if (*pred) return cmd_predict(g, model_path, data_path, output_path);
    if (*lc) return cmd_learning_curve(g, config_path);
    if (*ws) return cmd_width_sweep(g, config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
