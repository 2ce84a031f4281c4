#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mispred/estimators.hpp"
#include "mispred/simulate.hpp"
#include "mispred/svg_chart.hpp"

namespace mispred {

/// An estimator kind plus its hyperparameters. Recognised kinds:
/// constant_imputed, expanded, em, iter_impute, mlp, bayes_oracle.
struct EstimatorSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  std::string name;  // optional display label; defaults to kind

  std::string label() const { return name.empty() ? kind : name; }
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<EstimatorSpec> estimators;
  std::vector<int> n_grid;
  double test_fraction = 0.25;
  int repetitions = 5;
  std::uint64_t master_seed = 0;
  std::optional<int> n_test;     // overrides the test_fraction-derived size
  std::vector<int> widths;       // width sweep only
  std::optional<int> n_train;    // width sweep only
  bool record_wall_time = false; // off keeps result files byte-reproducible
};

struct RunResult {
  std::string scenario;
  std::string estimator;
  int n_train = 0;
  int rep = 0;
  std::optional<int> width;
  double r2_train = 0.0;
  double r2_test = 0.0;
  std::optional<double> r2_bayes;
  double wall_ms = 0.0;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

struct AggregateRow {
  std::string scenario;
  std::string estimator;
  int n_train = 0;
  std::optional<int> width;
  int n_ok = 0;
  int n_failed = 0;
  double r2_train_mean = 0.0;
  double r2_test_mean = 0.0;
  double r2_test_sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> r2_bayes_mean;
};

/// 1 - SSE / SST. Throws DegenerateTarget when y_true is constant.
double r2_score(const Vector& y_true, const Vector& y_pred);

/// 1 - bayes_risk / (population variance of y_test).
double bayes_r2(const PatternMixtureModel& model, const LinearDGP& dgp, const Vector& y_test);

std::string scenario_id(const ScenarioConfig& config);

struct FitOutcome {
  std::unique_ptr<FittedPredictor> model;
  nlohmann::json hyperparams;
};

/// Fits one estimator. `truth` is needed only by bayes_oracle.
FitOutcome fit_estimator(const EstimatorSpec& spec, const MaskedMatrix& data, const Vector& y,
                         Rng& rng, const ScenarioParams* truth = nullptr);

/// Seeds for one cell. Generative parameters depend on the repetition only,
/// data on (n, rep), and the estimator stream additionally on the estimator.
std::uint64_t scenario_seed(const ExperimentConfig& config, int rep);
std::uint64_t data_seed(const ExperimentConfig& config, int n_train, int rep);
std::uint64_t cell_seed(const ExperimentConfig& config, const EstimatorSpec& spec, int n_train, int rep);

int test_size(const ExperimentConfig& config, int n_train);

/// Estimator failures become a result with status "failed: ...".
RunResult run_cell(const ExperimentConfig& config, const EstimatorSpec& spec, int n_train, int rep);

/// All estimators x n_grid x repetitions, sorted by (estimator order, n, rep).
std::vector<RunResult> learning_curve(const ExperimentConfig& config, int jobs = 1);

/// MLPs at each width at n = config.n_train (or the first n_grid entry). The
/// base MLP hyperparameters come from the first mlp estimator spec, if any.
std::vector<RunResult> width_sweep(const ExperimentConfig& config, const std::vector<int>& widths,
                                   int jobs = 1);

/// Mean and normal-approximation 95% band (1.96 sd / sqrt(k)) over successful reps.
std::vector<AggregateRow> aggregate(const std::vector<RunResult>& results);

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results,
                       bool with_wall_time);
void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Test R^2 against n (or hidden width), one series per estimator, with the
/// mean Bayes R^2 as a reference line when every row carries one.
LineChart results_chart(const std::vector<AggregateRow>& rows, const std::string& scenario,
                        bool width_axis);

}  // namespace mispred
