#include "mispred/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <ostream>
#include <thread>
#include <tuple>

#include "mispred/bayes.hpp"
#include "mispred/config.hpp"
#include "mispred/csv.hpp"
#include "mispred/errors.hpp"
#include "mispred/rng.hpp"

namespace mispred {

using nlohmann::json;

double r2_score(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() != y_pred.size()) throw InvalidArgument("r2_score: length mismatch");
  if (y_true.size() < 2) throw InvalidArgument("r2_score: need at least two values");
  const double mean = y_true.mean();
  const double sst = (y_true.array() - mean).square().sum();
  if (!(sst > 0.0)) throw DegenerateTarget("r2_score: y_true is constant");
  return 1.0 - (y_true - y_pred).squaredNorm() / sst;
}

double bayes_r2(const PatternMixtureModel& model, const LinearDGP& dgp, const Vector& y_test) {
  if (y_test.size() < 2) throw InvalidArgument("bayes_r2: need at least two values");
  const double var = (y_test.array() - y_test.mean()).square().mean();
  if (!(var > 0.0)) throw DegenerateTarget("bayes_r2: y_test is constant");
  return 1.0 - bayes_risk(model, dgp) / var;
}

std::string scenario_id(const ScenarioConfig& config) {
  return fmt::format("{}_d{}", to_string(config.kind), config.dim);
}

FitOutcome fit_estimator(const EstimatorSpec& spec, const MaskedMatrix& data, const Vector& y, Rng& rng,
                         const ScenarioParams* truth) {
  FitOutcome out;
  const std::string& kind = spec.kind;
  if (kind == "constant_imputed") {
    out.model = std::make_unique<ConstantImputedLR>(fit_constant_imputed(data, y));
    out.hyperparams = json::object();
  } else if (kind == "expanded") {
    ExpandedOptions opt = expanded_options_from_json(spec.params);
    opt.seed = rng.split("folds").seed();
    auto m = std::make_unique<ExpandedLR>(fit_expanded(data, y, opt));
    out.hyperparams = {{"lambda", m->ridge_lambda()}, {"lambda_grid", opt.lambda_grid},
                       {"folds", opt.folds},          {"cv_scores", m->cv_scores}};
    out.model = std::move(m);
  } else if (kind == "em") {
    const EmOptions opt = em_options_from_json(spec.params);
    auto m = std::make_unique<EmLR>(fit_em(data, y, opt));
    out.hyperparams = {{"max_iter", opt.max_iter}, {"tol", opt.tol}, {"iterations", m->iterations}};
    out.model = std::move(m);
  } else if (kind == "iter_impute") {
    const int sweeps = iter_impute_sweeps_from_json(spec.params);
    out.model = std::make_unique<IterImputeLR>(fit_iter_impute(data, y, sweeps));
    out.hyperparams = {{"sweeps", sweeps}};
  } else if (kind == "mlp") {
    const MlpOptions opt = mlp_options_from_json(spec.params);
    Rng fit_rng = rng.split("mlp");
    auto m = std::make_unique<MlpRegressor>(fit_mlp(data, y, opt, fit_rng));
    out.hyperparams = to_json(opt);
    out.hyperparams["weight_decay"] = m->weight_decay();
    out.hyperparams["epochs_run"] = m->epochs_run;
    out.hyperparams["validation_losses"] = m->validation_losses;
    out.model = std::move(m);
  } else if (kind == "bayes_oracle") {
    if (truth == nullptr || !truth->config.satisfies_pattern_mixture()) {
      throw InvalidArgument("bayes_oracle needs a pattern-mixture scenario with known parameters");
    }
    out.model = std::make_unique<BayesOracle>(compute_delta(*truth->mixture_model(), truth->dgp));
    out.hyperparams = json::object();
  } else {
    throw ConfigError(fmt::format("unknown estimator kind \"{}\"", kind));
  }
  return out;
}

std::uint64_t scenario_seed(const ExperimentConfig& config, int rep) {
  const std::string id = scenario_id(config.scenario);
  return derive_seed(config.master_seed, {hash_tag("scenario"), hash_tag(id), config.scenario.seed,
                                          static_cast<std::uint64_t>(rep)});
}

std::uint64_t data_seed(const ExperimentConfig& config, int n_train, int rep) {
  const std::string id = scenario_id(config.scenario);
  return derive_seed(config.master_seed, {hash_tag("data"), hash_tag(id), config.scenario.seed,
                                          static_cast<std::uint64_t>(n_train), static_cast<std::uint64_t>(rep)});
}

std::uint64_t cell_seed(const ExperimentConfig& config, const EstimatorSpec& spec, int n_train, int rep) {
  const std::string id = scenario_id(config.scenario);
  return derive_seed(config.master_seed,
                     {hash_tag("fit"), hash_tag(id), config.scenario.seed, hash_tag(spec.label()),
                      static_cast<std::uint64_t>(n_train), static_cast<std::uint64_t>(rep)});
}

int test_size(const ExperimentConfig& config, int n_train) {
  if (config.n_test) return *config.n_test;
  const double f = config.test_fraction;
  return std::max(2, static_cast<int>(std::llround(n_train * f / (1.0 - f))));
}

RunResult run_cell(const ExperimentConfig& config, const EstimatorSpec& spec, int n_train, int rep) {
  RunResult r;
  r.scenario = scenario_id(config.scenario);
  r.estimator = spec.label();
  r.n_train = n_train;
  r.rep = rep;
  r.seed = cell_seed(config, spec, n_train, rep);
  try {
    ScenarioConfig sc = config.scenario;
    sc.seed = scenario_seed(config, rep);
    const ScenarioParams params = make_scenario(sc);
    const int n_test = test_size(config, n_train);
    Rng data_rng(data_seed(config, n_train, rep));
    const SimulatedData sim = simulate(params, n_train + n_test, data_rng);
    const MaskedMatrix train = sim.masked.head_rows(n_train);
    const MaskedMatrix test = sim.masked.tail_rows(n_test);
    const Vector y_train = sim.y.head(n_train);
    const Vector y_test = sim.y.tail(n_test);
    if (auto model = params.mixture_model()) r.r2_bayes = bayes_r2(*model, params.dgp, y_test);

    Rng fit_rng(r.seed);
    const auto t0 = std::chrono::steady_clock::now();
    FitOutcome fit = fit_estimator(spec, train, y_train, fit_rng, &params);
    const auto t1 = std::chrono::steady_clock::now();
    r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    r.hyperparams = std::move(fit.hyperparams);
    r.r2_train = r2_score(y_train, fit.model->predict(train));
    r.r2_test = r2_score(y_test, fit.model->predict(test));
    if (!std::isfinite(r.r2_train) || !std::isfinite(r.r2_test)) throw NonFiniteLoss("non-finite R^2");
  } catch (const std::exception& e) {
    r.status = fmt::format("failed: {}", e.what());
  }
  return r;
}

namespace {

struct Task {
  EstimatorSpec spec;
  int n_train;
  int rep;
  std::optional<int> width;
};

std::vector<RunResult> run_tasks(const ExperimentConfig& config, const std::vector<Task>& tasks, int jobs) {
  std::vector<RunResult> results(tasks.size());
  auto work = [&](std::size_t i) {
    results[i] = run_cell(config, tasks[i].spec, tasks[i].n_train, tasks[i].rep);
    results[i].width = tasks[i].width;
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, tasks.size()); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) work(i);
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace

std::vector<RunResult> learning_curve(const ExperimentConfig& config, int jobs) {
  if (config.estimators.empty()) throw ConfigError("learning curve needs at least one estimator");
  if (config.n_grid.empty()) throw ConfigError("learning curve needs a nonempty n_grid");
  std::vector<Task> tasks;
  for (const auto& spec : config.estimators)
    for (int n : config.n_grid)
      for (int rep = 0; rep < config.repetitions; ++rep) tasks.push_back({spec, n, rep, std::nullopt});
  return run_tasks(config, tasks, jobs);
}

std::vector<RunResult> width_sweep(const ExperimentConfig& config, const std::vector<int>& widths, int jobs) {
  if (widths.empty()) throw ConfigError("width sweep needs a nonempty width list");
  int n_train = 0;
  if (config.n_train) {
    n_train = *config.n_train;
  } else if (!config.n_grid.empty()) {
    n_train = config.n_grid.front();
  } else {
    throw ConfigError("width sweep needs \"n_train\" (or an n_grid entry)");
  }
  EstimatorSpec base{"mlp", json::object(), ""};
  for (const auto& s : config.estimators) {
    if (s.kind == "mlp") {
      base = s;
      break;
    }
  }
  std::vector<Task> tasks;
  for (int w : widths) {
    EstimatorSpec spec = base;
    spec.params["hidden_width"] = w;
    spec.name = fmt::format("mlp_h{}", w);
    for (int rep = 0; rep < config.repetitions; ++rep) tasks.push_back({spec, n_train, rep, w});
  }
  return run_tasks(config, tasks, jobs);
}

std::vector<AggregateRow> aggregate(const std::vector<RunResult>& results) {
  using Key = std::tuple<std::string, std::string, int, int>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RunResult*>> groups;
  for (const auto& r : results) {
    Key k{r.scenario, r.estimator, r.n_train, r.width.value_or(-1)};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const auto& k : order) {
    const auto& members = groups[k];
    AggregateRow a;
    a.scenario = std::get<0>(k);
    a.estimator = std::get<1>(k);
    a.n_train = std::get<2>(k);
    a.width = members.front()->width;
    std::vector<double> test, train, bayes;
    bool all_bayes = true;
    for (const RunResult* r : members) {
      if (!r->ok()) {
        ++a.n_failed;
        continue;
      }
      ++a.n_ok;
      test.push_back(r->r2_test);
      train.push_back(r->r2_train);
      if (r->r2_bayes) {
        bayes.push_back(*r->r2_bayes);
      } else {
        all_bayes = false;
      }
    }
    if (a.n_ok > 0) {
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      a.r2_test_mean = mean(test);
      a.r2_train_mean = mean(train);
      if (test.size() > 1) {
        double ss = 0.0;
        for (double x : test) ss += (x - a.r2_test_mean) * (x - a.r2_test_mean);
        a.r2_test_sd = std::sqrt(ss / static_cast<double>(test.size() - 1));
      }
      const double half = 1.96 * a.r2_test_sd / std::sqrt(static_cast<double>(test.size()));
      a.ci_low = a.r2_test_mean - half;
      a.ci_high = a.r2_test_mean + half;
      if (all_bayes && !bayes.empty()) a.r2_bayes_mean = mean(bayes);
    }
    rows.push_back(std::move(a));
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results, bool with_wall_time) {
  out << "scenario,estimator,n_train,rep,r2_train,r2_test,r2_bayes,wall_ms,hyperparams,seed,status\n";
  for (const auto& r : results) {
    out << csv_field(r.scenario) << ',' << csv_field(r.estimator) << ',' << r.n_train << ',' << r.rep << ',';
    if (r.ok()) {
      out << format_real(r.r2_train) << ',' << format_real(r.r2_test) << ',';
    } else {
      out << ",,";
    }
    out << opt_real(r.r2_bayes) << ',';
    if (with_wall_time) out << fmt::format("{:.3f}", r.wall_ms);
    out << ',' << csv_field(r.hyperparams.dump()) << ',' << r.seed << ',' << csv_field(r.status) << '\n';
  }
}

void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "scenario,estimator,n_train,width,n_ok,n_failed,r2_train_mean,r2_test_mean,r2_test_sd,"
         "r2_test_ci_low,r2_test_ci_high,r2_bayes_mean,gap_to_bayes,ci_method\n";
  for (const auto& a : rows) {
    out << csv_field(a.scenario) << ',' << csv_field(a.estimator) << ',' << a.n_train << ','
        << (a.width ? std::to_string(*a.width) : "") << ',' << a.n_ok << ',' << a.n_failed << ',';
    if (a.n_ok > 0) {
      out << format_real(a.r2_train_mean) << ',' << format_real(a.r2_test_mean) << ',' << format_real(a.r2_test_sd)
          << ',' << format_real(a.ci_low) << ',' << format_real(a.ci_high) << ',';
    } else {
      out << ",,,,,";
    }
    out << opt_real(a.r2_bayes_mean) << ',';
    if (a.n_ok > 0 && a.r2_bayes_mean) out << format_real(a.r2_test_mean - *a.r2_bayes_mean);
    out << ",normal 1.96*sd/sqrt(k)\n";
  }
}

LineChart results_chart(const std::vector<AggregateRow>& rows, const std::string& scenario, bool width_axis) {
  LineChart chart;
  chart.title = width_axis ? fmt::format("{}: test R2 vs hidden width", scenario)
                           : fmt::format("{}: test R2 vs training size", scenario);
  chart.x_label = width_axis ? "hidden units" : "training samples";
  chart.y_label = "test R2";
  chart.log_x = true;
  std::vector<std::string> names;
  std::map<std::string, ChartSeries> by_name;
  double bayes_sum = 0.0;
  int bayes_count = 0;
  bool bayes_everywhere = true;
  // A width sweep is one curve over widths; learning curves get one per estimator.
  for (const auto& a : rows) {
    if (a.scenario != scenario || a.n_ok == 0) continue;
    const std::string name = width_axis ? "mlp" : a.estimator;
    auto [it, inserted] = by_name.try_emplace(name);
    if (inserted) {
      names.push_back(name);
      it->second.label = name;
    }
    ChartSeries& s = it->second;
    s.x.push_back(width_axis ? static_cast<double>(a.width.value_or(0)) : static_cast<double>(a.n_train));
    s.y.push_back(a.r2_test_mean);
    s.lo.push_back(a.ci_low);
    s.hi.push_back(a.ci_high);
    if (a.r2_bayes_mean) {
      bayes_sum += *a.r2_bayes_mean;
      ++bayes_count;
    } else {
      bayes_everywhere = false;
    }
  }
  for (const auto& n : names) {
    ChartSeries s = std::move(by_name[n]);
    std::vector<std::size_t> idx(s.x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    ChartSeries sorted{s.label, {}, {}, {}, {}};
    for (std::size_t i : idx) {
      sorted.x.push_back(s.x[i]);
      sorted.y.push_back(s.y[i]);
      sorted.lo.push_back(s.lo[i]);
      sorted.hi.push_back(s.hi[i]);
    }
    chart.series.push_back(std::move(sorted));
  }
  if (bayes_everywhere && bayes_count > 0) chart.reference = bayes_sum / bayes_count;
  return chart;
}

}  // namespace mispred
