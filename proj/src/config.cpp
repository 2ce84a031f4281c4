#include "mispred/config.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <initializer_list>
#include <limits>

#include "mispred/errors.hpp"

namespace mispred {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& context) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", context));
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& context) {
  require_object(j, context);
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError(fmt::format("{}: unknown key \"{}\"", context, item.key()));
  }
}

const json& field(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw ConfigError(fmt::format("{}: missing required key \"{}\"", context, key));
  return j.at(key);
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(fmt::format("\"{}\" must be a number", key));
  return v.get<double>();
}

long long as_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(fmt::format("\"{}\" must be an integer", key));
  return v.get<long long>();
}

int as_int(const json& v, const std::string& key) {
  const long long x = as_integer(v, key);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(fmt::format("\"{}\" is out of range", key));
  }
  return static_cast<int>(x);
}

std::uint64_t as_seed(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const long long x = as_integer(v, key);
  if (x < 0) throw ConfigError(fmt::format("\"{}\" must be nonnegative", key));
  return static_cast<std::uint64_t>(x);
}

std::vector<double> as_reals(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(fmt::format("\"{}\" must be an array of numbers", key));
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_real(e, key));
  return out;
}

Vector as_vector(const json& v, const std::string& key) {
  const auto xs = as_reals(v, key);
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Matrix as_matrix(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(fmt::format("\"{}\" must be an array of rows", key));
  const auto rows = static_cast<Eigen::Index>(v.size());
  Matrix m(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = as_reals(v[static_cast<std::size_t>(i)], key);
    if (static_cast<Eigen::Index>(row.size()) != rows) {
      throw ConfigError(fmt::format("\"{}\" must be a square matrix", key));
    }
    for (Eigen::Index k = 0; k < rows; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
  }
  return m;
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vector r = m.row(i).transpose();
    rows.push_back(vector_json(r));
  }
  return rows;
}

std::vector<int> as_counts(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) throw ConfigError(fmt::format("\"{}\" must be a nonempty array", key));
  std::vector<int> out;
  for (const auto& e : v) {
    const int x = as_int(e, key);
    if (x < 1) throw ConfigError(fmt::format("\"{}\" entries must be >= 1", key));
    out.push_back(x);
  }
  return out;
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {}", path));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path, e.what()));
  }
}

ScenarioConfig scenario_config_from_json(const json& j) {
  const std::string ctx = "scenario";
  reject_unknown(j, {"kind", "dim", "seed", "beta0", "beta", "noise_sigma", "target_missing_rate", "lambda"}, ctx);
  ScenarioConfig c;
  const json& kind = field(j, "kind", ctx);
  if (!kind.is_string()) throw ConfigError("\"kind\" must be a string");
  try {
    c.kind = scenario_kind_from_string(kind.get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.dim = as_int(field(j, "dim", ctx), "dim");
  if (c.dim < 1 || c.dim > kMaxPatternDim) {
    throw ConfigError(fmt::format("\"dim\" must be in [1, {}]", kMaxPatternDim));
  }
  if (j.contains("seed")) c.seed = as_seed(j["seed"], "seed");
  if (j.contains("beta0")) c.beta0 = as_real(j["beta0"], "beta0");
  if (j.contains("beta")) {
    c.beta = as_vector(j["beta"], "beta");
    if (c.beta->size() != c.dim) throw ConfigError("\"beta\" length must equal dim");
  }
  if (j.contains("noise_sigma")) {
    c.noise_sigma = as_real(j["noise_sigma"], "noise_sigma");
    if (!(c.noise_sigma >= 0.0)) throw ConfigError("\"noise_sigma\" must be nonnegative");
  }
  const bool selfmask = c.kind == ScenarioKind::SelfMasking;
  if (j.contains("target_missing_rate")) {
    if (!selfmask) throw ConfigError("\"target_missing_rate\" applies to selfmasking only");
    c.target_missing_rate = as_real(j["target_missing_rate"], "target_missing_rate");
    if (!(c.target_missing_rate > 0.0 && c.target_missing_rate < 1.0)) {
      throw ConfigError("\"target_missing_rate\" must be in (0, 1)");
    }
  }
  if (j.contains("lambda")) {
    if (!selfmask) throw ConfigError("\"lambda\" applies to selfmasking only");
    c.lambda = as_vector(j["lambda"], "lambda");
    if (c.lambda->size() != c.dim) throw ConfigError("\"lambda\" length must equal dim");
    if ((c.lambda->array() <= 0.0).any()) throw ConfigError("\"lambda\" entries must be positive");
  }
  return c;
}

json to_json(const ScenarioConfig& c) {
  json j{{"kind", to_string(c.kind)}, {"dim", c.dim}, {"seed", c.seed}, {"beta0", c.beta0},
         {"beta", vector_json(c.dgp().beta)}, {"noise_sigma", c.noise_sigma}};
  if (c.kind == ScenarioKind::SelfMasking) {
    j["target_missing_rate"] = c.target_missing_rate;
    j["lambda"] = c.lambda ? vector_json(*c.lambda) : vector_json(Vector::Ones(c.dim));
  }
  return j;
}

ExpandedOptions expanded_options_from_json(const json& p) {
  reject_unknown(p, {"lambda_grid", "folds"}, "expanded params");
  ExpandedOptions o;
  if (p.contains("lambda_grid")) {
    o.lambda_grid = as_reals(p["lambda_grid"], "lambda_grid");
    if (o.lambda_grid.empty()) throw ConfigError("\"lambda_grid\" must be nonempty");
    for (double l : o.lambda_grid)
      if (!(l >= 0.0)) throw ConfigError("\"lambda_grid\" entries must be nonnegative");
  }
  if (p.contains("folds")) {
    o.folds = as_int(p["folds"], "folds");
    if (o.folds < 2) throw ConfigError("\"folds\" must be >= 2");
  }
  return o;
}

EmOptions em_options_from_json(const json& p) {
  reject_unknown(p, {"max_iter", "tol"}, "em params");
  EmOptions o;
  if (p.contains("max_iter")) {
    o.max_iter = as_int(p["max_iter"], "max_iter");
    if (o.max_iter < 1) throw ConfigError("\"max_iter\" must be >= 1");
  }
  if (p.contains("tol")) {
    o.tol = as_real(p["tol"], "tol");
    if (!(o.tol >= 0.0)) throw ConfigError("\"tol\" must be nonnegative");
  }
  return o;
}

int iter_impute_sweeps_from_json(const json& p) {
  reject_unknown(p, {"sweeps"}, "iter_impute params");
  int sweeps = 10;
  if (p.contains("sweeps")) sweeps = as_int(p["sweeps"], "sweeps");
  if (sweeps < 1) throw ConfigError("\"sweeps\" must be >= 1");
  return sweeps;
}

MlpOptions mlp_options_from_json(const json& p) {
  reject_unknown(p,
                 {"hidden_width", "decay_grid", "epochs", "batch_size", "learning_rate", "beta1", "beta2",
                  "validation_fraction", "patience"},
                 "mlp params");
  MlpOptions o;
  if (p.contains("hidden_width")) o.hidden_width = as_int(p["hidden_width"], "hidden_width");
  if (p.contains("decay_grid")) o.decay_grid = as_reals(p["decay_grid"], "decay_grid");
  if (p.contains("epochs")) o.epochs = as_int(p["epochs"], "epochs");
  if (p.contains("batch_size")) o.batch_size = as_int(p["batch_size"], "batch_size");
  if (p.contains("learning_rate")) o.learning_rate = as_real(p["learning_rate"], "learning_rate");
  if (p.contains("beta1")) o.beta1 = as_real(p["beta1"], "beta1");
  if (p.contains("beta2")) o.beta2 = as_real(p["beta2"], "beta2");
  if (p.contains("validation_fraction")) {
    o.validation_fraction = as_real(p["validation_fraction"], "validation_fraction");
  }
  if (p.contains("patience")) o.patience = as_int(p["patience"], "patience");
  if (o.hidden_width < 1) throw ConfigError("\"hidden_width\" must be >= 1");
  if (o.decay_grid.empty()) throw ConfigError("\"decay_grid\" must be nonempty");
  if (o.epochs < 1 || o.batch_size < 1) throw ConfigError("\"epochs\" and \"batch_size\" must be >= 1");
  if (!(o.learning_rate > 0.0)) throw ConfigError("\"learning_rate\" must be positive");
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0 && o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw ConfigError("\"beta1\" and \"beta2\" must be in [0, 1)");
  }
  if (!(o.validation_fraction >= 0.0 && o.validation_fraction < 1.0)) {
    throw ConfigError("\"validation_fraction\" must be in [0, 1)");
  }
  if (o.patience < 0) throw ConfigError("\"patience\" must be >= 0");
  return o;
}

json to_json(const MlpOptions& o) {
  return {{"hidden_width", o.hidden_width}, {"decay_grid", o.decay_grid},   {"epochs", o.epochs},
          {"batch_size", o.batch_size},     {"learning_rate", o.learning_rate}, {"beta1", o.beta1},
          {"beta2", o.beta2},               {"validation_fraction", o.validation_fraction},
          {"patience", o.patience}};
}

EstimatorSpec estimator_spec_from_json(const json& j) {
  EstimatorSpec s;
  if (j.is_string()) {
    s.kind = j.get<std::string>();
  } else {
    reject_unknown(j, {"kind", "params", "name"}, "estimator");
    const json& kind = field(j, "kind", "estimator");
    if (!kind.is_string()) throw ConfigError("estimator \"kind\" must be a string");
    s.kind = kind.get<std::string>();
    if (j.contains("params")) {
      require_object(j["params"], "estimator params");
      s.params = j["params"];
    }
    if (j.contains("name")) {
      if (!j["name"].is_string()) throw ConfigError("estimator \"name\" must be a string");
      s.name = j["name"].get<std::string>();
    }
  }
  // Validate eagerly so typos surface before any fitting starts.
  if (s.kind == "constant_imputed" || s.kind == "bayes_oracle") {
    reject_unknown(s.params, {}, s.kind + " params");
  } else if (s.kind == "expanded") {
    expanded_options_from_json(s.params);
  } else if (s.kind == "em") {
    em_options_from_json(s.params);
  } else if (s.kind == "iter_impute") {
    iter_impute_sweeps_from_json(s.params);
  } else if (s.kind == "mlp") {
    mlp_options_from_json(s.params);
  } else {
    throw ConfigError(fmt::format("unknown estimator kind \"{}\"", s.kind));
  }
  return s;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  const std::string ctx = "experiment";
  reject_unknown(j,
                 {"scenario", "estimators", "n_grid", "test_fraction", "repetitions", "master_seed", "n_test",
                  "widths", "n_train", "record_wall_time"},
                 ctx);
  ExperimentConfig c;
  c.scenario = scenario_config_from_json(field(j, "scenario", ctx));
  if (j.contains("estimators")) {
    const json& est = j["estimators"];
    if (!est.is_array()) throw ConfigError("\"estimators\" must be an array");
    for (const auto& e : est) c.estimators.push_back(estimator_spec_from_json(e));
  }
  if (j.contains("n_grid")) {
    c.n_grid = as_counts(j["n_grid"], "n_grid");
    for (std::size_t i = 1; i < c.n_grid.size(); ++i) {
      if (c.n_grid[i] <= c.n_grid[i - 1]) throw ConfigError("\"n_grid\" must be strictly increasing");
    }
  }
  if (j.contains("test_fraction")) {
    c.test_fraction = as_real(j["test_fraction"], "test_fraction");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
      throw ConfigError("\"test_fraction\" must be in (0, 1)");
    }
  }
  if (j.contains("repetitions")) {
    c.repetitions = as_int(j["repetitions"], "repetitions");
    if (c.repetitions < 1) throw ConfigError("\"repetitions\" must be >= 1");
  }
  if (j.contains("master_seed")) c.master_seed = as_seed(j["master_seed"], "master_seed");
  if (j.contains("n_test")) {
    c.n_test = as_int(j["n_test"], "n_test");
    if (*c.n_test < 2) throw ConfigError("\"n_test\" must be >= 2");
  }
  if (j.contains("widths")) c.widths = as_counts(j["widths"], "widths");
  if (j.contains("n_train")) {
    c.n_train = as_int(j["n_train"], "n_train");
    if (*c.n_train < 2) throw ConfigError("\"n_train\" must be >= 2");
  }
  if (j.contains("record_wall_time")) {
    if (!j["record_wall_time"].is_boolean()) throw ConfigError("\"record_wall_time\" must be a boolean");
    c.record_wall_time = j["record_wall_time"].get<bool>();
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json est = json::array();
  for (const auto& e : c.estimators) {
    json item{{"kind", e.kind}, {"params", e.params}};
    if (!e.name.empty()) item["name"] = e.name;
    est.push_back(item);
  }
  json j{{"scenario", to_json(c.scenario)},  {"estimators", est},
         {"n_grid", c.n_grid},               {"test_fraction", c.test_fraction},
         {"repetitions", c.repetitions},     {"master_seed", c.master_seed},
         {"record_wall_time", c.record_wall_time}};
  if (c.n_test) j["n_test"] = *c.n_test;
  if (!c.widths.empty()) j["widths"] = c.widths;
  if (c.n_train) j["n_train"] = *c.n_train;
  return j;
}

SimulateConfig simulate_config_from_json(const json& j) {
  reject_unknown(j, {"scenario", "n"}, "simulate");
  SimulateConfig c;
  c.scenario = scenario_config_from_json(field(j, "scenario", "simulate"));
  c.n = as_int(field(j, "n", "simulate"), "n");
  if (c.n < 1) throw ConfigError("\"n\" must be >= 1");
  return c;
}

json scenario_params_to_json(const ScenarioParams& p) {
  json comps = json::array();
  for (const auto& c : p.components) comps.push_back({{"mean", vector_json(c.mean)}, {"cov", matrix_json(c.cov)}});
  json j{{"kind", to_string(p.config.kind)},
         {"dim", p.config.dim},
         {"seed", p.config.seed},
         {"beta0", p.dgp.beta0},
         {"beta", vector_json(p.dgp.beta)},
         {"noise_sigma", p.dgp.noise_sigma},
         {"covariance_diagonal", kCovarianceDiagonal},
         {"components", comps}};
  if (p.config.satisfies_pattern_mixture()) {
    j["assignment"] = p.assignment;
    j["pattern_distribution"] = "uniform";
  }
  if (p.selfmask) {
    j["selfmask"] = {{"lambda", vector_json(p.selfmask->lambda)},
                     {"mu0", vector_json(p.selfmask->mu0)},
                     {"target_rate", p.selfmask->target_rate}};
  }
  return j;
}

namespace {

void check_sidecar_keys(const json& j) {
  reject_unknown(j,
                 {"kind", "dim", "seed", "beta0", "beta", "noise_sigma", "covariance_diagonal", "components",
                  "assignment", "pattern_distribution", "pattern_probs", "selfmask"},
                 "sidecar");
}

std::vector<GaussianComponent> sidecar_components(const json& j, int d) {
  const json& comps = field(j, "components", "sidecar");
  if (!comps.is_array() || comps.empty()) throw ConfigError("\"components\" must be a nonempty array");
  std::vector<GaussianComponent> out;
  for (const auto& c : comps) {
    reject_unknown(c, {"mean", "cov"}, "component");
    GaussianComponent g{as_vector(field(c, "mean", "component"), "mean"),
                        as_matrix(field(c, "cov", "component"), "cov")};
    if (g.mean.size() != d || g.cov.rows() != d) throw ConfigError("component shape does not match dim");
    out.push_back(std::move(g));
  }
  return out;
}

LinearDGP sidecar_dgp(const json& j, int d) {
  LinearDGP dgp;
  dgp.beta0 = j.contains("beta0") ? as_real(j["beta0"], "beta0") : 1.0;
  dgp.beta = j.contains("beta") ? as_vector(j["beta"], "beta") : Vector::Ones(d);
  dgp.noise_sigma = j.contains("noise_sigma") ? as_real(j["noise_sigma"], "noise_sigma") : 0.0;
  if (dgp.beta.size() != d) throw ConfigError("\"beta\" length must equal dim");
  if (!(dgp.noise_sigma >= 0.0)) throw ConfigError("\"noise_sigma\" must be nonnegative");
  return dgp;
}

std::vector<int> sidecar_assignment(const json& j, int d, std::size_t n_comp) {
  const std::size_t n_pat = std::size_t{1} << d;
  std::vector<int> a;
  if (j.contains("assignment")) {
    const json& v = j["assignment"];
    if (!v.is_array() || v.size() != n_pat) {
      throw ConfigError(fmt::format("\"assignment\" must have 2^dim = {} entries", n_pat));
    }
    for (const auto& e : v) {
      const int k = as_int(e, "assignment");
      if (k < 0 || static_cast<std::size_t>(k) >= n_comp) throw ConfigError("\"assignment\" entry out of range");
      a.push_back(k);
    }
  } else {
    if (n_comp != 1) throw ConfigError("\"assignment\" is required with several components");
    a.assign(n_pat, 0);
  }
  return a;
}

}  // namespace

ScenarioParams scenario_params_from_json(const json& j) {
  check_sidecar_keys(j);
  ScenarioParams p;
  json cfg{{"kind", field(j, "kind", "sidecar")}, {"dim", field(j, "dim", "sidecar")}};
  if (j.contains("seed")) cfg["seed"] = j["seed"];
  p.config = scenario_config_from_json(cfg);
  const int d = p.config.dim;
  p.dgp = sidecar_dgp(j, d);
  p.config.beta0 = p.dgp.beta0;
  p.config.beta = p.dgp.beta;
  p.config.noise_sigma = p.dgp.noise_sigma;
  p.components = sidecar_components(j, d);
  if (p.config.satisfies_pattern_mixture()) {
    p.assignment = sidecar_assignment(j, d, p.components.size());
  } else {
    const json& sm = field(j, "selfmask", "sidecar");
    reject_unknown(sm, {"lambda", "mu0", "target_rate"}, "selfmask");
    SelfMaskParams s{as_vector(field(sm, "lambda", "selfmask"), "lambda"),
                     as_vector(field(sm, "mu0", "selfmask"), "mu0"),
                     as_real(field(sm, "target_rate", "selfmask"), "target_rate")};
    if (s.lambda.size() != d || s.mu0.size() != d) throw ConfigError("selfmask vectors must have length dim");
    p.config.lambda = s.lambda;
    p.config.target_missing_rate = s.target_rate;
    p.selfmask = std::move(s);
  }
  return p;
}

PatternMixtureModel mixture_from_sidecar(const json& j, LinearDGP& dgp) {
  check_sidecar_keys(j);
  const json& kind = field(j, "kind", "sidecar");
  if (kind == "selfmasking") {
    throw ConfigError(
        "self-masking data is not a Gaussian pattern mixture: the distribution of X given the mask is not "
        "Gaussian, so the closed-form Bayes risk does not apply");
  }
  json cfg{{"kind", kind}, {"dim", field(j, "dim", "sidecar")}};
  const int d = scenario_config_from_json(cfg).dim;
  dgp = sidecar_dgp(j, d);
  auto comps = sidecar_components(j, d);
  auto assignment = sidecar_assignment(j, d, comps.size());
  try {
    if (j.contains("pattern_probs")) {
      auto probs = as_reals(j["pattern_probs"], "pattern_probs");
      if (probs.size() != assignment.size()) throw ConfigError("\"pattern_probs\" must have 2^dim entries");
      return PatternMixtureModel(d, std::move(comps), std::move(assignment), std::move(probs));
    }
    return PatternMixtureModel::uniform_patterns(d, std::move(comps), std::move(assignment));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(fmt::format("sidecar: {}", e.what()));
  }
}

}  // namespace mispred
