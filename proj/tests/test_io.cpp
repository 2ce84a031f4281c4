#include <doctest.h>

#include <sstream>

#include "mispred/config.hpp"
#include "mispred/csv.hpp"
#include "mispred/errors.hpp"
#include "mispred/predictor_io.hpp"
#include "mispred/rng.hpp"

using namespace mispred;
using nlohmann::json;

namespace {

SimulatedData sample(ScenarioKind kind, int d, Eigen::Index n, std::uint64_t seed) {
  ScenarioConfig c;
  c.kind = kind;
  c.dim = d;
  c.seed = seed;
  c.noise_sigma = 0.3;
  Rng rng(seed);
  return simulate(make_scenario(c), n, rng);
}

void check_round_trip(const FittedPredictor& model, const MaskedMatrix& data) {
  const std::string text = predictor_to_json(model, {{"seed", 5}}).dump();
  const auto back = predictor_from_json(json::parse(text));
  CHECK(back->kind() == model.kind());
  CHECK(back->param_count() == model.param_count());
  const Vector a = model.predict(data), b = back->predict(data);
  CHECK((a.array() == b.array()).all());
  // Re-serializing the restored model gives the same text.
  CHECK(predictor_to_json(*back, {{"seed", 5}}).dump() == text);
}

}  // namespace

TEST_CASE("masked CSV round-trips NA cells and full precision") {
  Matrix v(2, 3);
  v << 0.1, 1.0 / 3.0, -2e-300, 4.0, 5.5, 6.0;
  Matrix m(2, 3);
  m << 0, 1, 0, 1, 0, 0;
  const MaskedMatrix data(v, m);
  std::stringstream ss;
  write_masked_csv(ss, data);
  CHECK(ss.str().substr(0, 9) == "x0,x1,x2\n");
  CHECK(ss.str().find("NA") != std::string::npos);
  const MaskedMatrix back = read_masked_csv(ss);
  CHECK(back.values() == data.values());
  CHECK(back.mask() == data.mask());
  std::stringstream bad("x0\nfoo\n");
  CHECK_THROWS_AS(read_masked_csv(bad), ConfigError);
}

TEST_CASE("vector and matrix CSV round-trip") {
  const Vector v = (Vector(3) << 1.0 / 7.0, -0.0, 1e10).finished();
  std::stringstream ss;
  write_vector_csv(ss, v, "y");
  CHECK(read_vector_csv(ss) == v);
  const Matrix m = Matrix::Random(4, 2);
  std::stringstream sm;
  write_matrix_csv(sm, m);
  CHECK(read_matrix_csv(sm) == m);
}

TEST_CASE("every estimator kind round-trips through JSON exactly") {
  const SimulatedData s = sample(ScenarioKind::Mixture3, 3, 600, 1);
  check_round_trip(fit_constant_imputed(s.masked, s.y), s.masked);
  check_round_trip(fit_expanded(s.masked, s.y), s.masked);
  check_round_trip(fit_em(s.masked, s.y, {20, 1e-6}), s.masked);
  check_round_trip(fit_iter_impute(s.masked, s.y, 3), s.masked);
  MlpOptions opt;
  opt.hidden_width = 4;
  opt.epochs = 3;
  Rng rng(2);
  check_round_trip(fit_mlp(s.masked, s.y, opt, rng), s.masked);
  ScenarioConfig c;
  c.kind = ScenarioKind::Mixture3;
  c.dim = 3;
  c.seed = 1;
  const ScenarioParams p = make_scenario(c);
  check_round_trip(BayesOracle(compute_delta(*p.mixture_model(), p.dgp)), s.masked);
}

TEST_CASE("model JSON with a bad tag is a config error") {
  CHECK_THROWS_AS(predictor_from_json(json{{"format", "other"}}), ConfigError);
  CHECK_THROWS_AS(predictor_from_json(json{{"format", "mispred-model"}, {"version", 1}, {"kind", "knn"}, {"state", {}}}),
                  ConfigError);
}

TEST_CASE("scenario config parsing is strict and names the offending key") {
  const auto ok = scenario_config_from_json(json::parse(R"({"kind":"selfmasking","dim":4,"lambda":[1,2,1,1]})"));
  CHECK(ok.kind == ScenarioKind::SelfMasking);
  CHECK(ok.lambda->size() == 4);
  try {
    scenario_config_from_json(json::parse(R"({"kind":"mixture1","dim":3,"sigma":1})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("\"sigma\"") != std::string::npos);
  }
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"kind":"mixture1","dim":0})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"kind":"mixture1","dim":3,"lambda":[1,1,1]})")),
                  ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"kind":"mixture1","dim":2,"beta":[1]})")), ConfigError);
}

TEST_CASE("experiment config defaults and validation") {
  const auto c = experiment_config_from_json(json::parse(
      R"({"scenario":{"kind":"mixture1","dim":3},"estimators":["expanded",{"kind":"mlp","params":{"hidden_width":6}}],"n_grid":[100,200]})"));
  CHECK(c.test_fraction == 0.25);
  CHECK(c.repetitions == 5);
  CHECK(c.estimators.size() == 2);
  CHECK(mlp_options_from_json(c.estimators[1].params).hidden_width == 6);
  CHECK(ExpandedOptions{}.lambda_grid == std::vector<double>{1e-3, 1.0, 1e3});
  CHECK(MlpOptions{}.decay_grid == std::vector<double>{1e-1, 1e-2, 1e-4});
  CHECK(MlpOptions{}.batch_size == 200);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(
                      R"({"scenario":{"kind":"mixture1","dim":3},"n_grid":[200,100]})")),
                  ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(
                      R"({"scenario":{"kind":"mixture1","dim":3},"estimators":[{"kind":"mlp","params":{"width":3}}]})")),
                  ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(
                      R"({"scenario":{"kind":"mixture1","dim":3},"test_fraction":1.0})")),
                  ConfigError);
  CHECK_THROWS_AS(estimator_spec_from_json(json("random_forest")), ConfigError);
  // Serialized config parses back to the same JSON.
  CHECK(to_json(experiment_config_from_json(to_json(c))) == to_json(c));
}

TEST_CASE("sidecar round-trip and pattern-mixture view") {
  ScenarioConfig c;
  c.kind = ScenarioKind::Mixture3;
  c.dim = 3;
  c.seed = 4;
  const ScenarioParams p = make_scenario(c);
  const json j = scenario_params_to_json(p);
  const ScenarioParams back = scenario_params_from_json(json::parse(j.dump()));
  CHECK(back.components[2].cov == p.components[2].cov);
  CHECK(back.assignment == p.assignment);
  LinearDGP dgp;
  const PatternMixtureModel model = mixture_from_sidecar(j, dgp);
  CHECK(bayes_risk(model, dgp) == bayes_risk(*p.mixture_model(), p.dgp));

  ScenarioConfig sm = c;
  sm.kind = ScenarioKind::SelfMasking;
  const json sj = scenario_params_to_json(make_scenario(sm));
  CHECK(scenario_params_from_json(sj).selfmask->mu0 == make_scenario(sm).selfmask->mu0);
  CHECK_THROWS_AS(mixture_from_sidecar(sj, dgp), ConfigError);

  json fixed = j;
  fixed["pattern_probs"] = std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0};
  fixed["noise_sigma"] = 1.0;
  CHECK(bayes_risk(mixture_from_sidecar(fixed, dgp), dgp) == doctest::Approx(1.0));
}
