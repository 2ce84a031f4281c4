// Drives the mispred executable end to end in a scratch directory.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "mispred/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::path(MISPRED_TEST_WORKDIR) / "cli";

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const fs::path log = kWork / "last_output.txt";
  const std::string cmd = std::string(MISPRED_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

std::string dir(const std::string& name) { return (kWork / name).string(); }

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

struct Fresh {
  Fresh() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};
const Fresh fresh;

}  // namespace

TEST_CASE("simulate writes four files and is byte-reproducible") {
  const auto cfg = write("sim.json", R"({"scenario":{"kind":"mixture1","dim":3,"seed":7},"n":100})");
  REQUIRE(run("simulate " + cfg.string() + " --out " + dir("sim_a")).code == 0);
  REQUIRE(run("simulate " + cfg.string() + " --out " + dir("sim_b")).code == 0);
  for (const char* f : {"masked.csv", "complete.csv", "y.csv", "params.json"}) {
    CHECK(fs::exists(kWork / "sim_a" / f));
    CHECK(slurp(kWork / "sim_a" / f) == slurp(kWork / "sim_b" / f));
  }
  CHECK(count_lines(slurp(kWork / "sim_a" / "masked.csv")) == 101);
}

TEST_CASE("self-masking sidecar reproduces the target missing rate on emitted data") {
  const auto cfg = write("sm.json", R"({"scenario":{"kind":"selfmasking","dim":3,"seed":2},"n":20000})");
  REQUIRE(run("simulate " + cfg.string() + " --out " + dir("sm")).code == 0);
  const json side = json::parse(slurp(kWork / "sm" / "params.json"));
  CHECK(side["selfmask"]["mu0"].size() == 3);
  const auto data = mispred::read_masked_csv_file((kWork / "sm" / "masked.csv").string());
  const mispred::Vector rates = data.mask().colwise().mean();
  CHECK((rates.array() - 0.25).abs().maxCoeff() < 0.01);
  const Run r = run("bayes-risk " + (kWork / "sm" / "params.json").string());
  CHECK(r.code == 1);
  CHECK(r.out.find("not a Gaussian pattern mixture") != std::string::npos);
}

TEST_CASE("bayes-risk on hand-written sidecars") {
  const std::string base =
      R"("kind":"mixture1","dim":2,"beta0":1,"beta":[1,1],"components":[{"mean":[0,0],"cov":[[1,0.5],[0.5,1]]}],"assignment":[0,0,0,0],"pattern_probs":[1,0,0,0])";
  const auto zero = write("zero.json", "{" + base + R"(,"noise_sigma":0})");
  const Run r0 = run("bayes-risk " + zero.string());
  CHECK(r0.code == 0);
  CHECK(r0.out.find("closed_form_risk: 0\n") != std::string::npos);
  const auto one = write("one.json", "{" + base + R"(,"noise_sigma":1})");
  const Run r1 = run("bayes-risk " + one.string() + " --monte-carlo 20000");
  CHECK(r1.code == 0);
  CHECK(r1.out.find("closed_form_risk: 1\n") != std::string::npos);
  CHECK(r1.out.find("monte_carlo_se:") != std::string::npos);
}

TEST_CASE("fit and predict round-trip through files") {
  const auto cfg = write("fit_sim.json", R"({"scenario":{"kind":"mixture3","dim":3,"seed":5,"noise_sigma":0.5},"n":400})");
  REQUIRE(run("simulate " + cfg.string() + " --out " + dir("fit")).code == 0);
  const std::string data = (kWork / "fit" / "masked.csv").string();
  const std::string y = (kWork / "fit" / "y.csv").string();
  for (const std::string kind : {"constant_imputed", "expanded", "em", "iter_impute", "mlp"}) {
    const std::string model = (kWork / "fit" / (kind + ".json")).string();
    const std::string pred = (kWork / "fit" / (kind + "_pred.csv")).string();
    REQUIRE(run("fit --data " + data + " --y " + y + " --estimator " + kind + " --model " + model).code == 0);
    REQUIRE(run("predict --model " + model + " --data " + data + " --output " + pred).code == 0);
    const json m = json::parse(slurp(model));
    CHECK(m["kind"] == kind);
    CHECK(m["meta"]["seed"] == 0);
    CHECK(mispred::read_vector_csv_file(pred).size() == 400);
  }
  const std::string sidecar = (kWork / "fit" / "params.json").string();
  CHECK(run("fit --data " + data + " --y " + y + " --estimator bayes_oracle --sidecar " + sidecar + " --model " +
            (kWork / "fit" / "oracle.json").string())
            .code == 0);
  CHECK(run("fit --data " + data + " --y " + y + " --estimator mlp --params '{\"widht\":3}'").code == 1);
}

TEST_CASE("learning-curve: files, one series with one point, Bayes line, reproducible") {
  const auto cfg = write(
      "lc.json",
      R"({"scenario":{"kind":"mixture1","dim":3},"estimators":["constant_imputed"],"n_grid":[200],"repetitions":1,"master_seed":1})");
  const Run a = run("learning-curve " + cfg.string() + " --out " + dir("lc_a"));
  REQUIRE(a.code == 0);
  CHECK(a.out.find("cells: 1 ok, 0 failed") != std::string::npos);
  REQUIRE(run("learning-curve " + cfg.string() + " --out " + dir("lc_b") + " --jobs 2").code == 0);
  const std::string svg = slurp(kWork / "lc_a" / "learning_curve_mixture1_d3.svg");
  CHECK(svg == slurp(kWork / "lc_b" / "learning_curve_mixture1_d3.svg"));
  CHECK(slurp(kWork / "lc_a" / "results.csv") == slurp(kWork / "lc_b" / "results.csv"));
  CHECK(slurp(kWork / "lc_a" / "aggregates.csv") == slurp(kWork / "lc_b" / "aggregates.csv"));
  CHECK(slurp(kWork / "lc_a" / "manifest.json") == slurp(kWork / "lc_b" / "manifest.json"));
  auto count = [&](const std::string& needle) {
    int n = 0;
    for (auto p = svg.find(needle); p != std::string::npos; p = svg.find(needle, p + 1)) ++n;
    return n;
  };
  CHECK(count("<circle") == 1);
  CHECK(count("Bayes rate") == 1);

  const auto sm = write(
      "lc_sm.json",
      R"({"scenario":{"kind":"selfmasking","dim":3},"estimators":["constant_imputed"],"n_grid":[200],"repetitions":1})");
  REQUIRE(run("learning-curve " + sm.string() + " --out " + dir("lc_sm")).code == 0);
  CHECK(slurp(kWork / "lc_sm" / "learning_curve_selfmasking_d3.svg").find("Bayes rate") == std::string::npos);

  // --seed overrides master_seed.
  REQUIRE(run("learning-curve " + cfg.string() + " --out " + dir("lc_c") + " --seed 99").code == 0);
  CHECK(slurp(kWork / "lc_c" / "results.csv") != slurp(kWork / "lc_a" / "results.csv"));
}

TEST_CASE("learning-curve exits 2 when every cell fails") {
  const auto cfg = write(
      "lc_fail.json",
      R"({"scenario":{"kind":"selfmasking","dim":2},"estimators":["bayes_oracle"],"n_grid":[100],"repetitions":1})");
  const Run r = run("learning-curve " + cfg.string() + " --out " + dir("lc_fail"));
  CHECK(r.code == 2);
  CHECK(r.out.find("cells: 0 ok, 1 failed") != std::string::npos);
}

TEST_CASE("width-sweep: two widths give two x positions and the documented columns") {
  const auto cfg = write(
      "ws.json",
      R"({"scenario":{"kind":"mixture1","dim":2},"estimators":[{"kind":"mlp","params":{"epochs":3}}],"widths":[2,4],"n_train":200,"repetitions":1})");
  REQUIRE(run("width-sweep " + cfg.string() + " --out " + dir("ws")).code == 0);
  const std::string svg = slurp(kWork / "ws" / "width_sweep_mixture1_d2.svg");
  int circles = 0;
  for (auto p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  CHECK(circles == 2);
  const std::string csv = slurp(kWork / "ws" / "results.csv");
  CHECK(csv.substr(0, csv.find('\n')) ==
        "scenario,estimator,n_train,rep,r2_train,r2_test,r2_bayes,wall_ms,hyperparams,seed,status");
  CHECK(count_lines(csv) == 3);
}

TEST_CASE("configuration errors exit with code 1 and name the key") {
  const auto bad = write("bad.json", R"({"scenario":{"kind":"mixture1","dim":3},"n":10,"extra":true})");
  const Run r = run("simulate " + bad.string() + " --out " + dir("bad"));
  CHECK(r.code == 1);
  CHECK(r.out.find("\"extra\"") != std::string::npos);
  CHECK(run("simulate " + (kWork / "missing.json").string()).code == 1);
  CHECK(run("no-such-command").code == 1);
  const auto lc = write("bad_lc.json", R"({"scenario":{"kind":"mixture1","dim":3},"n_grid":[5,5]})");
  CHECK(run("learning-curve " + lc.string()).code == 1);
}
