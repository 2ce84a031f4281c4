#include "mispred/predictor_io.hpp"

#include <fmt/format.h>
#include <fstream>

#include "mispred/errors.hpp"

namespace mispred {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "mispred-model";
constexpr int kVersion = 1;

json vec(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

Vector to_vec(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Matrix to_mat(const json& j, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector r = to_vec(j[i]);
    if (r.size() != cols) throw ConfigError("model JSON: ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

json standardizer_json(const Standardizer& s) { return {{"mean", vec(s.mean)}, {"scale", vec(s.scale)}}; }
Standardizer standardizer_from(const json& j) { return {to_vec(j.at("mean")), to_vec(j.at("scale"))}; }

json state_of(const FittedPredictor& model) {
  if (const auto* m = dynamic_cast<const ConstantImputedLR*>(&model)) {
    return {{"intercept", m->intercept()}, {"slopes", vec(m->slopes())}, {"mask_slopes", vec(m->mask_slopes())}};
  }
  if (const auto* m = dynamic_cast<const ExpandedLR*>(&model)) {
    json table = json::array();
    for (std::size_t bits = 0; bits < m->table().size(); ++bits) {
      const auto& e = m->table()[bits];
      if (e) table.push_back({{"pattern", bits}, {"bias", e->bias}, {"slopes", vec(e->slopes)}});
    }
    return {{"dim", m->dim()},
            {"standardizer", standardizer_json(m->standardizer())},
            {"shared_intercept", m->shared_intercept()},
            {"ridge_lambda", m->ridge_lambda()},
            {"cv_scores", m->cv_scores},
            {"table", table}};
  }
  if (const auto* m = dynamic_cast<const EmLR*>(&model)) {
    return {{"joint_mean", vec(m->joint_mean())},
            {"joint_cov", mat(m->joint_cov())},
            {"iterations", m->iterations},
            {"loglik_history", m->loglik_history}};
  }
  if (const auto* m = dynamic_cast<const IterImputeLR*>(&model)) {
    json sweeps = json::array();
    for (const auto& sweep : m->regressions()) {
      json regs = json::array();
      for (const auto& r : sweep) regs.push_back(r.size() > 0 ? vec(r) : json(nullptr));
      sweeps.push_back(std::move(regs));
    }
    return {{"initial_fill", vec(m->initial_fill())},
            {"regressions", sweeps},
            {"intercept", m->intercept()},
            {"slopes", vec(m->slopes())}};
  }
  if (const auto* m = dynamic_cast<const MlpRegressor*>(&model)) {
    return {{"standardizer", standardizer_json(m->standardizer())},
            {"y_mean", m->y_mean()},
            {"y_scale", m->y_scale()},
            {"input_weights", mat(m->input_weights())},
            {"input_bias", vec(m->input_bias())},
            {"output_weights", vec(m->output_weights())},
            {"output_bias", m->output_bias()},
            {"weight_decay", m->weight_decay()},
            {"validation_losses", m->validation_losses},
            {"epochs_run", m->epochs_run}};
  }
  if (const auto* m = dynamic_cast<const BayesOracle*>(&model)) {
    const auto& c = m->coefficients();
    json table = json::array();
    for (std::uint32_t bits = 0; bits < c.n_patterns(); ++bits) {
      if (c.contains(bits)) table.push_back({{"pattern", bits}, {"delta0", c.at(bits).delta0}, {"delta", vec(c.at(bits).delta)}});
    }
    return {{"dim", c.dim()}, {"table", table}};
  }
  throw InvalidArgument(fmt::format("predictor_to_json: unsupported predictor kind {}", model.kind()));
}

std::unique_ptr<FittedPredictor> restore(const std::string& kind, const json& s) {
  if (kind == "constant_imputed") {
    return std::make_unique<ConstantImputedLR>(s.at("intercept").get<double>(), to_vec(s.at("slopes")),
                                               to_vec(s.at("mask_slopes")));
  }
  if (kind == "expanded") {
    const int d = s.at("dim").get<int>();
    require_pattern_dim(d, "model JSON");
    std::vector<std::optional<PatternBlock>> table(std::size_t{1} << d);
    for (const auto& e : s.at("table")) {
      const auto bits = e.at("pattern").get<std::size_t>();
      if (bits >= table.size()) throw ConfigError("model JSON: pattern index out of range");
      table[bits] = PatternBlock{e.at("bias").get<double>(), to_vec(e.at("slopes"))};
    }
    auto m = std::make_unique<ExpandedLR>(d, standardizer_from(s.at("standardizer")),
                                          s.at("shared_intercept").get<double>(), std::move(table),
                                          s.at("ridge_lambda").get<double>());
    m->cv_scores = s.value("cv_scores", std::vector<double>{});
    return m;
  }
  if (kind == "em") {
    const Vector mean = to_vec(s.at("joint_mean"));
    auto m = std::make_unique<EmLR>(mean, to_mat(s.at("joint_cov"), mean.size()));
    m->iterations = s.value("iterations", 0);
    m->loglik_history = s.value("loglik_history", std::vector<double>{});
    return m;
  }
  if (kind == "iter_impute") {
    std::vector<std::vector<Vector>> regs;
    for (const auto& sweep : s.at("regressions")) {
      std::vector<Vector> row;
      for (const auto& r : sweep) row.push_back(r.is_null() ? Vector() : to_vec(r));
      regs.push_back(std::move(row));
    }
    return std::make_unique<IterImputeLR>(to_vec(s.at("initial_fill")), std::move(regs),
                                          s.at("intercept").get<double>(), to_vec(s.at("slopes")));
  }
  if (kind == "mlp") {
    Standardizer st = standardizer_from(s.at("standardizer"));
    const Eigen::Index inputs = 2 * st.mean.size();
    auto m = std::make_unique<MlpRegressor>(std::move(st), s.at("y_mean").get<double>(),
                                            s.at("y_scale").get<double>(), to_mat(s.at("input_weights"), inputs),
                                            to_vec(s.at("input_bias")), to_vec(s.at("output_weights")),
                                            s.at("output_bias").get<double>(), s.at("weight_decay").get<double>());
    m->validation_losses = s.value("validation_losses", std::vector<double>{});
    m->epochs_run = s.value("epochs_run", 0);
    return m;
  }
  if (kind == "bayes_oracle") {
    ExpandedBayesCoefficients c(s.at("dim").get<int>());
    for (const auto& e : s.at("table")) {
      c.set(e.at("pattern").get<std::uint32_t>(), PatternAffine{e.at("delta0").get<double>(), to_vec(e.at("delta"))});
    }
    return std::make_unique<BayesOracle>(std::move(c));
  }
  throw ConfigError(fmt::format("model JSON: unknown kind \"{}\"", kind));
}

}  // namespace

json predictor_to_json(const FittedPredictor& model, const json& meta) {
  return {{"format", kFormat},
          {"version", kVersion},
          {"kind", model.kind()},
          {"descriptor", model.descriptor()},
          {"param_count", model.param_count()},
          {"state", state_of(model)},
          {"meta", meta}};
}

std::unique_ptr<FittedPredictor> predictor_from_json(const json& j) {
  try {
    if (j.at("format") != kFormat) throw ConfigError("model JSON: unrecognised format tag");
    if (j.at("version").get<int>() != kVersion) throw ConfigError("model JSON: unsupported version");
    return restore(j.at("kind").get<std::string>(), j.at("state"));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("model JSON: {}", e.what()));
  }
}

void save_predictor(const std::string& path, const FittedPredictor& model, const json& meta) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path));
  out << predictor_to_json(model, meta).dump(2) << '\n';
}

std::unique_ptr<FittedPredictor> load_predictor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {}", path));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path, e.what()));
  }
  return predictor_from_json(j);
}

}  // namespace mispred
