#include "mispred/simulate.hpp"

#include <cmath>
#include <fmt/format.h>

#include "mispred/errors.hpp"
#include "mispred/rng.hpp"

namespace mispred {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Mixture1: return "mixture1";
    case ScenarioKind::Mixture3: return "mixture3";
    case ScenarioKind::SelfMasking: return "selfmasking";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "mixture1") return ScenarioKind::Mixture1;
  if (s == "mixture3") return ScenarioKind::Mixture3;
  if (s == "selfmasking") return ScenarioKind::SelfMasking;
  throw ConfigError(fmt::format("unknown scenario kind '{}'", s));
}

LinearDGP ScenarioConfig::dgp() const {
  LinearDGP out;
  out.beta0 = beta0;
  out.beta = beta ? *beta : Vector::Ones(dim);
  out.noise_sigma = noise_sigma;
  if (out.beta.size() != dim) throw ConfigError("scenario: beta length must equal dim");
  if (noise_sigma < 0.0) throw ConfigError("scenario: noise_sigma must be >= 0");
  return out;
}

std::optional<PatternMixtureModel> ScenarioParams::mixture_model() const {
  if (!config.satisfies_pattern_mixture()) return std::nullopt;
  return PatternMixtureModel::uniform_patterns(config.dim, components, assignment);
}

Matrix gen_covariance(int d, Rng& rng) {
  if (d < 1) throw InvalidArgument("gen_covariance: d must be >= 1");
  const int width = d / 2;
  Matrix b(d, width);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < width; ++k) b(i, k) = rng.normal();
  Matrix cov = b * b.transpose();
  cov.diagonal().array() += kCovarianceDiagonal;
  return cov;
}

namespace {

GaussianComponent draw_component(int d, Rng& rng) {
  GaussianComponent c;
  c.mean.resize(d);
  for (int j = 0; j < d; ++j) c.mean(j) = rng.normal();
  c.cov = gen_covariance(d, rng);
  return c;
}

}  // namespace

ScenarioParams make_scenario(const ScenarioConfig& config) {
  if (config.dim < 1) throw ConfigError("scenario: dim must be >= 1");
  ScenarioParams p;
  p.config = config;
  p.dgp = config.dgp();
  Rng rng = Rng(config.seed).split("params");
  const int d = config.dim;
  switch (config.kind) {
    case ScenarioKind::Mixture1:
    case ScenarioKind::Mixture3: {
      require_pattern_dim(d, "mixture scenario");
      const int n_comp = config.kind == ScenarioKind::Mixture1 ? 1 : 3;
      for (int c = 0; c < n_comp; ++c) p.components.push_back(draw_component(d, rng));
      const std::size_t n_pat = std::size_t{1} << d;
      p.assignment.resize(n_pat);
      for (std::size_t pat = 0; pat < n_pat; ++pat)
        p.assignment[pat] = static_cast<int>(pat % static_cast<std::size_t>(n_comp));
      break;
    }
    case ScenarioKind::SelfMasking: {
      if (d > 32) throw DimensionTooLarge("selfmasking: dim must be <= 32");
      if (!(config.target_missing_rate > 0.0 && config.target_missing_rate < 1.0)) {
        throw ConfigError("scenario: target_missing_rate must be in (0, 1)");
      }
      p.components.push_back(draw_component(d, rng));
      SelfMaskParams sm;
      sm.lambda = config.lambda ? *config.lambda : Vector::Ones(d);
      if (sm.lambda.size() != d) throw ConfigError("scenario: lambda length must equal dim");
      sm.target_rate = config.target_missing_rate;
      sm.mu0 = calibrate_selfmask(p.components[0].mean, p.components[0].cov, sm.lambda,
                                  sm.target_rate);
      p.selfmask = std::move(sm);
      break;
    }
  }
  return p;
}

namespace {

void require_kind(const ScenarioParams& params, ScenarioKind kind) {
  if (params.config.kind != kind) {
    throw InvalidArgument(fmt::format("sampler for {} called with a {} scenario", to_string(kind),
                                      to_string(params.config.kind)));
  }
}

}  // namespace

std::pair<MaskedMatrix, Matrix> sample_mixture1(const ScenarioParams& params, Eigen::Index n,
                                                Rng& rng) {
  require_kind(params, ScenarioKind::Mixture1);
  return params.mixture_model()->sample(n, rng);
}

std::pair<MaskedMatrix, Matrix> sample_mixture3(const ScenarioParams& params, Eigen::Index n,
                                                Rng& rng) {
  require_kind(params, ScenarioKind::Mixture3);
  return params.mixture_model()->sample(n, rng);
}

std::pair<MaskedMatrix, Matrix> sample_selfmasking(const ScenarioParams& params, Eigen::Index n,
                                                   Rng& rng) {
  require_kind(params, ScenarioKind::SelfMasking);
  const auto& comp = params.components.at(0);
  const auto& sm = *params.selfmask;
  const int d = params.config.dim;
  const Matrix chol = cholesky(comp.cov);
  Matrix complete = sample_gaussian(comp.mean, chol, n, rng);
  Matrix mask = Matrix::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double p_missing = std_normal_cdf(sm.lambda(j) * (complete(i, j) - sm.mu0(j)));
      if (rng.uniform() < p_missing) mask(i, j) = 1.0;
    }
  }
  MaskedMatrix masked(complete, mask);
  return {std::move(masked), std::move(complete)};
}

SimulatedData simulate(const ScenarioParams& params, Eigen::Index n, Rng& rng) {
  Rng x_rng = rng.split("x");
  Rng y_rng = rng.split("y");
  std::pair<MaskedMatrix, Matrix> xm;
  switch (params.config.kind) {
    case ScenarioKind::Mixture1: xm = sample_mixture1(params, n, x_rng); break;
    case ScenarioKind::Mixture3: xm = sample_mixture3(params, n, x_rng); break;
    case ScenarioKind::SelfMasking: xm = sample_selfmasking(params, n, x_rng); break;
  }
  Vector y = gen_response(xm.second, params.dgp, y_rng);
  return {std::move(xm.first), std::move(xm.second), std::move(y)};
}

double selfmask_missing_rate(double mean, double var, double lambda, double mu0) {
  return std_normal_cdf(lambda * (mean - mu0) / std::sqrt(1.0 + lambda * lambda * var));
}

Vector calibrate_selfmask(const Vector& mean, const Matrix& cov, const Vector& lambda,
                          double target_rate) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) {
    throw InvalidArgument("calibrate_selfmask: target_rate must be in (0, 1)");
  }
  const Eigen::Index d = mean.size();
  Vector mu0(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double lam = lambda(j);
    if (!(lam > 0.0)) throw InvalidArgument("calibrate_selfmask: lambda must be positive");
    if (target_rate == 0.5) {
      mu0(j) = mean(j);
      continue;
    }
    // The rate is decreasing in mu0; bracket then bisect.
    auto rate = [&](double m0) { return selfmask_missing_rate(mean(j), cov(j, j), lam, m0); };
    const double scale = std::sqrt(1.0 + lam * lam * cov(j, j)) / lam;
    double lo = mean(j) - scale;
    double hi = mean(j) + scale;
    while (rate(lo) < target_rate) lo -= 2.0 * (hi - lo);
    while (rate(hi) > target_rate) hi += 2.0 * (hi - lo);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (rate(mid) > target_rate) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    mu0(j) = 0.5 * (lo + hi);
  }
  return mu0;
}

Vector gen_response(const Matrix& complete, const LinearDGP& dgp, Rng& rng) {
  if (complete.cols() != dgp.beta.size()) {
    throw InvalidArgument("gen_response: beta length does not match data");
  }
  Vector y = (complete * dgp.beta).array() + dgp.beta0;
  if (dgp.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += dgp.noise_sigma * rng.normal();
  }
  return y;
}

}  // namespace mispred
