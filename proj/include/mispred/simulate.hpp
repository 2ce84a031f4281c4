#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mispred/datamodel.hpp"

namespace mispred {

class Rng;

enum class ScenarioKind { Mixture1, Mixture3, SelfMasking };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

/// Diagonal floor added to B B^T when drawing covariances.
inline constexpr double kCovarianceDiagonal = 0.1;

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Mixture1;
  int dim = 3;
  std::uint64_t seed = 0;
  double beta0 = 1.0;
  std::optional<Vector> beta;  // all-ones when unset
  double noise_sigma = 0.0;
  double target_missing_rate = 0.25;  // selfmasking only
  std::optional<Vector> lambda;       // selfmasking only; all-ones when unset

  LinearDGP dgp() const;
  bool satisfies_pattern_mixture() const { return kind != ScenarioKind::SelfMasking; }
};

struct SelfMaskParams {
  Vector lambda;
  Vector mu0;
  double target_rate = 0.25;
};

/// Fully drawn generative parameters of one scenario instance.
struct ScenarioParams {
  ScenarioConfig config;
  LinearDGP dgp;
  std::vector<GaussianComponent> components;
  std::vector<int> assignment;            // mixtures: 2^d entries
  std::optional<SelfMaskParams> selfmask;

  /// Pattern-mixture view; empty for self-masking.
  std::optional<PatternMixtureModel> mixture_model() const;
};

struct SimulatedData {
  MaskedMatrix masked;
  Matrix complete;
  Vector y;
};

/// B B^T + 0.1 I with B a d x floor(d/2) standard-normal matrix.
Matrix gen_covariance(int d, Rng& rng);

/// Draws the scenario's parameters from config.seed.
ScenarioParams make_scenario(const ScenarioConfig& config);

std::pair<MaskedMatrix, Matrix> sample_mixture1(const ScenarioParams& params, Eigen::Index n, Rng& rng);
std::pair<MaskedMatrix, Matrix> sample_mixture3(const ScenarioParams& params, Eigen::Index n, Rng& rng);
std::pair<MaskedMatrix, Matrix> sample_selfmasking(const ScenarioParams& params, Eigen::Index n, Rng& rng);

/// Dispatches on params.config.kind and appends the response.
SimulatedData simulate(const ScenarioParams& params, Eigen::Index n, Rng& rng);

/// Offsets mu0 so that E[Phi(lambda_j (X_j - mu0_j))] = target_rate per feature.
Vector calibrate_selfmask(const Vector& mean, const Matrix& cov, const Vector& lambda,
                          double target_rate);

/// Probability that feature j is missing under self-masking, in closed form.
double selfmask_missing_rate(double mean, double var, double lambda, double mu0);

Vector gen_response(const Matrix& complete, const LinearDGP& dgp, Rng& rng);

}  // namespace mispred
