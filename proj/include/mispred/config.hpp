#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "mispred/experiments.hpp"

namespace mispred {

// Strict JSON readers: unknown keys and ill-typed values raise ConfigError
// naming the offending key.

nlohmann::json read_json_file(const std::string& path);

ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& config);

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

EstimatorSpec estimator_spec_from_json(const nlohmann::json& j);

ExpandedOptions expanded_options_from_json(const nlohmann::json& params);
EmOptions em_options_from_json(const nlohmann::json& params);
int iter_impute_sweeps_from_json(const nlohmann::json& params);
MlpOptions mlp_options_from_json(const nlohmann::json& params);
nlohmann::json to_json(const MlpOptions& options);

/// `{"scenario": {...}, "n": count}`.
struct SimulateConfig {
  ScenarioConfig scenario;
  int n = 0;
};
SimulateConfig simulate_config_from_json(const nlohmann::json& j);

/// Generative-parameter sidecar written next to simulated data.
nlohmann::json scenario_params_to_json(const ScenarioParams& params);
ScenarioParams scenario_params_from_json(const nlohmann::json& j);

/// Pattern-mixture view of a sidecar. Honors an explicit "pattern_probs"
/// table (2^d entries); otherwise patterns are equiprobable. Throws
/// ConfigError for self-masking sidecars, which are not pattern mixtures.
PatternMixtureModel mixture_from_sidecar(const nlohmann::json& j, LinearDGP& dgp);

}  // namespace mispred
