#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "mispred/estimators.hpp"

namespace mispred {

/// Full fitted state plus caller metadata (training options, seed) under "meta".
nlohmann::json predictor_to_json(const FittedPredictor& model,
                                 const nlohmann::json& meta = nlohmann::json::object());
std::unique_ptr<FittedPredictor> predictor_from_json(const nlohmann::json& j);

void save_predictor(const std::string& path, const FittedPredictor& model,
                    const nlohmann::json& meta = nlohmann::json::object());
std::unique_ptr<FittedPredictor> load_predictor(const std::string& path);

}  // namespace mispred
