#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "aed/telemetry.hpp"

namespace aed {

struct PreprocessConfig;
struct ModelConfig;
struct TrainConfig;
struct ThresholdConfig;

/// Channel from its canonical column name; throws DataError when unknown.
Channel parse_channel(std::string_view name);

// JSON mirrors of the configuration structs. The readers start from the
// struct defaults, override the keys present, and reject unknown keys.
nlohmann::ordered_json to_json(const SynthConfig& cfg);
nlohmann::ordered_json to_json(const PreprocessConfig& cfg);
nlohmann::ordered_json to_json(const ModelConfig& cfg);
nlohmann::ordered_json to_json(const TrainConfig& cfg);
nlohmann::ordered_json to_json(const ThresholdConfig& cfg);

void update_from_json(SynthConfig& cfg, const nlohmann::ordered_json& j);
void update_from_json(PreprocessConfig& cfg, const nlohmann::ordered_json& j);
void update_from_json(ModelConfig& cfg, const nlohmann::ordered_json& j);
void update_from_json(TrainConfig& cfg, const nlohmann::ordered_json& j);
void update_from_json(ThresholdConfig& cfg, const nlohmann::ordered_json& j);

PreprocessConfig preprocess_config_from_json(const nlohmann::ordered_json& j);

}  // namespace aed
