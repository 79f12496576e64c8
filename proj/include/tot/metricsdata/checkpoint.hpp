#pragma once

#include <filesystem>

#include <json.hpp>

#include "tot/metricsdata/model.hpp"
#include "tot/metricsdata/train.hpp"

namespace tot::metricsdata {

using Json = nlohmann::json;

Json to_json(const ModelConfig& c);
// Fields absent from `j` keep their value in `base`. Throws ConfigError on
// a wrong type or unknown enum value.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

// Checkpoint: {"format": "tot-checkpoint", "version": 1, "config": {...},
// "params": [{"name", "shape", "data"}]}. Doubles are written in shortest
// round-trip form, so save/load is bitwise exact.
Json checkpoint_json(const ModelConfig& c, const ParamStore& params);
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& c, const ParamStore& params);

// Rebuilds the model from the stored config and overwrites every parameter.
// Throws LoadError on missing parameters or shape disagreements.
Model load_checkpoint(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

}  // namespace tot::metricsdata
