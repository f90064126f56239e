#pragma once

#include "sqa/model.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace sqa {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Versioned binary container: a JSON metadata blob followed by named
/// tensors (rows, cols, row-major f64).
struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<Tensor> tensors;

    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
/// Throws FormatError on a bad magic, unknown version or truncation.
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Parameters plus the model config under metadata["model"].
Checkpoint model_checkpoint(const Model& model);

/// Rebuilds a model from a checkpoint and its vocabulary; every parameter
/// must be present with the right shape.
Model restore_model(const Checkpoint& checkpoint, Vocabulary vocab);

}  // namespace sqa
