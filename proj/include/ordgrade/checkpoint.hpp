#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ordgrade/scorer.hpp"

namespace ordgrade {

/// A trained model plus the configuration that produced it and a fingerprint
/// of the data it was trained on.
struct Checkpoint {
    ScorerModel model;
    TrainConfig config;
    std::string data_fingerprint;
    int best_epoch = 0;
};

/// FNV-1a over sample ids, scores and the feature dim; ties a checkpoint to
/// the exact dataset + featurization it came from.
std::string dataset_fingerprint(std::span<const GradedSample> samples, Index feature_dim);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

const char* loss_kind_token(LossKind k);
LossKind loss_kind_from_token(const std::string& s);
const char* reduction_token(Reduction r);
Reduction reduction_from_token(const std::string& s);
const char* model_kind_token(ModelKind k);
ModelKind model_kind_from_token(const std::string& s);
const char* schedule_token(Schedule s);
Schedule schedule_from_token(const std::string& s);

}  // namespace ordgrade
