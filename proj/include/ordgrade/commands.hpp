#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ordgrade/checkpoint.hpp"
#include "ordgrade/scorer.hpp"
#include "ordgrade/synthetic.hpp"

namespace ordgrade {

// Every command writes its outputs plus a manifest.json echoing the fully
// resolved configuration into --out. Manifests deliberately exclude the
// output directory and any timestamps, so feeding a manifest back through
// --config into a fresh directory reproduces the outputs byte for byte.

struct GenSyntheticParams {
    std::string mode = "absolute";  // absolute | preference
    std::size_t count = 10000;
    std::uint64_t seed = 42;
    double label_noise = 0.25;
    double min_gap = 0.5;
    std::filesystem::path out_dir;

    nlohmann::json to_json() const;
    void patch(const nlohmann::json& j);
};

struct AugmentParams {
    std::filesystem::path input;
    double drop_rubric = 0.5;
    double drop_reference = 0.5;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;

    nlohmann::json to_json() const;
    void patch(const nlohmann::json& j);
};

struct TrainParams {
    std::filesystem::path input;
    Index dim = 256;
    Index hidden = 0;
    ModelKind head = ModelKind::Classification;
    TrainConfig config;
    double train_fraction = 0.95;
    std::filesystem::path out_dir;

    nlohmann::json to_json() const;
    void patch(const nlohmann::json& j);
};

struct EvaluateParams {
    std::filesystem::path checkpoint;
    std::filesystem::path input;
    std::string mode = "absolute";  // absolute | relative
    std::vector<double> tie_epsilons = {0.0, 0.25, 0.5};
    std::optional<Index> dim_override;
    std::filesystem::path out_dir;

    nlohmann::json to_json() const;
    void patch(const nlohmann::json& j);
};

struct CompareParams {
    std::filesystem::path input;
    Index dim = 256;
    std::vector<std::string> heads = {"ce", "squared-emd", "regression"};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    TrainConfig base;
    double train_fraction = 0.95;
    int jobs = 1;
    std::filesystem::path out_dir;

    nlohmann::json to_json() const;
    void patch(const nlohmann::json& j);
};

void run_gen_synthetic(const GenSyntheticParams& p);
void run_augment(const AugmentParams& p);
void run_train(const TrainParams& p);
void run_evaluate(const EvaluateParams& p);
void run_compare_losses(const CompareParams& p);

/// Head token -> (kind, loss) for compare-losses: ce, squared-emd,
/// generalized-emd, normalized-emd, regression.
HeadSpec head_from_token(const std::string& token, const TrainConfig& base);

/// Maps exceptions from `body` onto the CLI exit-code taxonomy.
int run_with_exit_code(const std::function<void()>& body);

/// Reads a config file that is either a bare parameter object or a manifest
/// {"command": ..., "config": {...}}; verifies the command name when
/// present and returns the parameter object.
nlohmann::json load_config_file(const std::filesystem::path& path, const std::string& command);

/// Shortest-round-trip decimal rendering used by every CSV writer.
std::string fmt_double(double v);

}  // namespace ordgrade
