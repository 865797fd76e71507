#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ordgrade/scorer.hpp"

namespace ordgrade {

enum class PreferenceLabel { A, B, Tie };

/// Two responses to the same instruction (sharing rubric and reference
/// answer) plus the gold preference.
struct PreferencePair {
    std::string id;
    std::string instruction;
    std::optional<std::string> rubric;
    std::optional<std::string> reference_answer;
    std::string response_a;
    std::string response_b;
    PreferenceLabel label = PreferenceLabel::Tie;
};

struct PreferenceResult {
    PreferenceLabel predicted = PreferenceLabel::Tie;
    double score_a = 0.0;
    double score_b = 0.0;
    double margin = 0.0;  // |score_a - score_b|
};

const char* preference_label_name(PreferenceLabel label);
PreferenceLabel preference_label_from_string(const std::string& s);

/// Absolute scores to a preference: A when score_a leads by more than
/// tie_epsilon, B when score_b does, Tie otherwise. tie_epsilon 0 means
/// exact ties only.
PreferenceLabel decide(double score_a, double score_b, double tie_epsilon = 0.0);

/// Fraction of predictions equal to gold; a predicted Tie is correct only
/// against a gold Tie.
double pairwise_accuracy(std::span<const std::pair<PreferenceResult, PreferenceLabel>> pairs);

struct JudgeOutcome {
    std::vector<PreferenceResult> results;  // one per pair, in order
    double accuracy = 0.0;
};

/// Scores each side independently with predict_score (so the judgement
/// cannot depend on presentation order), decides each pair, and aggregates
/// accuracy against the gold labels.
JudgeOutcome judge_pairs(const ScorerModel& model, std::span<const PreferencePair> pairs,
                         double tie_epsilon, Index feature_dim);

/// Line-delimited JSON: id, instruction, rubric?, reference_answer?,
/// response_a, response_b, label.
std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path);
void save_preference_pairs(const std::filesystem::path& path,
                           std::span<const PreferencePair> pairs);

}  // namespace ordgrade
