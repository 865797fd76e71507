#include "ordgrade/relative.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ordgrade/dataset.hpp"
#include "ordgrade/errors.hpp"

namespace ordgrade {

const char* preference_label_name(PreferenceLabel label) {
    switch (label) {
        case PreferenceLabel::A: return "A";
        case PreferenceLabel::B: return "B";
        case PreferenceLabel::Tie: return "Tie";
    }
    return "?";
}

PreferenceLabel preference_label_from_string(const std::string& s) {
    if (s == "A") return PreferenceLabel::A;
    if (s == "B") return PreferenceLabel::B;
    if (s == "Tie") return PreferenceLabel::Tie;
    throw DataError("unknown preference label '" + s + "'");
}

PreferenceLabel decide(double score_a, double score_b, double tie_epsilon) {
    if (tie_epsilon < 0.0) throw ConfigError("decide: tie_epsilon must be >= 0");
    if (!std::isfinite(score_a) || !std::isfinite(score_b))
        throw ConfigError("decide: scores must be finite");
    if (score_a - score_b > tie_epsilon) return PreferenceLabel::A;
    if (score_b - score_a > tie_epsilon) return PreferenceLabel::B;
    return PreferenceLabel::Tie;
}

double pairwise_accuracy(std::span<const std::pair<PreferenceResult, PreferenceLabel>> pairs) {
    if (pairs.empty()) throw ConfigError("pairwise_accuracy: empty input");
    std::size_t correct = 0;
    for (const auto& [result, gold] : pairs)
        if (result.predicted == gold) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

JudgeOutcome judge_pairs(const ScorerModel& model, std::span<const PreferencePair> pairs,
                         double tie_epsilon, Index feature_dim) {
    JudgeOutcome out;
    out.results.reserve(pairs.size());
    std::vector<std::pair<PreferenceResult, PreferenceLabel>> scored;
    scored.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const Vector fa = featurize_fields(pair.instruction, pair.response_a, pair.rubric,
                                           pair.reference_answer, feature_dim);
        const Vector fb = featurize_fields(pair.instruction, pair.response_b, pair.rubric,
                                           pair.reference_answer, feature_dim);
        PreferenceResult r;
        r.score_a = predict_score(model, fa).score;
        r.score_b = predict_score(model, fb).score;
        r.margin = std::abs(r.score_a - r.score_b);
        r.predicted = decide(r.score_a, r.score_b, tie_epsilon);
        scored.emplace_back(r, pair.label);
        out.results.push_back(r);
    }
    out.accuracy = pairwise_accuracy(scored);
    return out;
}

namespace {

using nlohmann::json;

std::optional<std::string> optional_text(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

}  // namespace

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<PreferencePair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            PreferencePair p;
            p.id = j.at("id").get<std::string>();
            p.instruction = j.at("instruction").get<std::string>();
            p.rubric = optional_text(j, "rubric");
            p.reference_answer = optional_text(j, "reference_answer");
            p.response_a = j.at("response_a").get<std::string>();
            p.response_b = j.at("response_b").get<std::string>();
            p.label = preference_label_from_string(j.at("label").get<std::string>());
            if (p.instruction.empty()) throw DataError("instruction must be non-empty");
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_preference_pairs(const std::filesystem::path& path,
                           std::span<const PreferencePair> pairs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& p : pairs) {
        json j{{"id", p.id},
               {"instruction", p.instruction},
               {"response_a", p.response_a},
               {"response_b", p.response_b},
               {"label", preference_label_name(p.label)}};
        if (p.rubric) j["rubric"] = *p.rubric;
        if (p.reference_answer) j["reference_answer"] = *p.reference_answer;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ordgrade
