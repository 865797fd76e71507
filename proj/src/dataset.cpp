#include "ordgrade/dataset.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ordgrade/errors.hpp"
#include "ordgrade/rng.hpp"

namespace ordgrade {

namespace {

using nlohmann::json;

std::optional<std::string> optional_text(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

GradedSample parse_record(const json& j, std::size_t line_no) {
    const auto fail = [line_no](const std::string& what) {
        throw DataError("line " + std::to_string(line_no) + ": " + what);
    };
    GradedSample s;
    try {
        s.id = j.at("id").get<std::string>();
        s.instruction = j.at("instruction").get<std::string>();
        s.response = j.at("response").get<std::string>();
        s.rubric = optional_text(j, "rubric");
        s.reference_answer = optional_text(j, "reference_answer");
        if (!j.at("score").is_number_integer()) fail("score must be an integer");
        s.score = j.at("score").get<int>();
    } catch (const json::exception& e) {
        fail(e.what());
    }
    if (s.instruction.empty()) fail("instruction must be non-empty");
    if (s.response.empty()) fail("response must be non-empty");
    if (s.score < 1 || s.score > 5)
        fail("score " + std::to_string(s.score) + " outside 1..5");
    return s;
}

json record_to_json(const GradedSample& s) {
    json j{{"id", s.id},
           {"instruction", s.instruction},
           {"response", s.response},
           {"score", s.score}};
    if (s.rubric) j["rubric"] = *s.rubric;
    if (s.reference_answer) j["reference_answer"] = *s.reference_answer;
    return j;
}

}  // namespace

std::vector<GradedSample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<GradedSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(parse_record(j, line_no));
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, std::span<const GradedSample> samples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& s : samples) out << record_to_json(s).dump() << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const SplitSpec& spec) {
    if (n < 2) throw ConfigError("split: need at least 2 samples");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0,1)");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    // Seeded Fisher-Yates; std::shuffle is implementation-defined.
    Rng rng(spec.seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
        std::swap(order[i], order[j]);
    }
    const auto train_n = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(n)));
    return {std::vector<std::size_t>(order.begin(), order.begin() + train_n),
            std::vector<std::size_t>(order.begin() + train_n, order.end())};
}

std::pair<std::vector<GradedSample>, std::vector<GradedSample>> split(
    std::span<const GradedSample> samples, const SplitSpec& spec) {
    const auto [train_idx, val_idx] = split_indices(samples.size(), spec);
    std::vector<GradedSample> train, val;
    train.reserve(train_idx.size());
    val.reserve(val_idx.size());
    for (auto i : train_idx) train.push_back(samples[i]);
    for (auto i : val_idx) val.push_back(samples[i]);
    return {std::move(train), std::move(val)};
}

std::vector<GradedSample> augment(std::span<const GradedSample> samples,
                                  const AugmentSpec& spec) {
    if (spec.drop_rubric_prob < 0.0 || spec.drop_rubric_prob > 1.0 ||
        spec.drop_reference_prob < 0.0 || spec.drop_reference_prob > 1.0)
        throw ConfigError("augment: drop probabilities must be in [0,1]");
    Rng rng(spec.seed);
    std::vector<GradedSample> out(samples.begin(), samples.end());
    for (auto& s : out) {
        // Two draws per sample, always taken, so the stream does not depend
        // on which optional fields happen to be present.
        const bool drop_rubric = rng.next_double() < spec.drop_rubric_prob;
        const bool drop_reference = rng.next_double() < spec.drop_reference_prob;
        if (drop_rubric) s.rubric.reset();
        if (drop_reference) s.reference_answer.reset();
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

// Lowercased alphanumeric runs; everything else separates tokens.
void hash_tokens_into(std::string_view text, Vector& buckets) {
    const Index dim = buckets.size();
    std::string token;
    const auto flush = [&] {
        if (token.empty()) return;
        buckets[static_cast<Index>(fnv1a64(token) % static_cast<std::uint64_t>(dim))] += 1.0;
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c))
            token.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
}

}  // namespace

Vector featurize_fields(const std::string& instruction, const std::string& response,
                        const std::optional<std::string>& rubric,
                        const std::optional<std::string>& reference_answer, Index dim) {
    if (dim < 8) throw ConfigError("featurize: dim must be >= 8");
    Vector v = Vector::Zero(dim);
    hash_tokens_into(instruction, v);
    hash_tokens_into(response, v);
    if (rubric) hash_tokens_into(*rubric, v);
    if (reference_answer) hash_tokens_into(*reference_answer, v);
    const double norm = v.norm();
    if (norm == 0.0) {
        v[0] = 1.0;  // no tokens at all; fixed unit vector keeps the map total
        return v;
    }
    return v / norm;
}

Vector featurize(const GradedSample& sample, Index dim) {
    return featurize_fields(sample.instruction, sample.response, sample.rubric,
                            sample.reference_answer, dim);
}

Matrix featurize_all(std::span<const GradedSample> samples, Index dim) {
    Matrix out(static_cast<Index>(samples.size()), dim);
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.row(static_cast<Index>(i)) = featurize(samples[i], dim).transpose();
    return out;
}

}  // namespace ordgrade
