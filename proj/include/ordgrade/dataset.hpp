#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ordgrade/losses.hpp"

namespace ordgrade {

/// One graded record: an instruction, the response under evaluation, the
/// optional scoring rubric and reference answer, and the integer gold score.
struct GradedSample {
    std::string id;
    std::string instruction;
    std::string response;
    std::optional<std::string> rubric;
    std::optional<std::string> reference_answer;
    int score = 1;  // 1..5

    bool operator==(const GradedSample&) const = default;
};

struct SplitSpec {
    double train_fraction = 0.95;
    std::uint64_t seed = 0;
};

struct AugmentSpec {
    double drop_rubric_prob = 0.5;
    double drop_reference_prob = 0.5;
    std::uint64_t seed = 0;
};

/// Reads line-delimited JSON records (UTF-8). Every record is validated;
/// parse and validation errors cite the 1-based line number. An empty file
/// yields an empty sequence.
std::vector<GradedSample> load_dataset(const std::filesystem::path& path);

/// Writes records back out as line-delimited JSON. Absent optionals are
/// omitted. Output is byte-deterministic for a given input.
void save_dataset(const std::filesystem::path& path, std::span<const GradedSample> samples);

/// Seeded shuffle-then-cut split. |train| = round(train_fraction * n); the
/// two sides are disjoint and exhaustive, and the same seed always produces
/// the same partition.
std::pair<std::vector<GradedSample>, std::vector<GradedSample>> split(
    std::span<const GradedSample> samples, const SplitSpec& spec);

/// Index-level variant of split, for callers that keep features in a matrix
/// aligned with the sample order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            const SplitSpec& spec);

/// Drops rubric and reference answer per sample using two independent
/// seeded draws. Scores and texts are never altered.
std::vector<GradedSample> augment(std::span<const GradedSample> samples, const AugmentSpec& spec);

/// Deterministic hashing vectorizer: lowercases, splits on non-alphanumeric
/// runs, hashes each token into one of `dim` buckets, and L2-normalizes the
/// bucket counts. Absent rubric/reference contribute nothing. This is the
/// desk-scale stand-in for a learned text encoder; see the README.
Vector featurize(const GradedSample& sample, Index dim = 256);

/// Field-level core of featurize, shared with the relative-grading path.
Vector featurize_fields(const std::string& instruction, const std::string& response,
                        const std::optional<std::string>& rubric,
                        const std::optional<std::string>& reference_answer, Index dim);

/// Featurizes a whole dataset into a row-per-sample matrix.
Matrix featurize_all(std::span<const GradedSample> samples, Index dim);

/// FNV-1a of token bytes; the hash behind featurize, exposed for tests.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace ordgrade
