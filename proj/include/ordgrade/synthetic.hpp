#pragma once

#include <cstdint>
#include <vector>

#include "ordgrade/dataset.hpp"
#include "ordgrade/relative.hpp"

namespace ordgrade {

/// Parameters of the bundled synthetic ordinal benchmark. Each sample has a
/// latent quality u ~ uniform(1,5); its response text mixes vocabulary from
/// the two quality bands adjacent to u, so a bag-of-tokens model can recover
/// u, and the gold score is clamp(round(u + gaussian(label_noise)), 1, 5).
struct SyntheticSpec {
    std::size_t count = 10000;   // samples (absolute) or pairs (preference)
    std::uint64_t seed = 42;
    double label_noise = 0.25;   // sd of the gaussian added before rounding
    double min_gap = 0.5;        // preference mode: minimum |u_a - u_b|
};

std::vector<GradedSample> generate_absolute(const SyntheticSpec& spec);

/// Preference pairs over the same vocabulary: two responses per instruction
/// with latent qualities at least min_gap apart; the label follows the true
/// latent ordering, so no Tie labels are generated.
std::vector<PreferencePair> generate_preference(const SyntheticSpec& spec);

}  // namespace ordgrade
