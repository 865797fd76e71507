#include "ordgrade/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ordgrade/errors.hpp"
#include "ordgrade/rng.hpp"

namespace ordgrade {

namespace {

constexpr int kWordsPerBand = 40;
constexpr int kFillerWords = 160;
constexpr int kResponseTokens = 32;
constexpr double kQualityTokenProb = 0.85;

// Quality-band vocabulary: "q<band>x<j>". Tokens are alphanumeric runs so
// the hashing tokenizer keeps them whole.
std::string quality_word(int band, int j) {
    return "q" + std::to_string(band) + "x" + std::to_string(j);
}

std::string filler_word(int j) { return "fill" + std::to_string(j); }

// Band draw encoding the fractional part of u: quality 3.4 mixes band 3
// words (60%) and band 4 words (40%).
int draw_band(double u, Rng& rng) {
    const int lo = static_cast<int>(std::floor(u));
    const double frac = u - static_cast<double>(lo);
    const int band = (rng.next_double() < frac) ? lo + 1 : lo;
    return std::clamp(band, 1, 5);
}

std::string make_response(double u, Rng& rng) {
    std::string text;
    for (int t = 0; t < kResponseTokens; ++t) {
        if (!text.empty()) text.push_back(' ');
        if (rng.next_double() < kQualityTokenProb)
            text += quality_word(draw_band(u, rng), static_cast<int>(rng.bounded(kWordsPerBand)));
        else
            text += filler_word(static_cast<int>(rng.bounded(kFillerWords)));
    }
    return text;
}

std::string make_instruction(Rng& rng) {
    return "explain topic" + std::to_string(rng.bounded(50)) + " in detail";
}

std::string make_rubric(Rng& rng) {
    return "criteria c" + std::to_string(rng.bounded(20)) + " clarity depth accuracy";
}

std::string make_reference(Rng& rng) {
    // The ideal answer: a short burst of top-band words.
    std::string text;
    for (int t = 0; t < 8; ++t) {
        if (!text.empty()) text.push_back(' ');
        text += quality_word(5, static_cast<int>(rng.bounded(kWordsPerBand)));
    }
    return text;
}

int noisy_score(double u, const SyntheticSpec& spec, Rng& rng) {
    const double raw = u + spec.label_noise * rng.next_gaussian();
    return std::clamp(static_cast<int>(std::lround(raw)), 1, 5);
}

double draw_quality(Rng& rng) { return 1.0 + 4.0 * rng.next_double(); }

}  // namespace

std::vector<GradedSample> generate_absolute(const SyntheticSpec& spec) {
    if (spec.count == 0) throw ConfigError("generate_absolute: count must be > 0");
    if (spec.label_noise < 0.0) throw ConfigError("generate_absolute: label_noise must be >= 0");
    Rng rng(spec.seed);
    std::vector<GradedSample> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const double u = draw_quality(rng);
        GradedSample s;
        s.id = "syn-" + std::to_string(i);
        s.instruction = make_instruction(rng);
        s.response = make_response(u, rng);
        s.rubric = make_rubric(rng);
        s.reference_answer = make_reference(rng);
        s.score = noisy_score(u, spec, rng);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<PreferencePair> generate_preference(const SyntheticSpec& spec) {
    if (spec.count == 0) throw ConfigError("generate_preference: count must be > 0");
    if (!(spec.min_gap >= 0.0 && spec.min_gap < 4.0))
        throw ConfigError("generate_preference: min_gap must be in [0,4)");
    Rng rng(spec.seed);
    std::vector<PreferencePair> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const double ua = draw_quality(rng);
        double ub = draw_quality(rng);
        while (std::abs(ua - ub) < spec.min_gap) ub = draw_quality(rng);
        PreferencePair p;
        p.id = "pair-" + std::to_string(i);
        p.instruction = make_instruction(rng);
        p.rubric = make_rubric(rng);
        p.reference_answer = make_reference(rng);
        p.response_a = make_response(ua, rng);
        p.response_b = make_response(ub, rng);
        p.label = ua > ub ? PreferenceLabel::A : PreferenceLabel::B;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace ordgrade
