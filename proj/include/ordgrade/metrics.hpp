#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ordgrade/errors.hpp"

namespace ordgrade {

/// One evaluation row: model score against reference score.
struct ScorePair {
    double predicted = 0.0;
    double gold = 0.0;
};

/// All absolute-grading metrics for one run. Correlations and r_squared are
/// empty when undefined (fewer than two rows or a zero-variance column);
/// reporting prints "undefined" for those instead of a number.
struct MetricReport {
    std::optional<double> pearson;
    std::optional<double> spearman;
    std::optional<double> kendall;
    double mae = 0.0;
    double mse = 0.0;
    std::optional<double> r_squared;
    std::size_t n = 0;
};

struct ErrorMetrics {
    double mae = 0.0;
    double mse = 0.0;
    std::optional<double> r_squared;
};

namespace detail {

inline void split_columns(std::span<const ScorePair> pairs, std::vector<double>& x,
                          std::vector<double>& y) {
    x.resize(pairs.size());
    y.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        x[i] = pairs[i].predicted;
        y[i] = pairs[i].gold;
    }
}

inline std::optional<double> pearson_columns(std::span<const double> x,
                                             std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

/// Fractional (mean) ranks, 1-based; ties share the average of their
/// positions.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

// Sum over tie groups of t*(t-1)/2 for a sorted copy of v.
inline double tie_pair_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double total = 0.0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        total += t * (t - 1.0) / 2.0;
        i = j + 1;
    }
    return total;
}

}  // namespace detail

/// Product-moment correlation of predicted vs gold. Undefined (empty) for
/// n < 2 or a zero-variance column.
inline std::optional<double> pearson(std::span<const ScorePair> pairs) {
    std::vector<double> x, y;
    detail::split_columns(pairs, x, y);
    return detail::pearson_columns(x, y);
}

/// Pearson correlation of fractional ranks (average ranks for ties).
inline std::optional<double> spearman(std::span<const ScorePair> pairs) {
    if (pairs.size() < 2) return std::nullopt;
    std::vector<double> x, y;
    detail::split_columns(pairs, x, y);
    const std::vector<double> rx = detail::fractional_ranks(x);
    const std::vector<double> ry = detail::fractional_ranks(y);
    return detail::pearson_columns(rx, ry);
}

/// Kendall's tau-b over all n(n-1)/2 pairs, with tie correction in the
/// denominator. Undefined when either column is entirely tied.
inline std::optional<double> kendall_tau(std::span<const ScorePair> pairs) {
    const std::size_t n = pairs.size();
    if (n < 2) return std::nullopt;
    std::vector<double> x, y;
    detail::split_columns(pairs, x, y);
    double concordant = 0.0, discordant = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            const double prod = dx * dy;
            if (prod > 0.0)
                concordant += 1.0;
            else if (prod < 0.0)
                discordant += 1.0;
        }
    }
    const double n0 = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
    const double n1 = detail::tie_pair_count(x);
    const double n2 = detail::tie_pair_count(y);
    if (n0 - n1 == 0.0 || n0 - n2 == 0.0) return std::nullopt;
    return (concordant - discordant) / std::sqrt((n0 - n1) * (n0 - n2));
}

/// MAE, MSE and R-squared (about the gold mean). r_squared is undefined for
/// n < 2 or zero gold variance.
inline ErrorMetrics error_metrics(std::span<const ScorePair> pairs) {
    if (pairs.empty()) throw ConfigError("error_metrics: empty input");
    const double n = static_cast<double>(pairs.size());
    double abs_sum = 0.0, sq_sum = 0.0, gold_sum = 0.0;
    for (const auto& p : pairs) {
        const double d = p.predicted - p.gold;
        abs_sum += std::abs(d);
        sq_sum += d * d;
        gold_sum += p.gold;
    }
    ErrorMetrics em;
    em.mae = abs_sum / n;
    em.mse = sq_sum / n;
    if (pairs.size() >= 2) {
        const double gold_mean = gold_sum / n;
        double ss_tot = 0.0;
        for (const auto& p : pairs) {
            const double d = p.gold - gold_mean;
            ss_tot += d * d;
        }
        if (ss_tot > 0.0) em.r_squared = 1.0 - sq_sum / ss_tot;
    }
    return em;
}

/// Assembles the full report for one evaluation run.
inline MetricReport evaluate_scores(std::span<const ScorePair> pairs) {
    if (pairs.empty()) throw ConfigError("evaluate_scores: empty input");
    MetricReport r;
    r.n = pairs.size();
    r.pearson = pearson(pairs);
    r.spearman = spearman(pairs);
    r.kendall = kendall_tau(pairs);
    const ErrorMetrics em = error_metrics(pairs);
    r.mae = em.mae;
    r.mse = em.mse;
    r.r_squared = em.r_squared;
    return r;
}

// Serialization (JSON object with keys pearson, spearman, kendall, mae, mse,
// r2, n; undefined correlations become null) and a flat key-value text
// record. Implementations live in src/metrics_io.cpp.
nlohmann::json metric_report_to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);
std::string metric_report_to_text(const MetricReport& r);

}  // namespace ordgrade
