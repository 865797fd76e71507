#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>

#include "ordgrade/errors.hpp"

namespace ordgrade {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr Index kDefaultClasses = 5;
inline constexpr double kDistributionTol = 1e-9;
inline constexpr double kLogClamp = 1e-12;       // floor for log arguments in cross-entropy
inline constexpr double kGradPowerFloor = 1e-12; // |gap| floor inside fractional powers

enum class LossKind {
    CrossEntropy,
    SquaredEmd,
    GeneralizedEmd,
    NormalizedEmd,
    MeanSquaredError,
};

enum class Reduction {
    SampleMean,       // mean over per-sample losses
    ClassSumBatchMean // per-class squared-gap sums over the batch, then / batch size
};

/// Loss selector with its parameters. p_order and alpha parameterize the
/// generalized Minkowski form (sum |gap|^p)^(alpha/p); l_order is the norm
/// order of the normalized form (1/C)^(1/l) * ||gap||_l.
struct LossSpec {
    LossKind kind = LossKind::SquaredEmd;
    double p_order = 2.0;
    double alpha = 2.0;
    double l_order = 2.0;
    Reduction reduction = Reduction::SampleMean;

    void validate() const {
        if (!(p_order > 0.0)) throw ConfigError("LossSpec: p_order must be > 0");
        if (!(alpha > 0.0)) throw ConfigError("LossSpec: alpha must be > 0");
        if (!(l_order > 0.0)) throw ConfigError("LossSpec: l_order must be > 0");
    }
};

inline const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::CrossEntropy: return "cross-entropy";
        case LossKind::SquaredEmd: return "squared-emd";
        case LossKind::GeneralizedEmd: return "generalized-emd";
        case LossKind::NormalizedEmd: return "normalized-emd";
        case LossKind::MeanSquaredError: return "mse";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Probability-vector plumbing
// ---------------------------------------------------------------------------

template <typename Derived>
bool is_distribution(const Eigen::MatrixBase<Derived>& p, double tol = kDistributionTol) {
    if (p.size() == 0) return false;
    if (!p.allFinite()) return false;
    if ((p.array() < 0.0).any()) return false;
    return std::abs(p.sum() - 1.0) <= tol;
}

template <typename Derived>
void require_distribution(const Eigen::MatrixBase<Derived>& p, const char* who) {
    if (!is_distribution(p))
        throw ConfigError(std::string(who) + ": input is not a probability vector");
}

inline Vector one_hot(int klass, Index classes = kDefaultClasses) {
    if (klass < 1 || klass > classes)
        throw ConfigError("one_hot: class " + std::to_string(klass) + " outside 1.." +
                          std::to_string(classes));
    Vector v = Vector::Zero(classes);
    v[klass - 1] = 1.0;
    return v;
}

/// Numerically stable softmax (max subtraction; safe for |logit| up to 1e4
/// and beyond). Throws on non-finite input.
template <typename Derived>
Vector softmax(const Eigen::MatrixBase<Derived>& logits) {
    if (logits.size() == 0 || !logits.allFinite())
        throw ConfigError("softmax: logits must be non-empty and finite");
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

/// Cumulative sum of a probability vector. The result is non-decreasing with
/// final entry 1 (within the distribution tolerance).
template <typename Derived>
Vector cdf(const Eigen::MatrixBase<Derived>& dist) {
    require_distribution(dist, "cdf");
    Vector out(dist.size());
    double acc = 0.0;
    for (Index i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        out[i] = acc;
    }
    return out;
}

// Cumulative sum without the distribution check, for internal gradient paths
// that already validated their inputs.
template <typename Derived>
Vector cumsum(const Eigen::MatrixBase<Derived>& v) {
    Vector out(v.size());
    double acc = 0.0;
    for (Index i = 0; i < v.size(); ++i) {
        acc += v[i];
        out[i] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distribution-level losses
// ---------------------------------------------------------------------------

/// Sum of squared CDF gaps: sum_i (CDF_i(pred) - CDF_i(gt))^2.
/// Symmetric, zero iff pred == gt, and bounded by C - 1.
template <typename DerivedP, typename DerivedT>
double squared_emd(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& gt) {
    require_distribution(pred, "squared_emd");
    require_distribution(gt, "squared_emd");
    if (pred.size() != gt.size()) throw ConfigError("squared_emd: size mismatch");
    return (cdf(pred) - cdf(gt)).squaredNorm();
}

/// Generalized Minkowski form over CDF gaps: (sum_i |gap_i|^p)^(alpha/p).
/// alpha == p == 2 reduces to squared_emd.
template <typename DerivedP, typename DerivedT>
double generalized_emd(const Eigen::MatrixBase<DerivedP>& pred,
                       const Eigen::MatrixBase<DerivedT>& gt, double p_order, double alpha) {
    if (!(p_order > 0.0)) throw ConfigError("generalized_emd: p_order must be > 0");
    if (!(alpha > 0.0)) throw ConfigError("generalized_emd: alpha must be > 0");
    require_distribution(pred, "generalized_emd");
    require_distribution(gt, "generalized_emd");
    if (pred.size() != gt.size()) throw ConfigError("generalized_emd: size mismatch");
    const Vector gap = cdf(pred) - cdf(gt);
    const double s = gap.array().abs().pow(p_order).sum();
    if (s == 0.0) return 0.0;
    return std::pow(s, alpha / p_order);
}

/// Normalized form (1/C)^(1/l) * ||CDF(pred) - CDF(gt)||_l. Values lie in
/// [0, 1] since each gap is at most 1 in magnitude.
template <typename DerivedP, typename DerivedT>
double normalized_emd(const Eigen::MatrixBase<DerivedP>& pred,
                      const Eigen::MatrixBase<DerivedT>& gt, double l_order = 2.0) {
    if (!(l_order > 0.0)) throw ConfigError("normalized_emd: l_order must be > 0");
    require_distribution(pred, "normalized_emd");
    require_distribution(gt, "normalized_emd");
    if (pred.size() != gt.size()) throw ConfigError("normalized_emd: size mismatch");
    const Vector gap = cdf(pred) - cdf(gt);
    const double s = gap.array().abs().pow(l_order).sum();
    if (s == 0.0) return 0.0;
    const double c = static_cast<double>(pred.size());
    return std::pow(1.0 / c, 1.0 / l_order) * std::pow(s, 1.0 / l_order);
}

/// -log(pred[gt_class]), with the argument clamped to kLogClamp so a
/// saturated softmax cannot produce infinity. Depends only on the gold-class
/// probability, so any two misclassifications with the same pred[gt] cost
/// the same.
template <typename Derived>
double cross_entropy(const Eigen::MatrixBase<Derived>& pred, int gt_class) {
    require_distribution(pred, "cross_entropy");
    if (gt_class < 1 || gt_class > pred.size())
        throw ConfigError("cross_entropy: gt_class " + std::to_string(gt_class) + " outside 1.." +
                          std::to_string(pred.size()));
    return -std::log(std::max(pred[gt_class - 1], kLogClamp));
}

// ---------------------------------------------------------------------------
// Logit-level interface (what training consumes)
// ---------------------------------------------------------------------------

/// Per-sample loss from raw logits. Classification kinds softmax the logits
/// against a one-hot target; MeanSquaredError expects a single raw output
/// and treats gt_class as the regression target.
template <typename Derived>
double sample_loss(const Eigen::MatrixBase<Derived>& logits, int gt_class, const LossSpec& spec) {
    spec.validate();
    if (spec.kind == LossKind::MeanSquaredError) {
        if (logits.size() != 1)
            throw ConfigError("sample_loss: mse expects a single output, got " +
                              std::to_string(logits.size()));
        if (!logits.allFinite()) throw ConfigError("sample_loss: non-finite output");
        const double d = logits[0] - static_cast<double>(gt_class);
        return d * d;
    }
    const Vector p = softmax(logits);
    const Vector t = one_hot(gt_class, logits.size());
    switch (spec.kind) {
        case LossKind::CrossEntropy: return cross_entropy(p, gt_class);
        case LossKind::SquaredEmd: return squared_emd(p, t);
        case LossKind::GeneralizedEmd: return generalized_emd(p, t, spec.p_order, spec.alpha);
        case LossKind::NormalizedEmd: return normalized_emd(p, t, spec.l_order);
        default: break;
    }
    throw ConfigError("sample_loss: unknown loss kind");
}

namespace detail {

// d(loss)/d(cdf gap) for the EMD family, with the subgradient convention:
// terms at an exact zero gap contribute nothing, and fractional powers of
// |gap| are floored at kGradPowerFloor to avoid overflow for p < 1.
inline Vector emd_gap_gradient(const Vector& gap, const LossSpec& spec) {
    const Index c = gap.size();
    Vector g = Vector::Zero(c);
    switch (spec.kind) {
        case LossKind::SquaredEmd:
            g = 2.0 * gap;
            break;
        case LossKind::GeneralizedEmd: {
            const double s = gap.array().abs().pow(spec.p_order).sum();
            if (s == 0.0) return g;
            const double outer = spec.alpha * std::pow(s, spec.alpha / spec.p_order - 1.0);
            for (Index i = 0; i < c; ++i) {
                const double a = std::abs(gap[i]);
                if (a == 0.0) continue;
                g[i] = outer * std::pow(std::max(a, kGradPowerFloor), spec.p_order - 1.0) *
                       (gap[i] > 0.0 ? 1.0 : -1.0);
            }
            break;
        }
        case LossKind::NormalizedEmd: {
            const double s = gap.array().abs().pow(spec.l_order).sum();
            if (s == 0.0) return g;
            const double outer = std::pow(1.0 / static_cast<double>(c), 1.0 / spec.l_order) *
                                 std::pow(s, 1.0 / spec.l_order - 1.0);
            for (Index i = 0; i < c; ++i) {
                const double a = std::abs(gap[i]);
                if (a == 0.0) continue;
                g[i] = outer * std::pow(std::max(a, kGradPowerFloor), spec.l_order - 1.0) *
                       (gap[i] > 0.0 ? 1.0 : -1.0);
            }
            break;
        }
        default:
            throw ConfigError("emd_gap_gradient: not an EMD kind");
    }
    return g;
}

// Reverse cumulative sum: out_j = sum_{i >= j} v_i.
inline Vector reverse_cumsum(const Vector& v) {
    Vector out(v.size());
    double acc = 0.0;
    for (Index i = v.size() - 1; i >= 0; --i) {
        acc += v[i];
        out[i] = acc;
    }
    return out;
}

}  // namespace detail

/// Analytic d(loss)/d(logits), chained through softmax and the cumulative
/// sum. For MeanSquaredError the input is the single raw output and the
/// result is d/d(output).
template <typename Derived>
Vector loss_gradient(const Eigen::MatrixBase<Derived>& logits, int gt_class,
                     const LossSpec& spec) {
    spec.validate();
    if (spec.kind == LossKind::MeanSquaredError) {
        if (logits.size() != 1)
            throw ConfigError("loss_gradient: mse expects a single output");
        if (!logits.allFinite()) throw ConfigError("loss_gradient: non-finite output");
        Vector g(1);
        g[0] = 2.0 * (logits[0] - static_cast<double>(gt_class));
        return g;
    }
    const Vector p = softmax(logits);
    if (gt_class < 1 || gt_class > logits.size())
        throw ConfigError("loss_gradient: gt_class outside 1.." + std::to_string(logits.size()));

    Vector dp;  // d(loss)/d(probabilities)
    if (spec.kind == LossKind::CrossEntropy) {
        // Closed form: the softmax+log chain collapses to p - one_hot(gt),
        // unless the gold probability sits below the clamp (then the loss is
        // locally constant).
        if (p[gt_class - 1] <= kLogClamp) return Vector::Zero(logits.size());
        return p - one_hot(gt_class, logits.size());
    }
    const Vector gap = cumsum(p) - cumsum(one_hot(gt_class, logits.size()));
    const Vector dgap = detail::emd_gap_gradient(gap, spec);
    // d(gap_i)/d(p_j) = [j <= i], so d/d(p_j) is a reverse cumulative sum.
    dp = detail::reverse_cumsum(dgap);
    // Softmax backward: dz_k = p_k * (dp_k - p . dp).
    const double dot = p.dot(dp);
    return (p.array() * (dp.array() - dot)).matrix();
}

/// Batch reduction over rows of `logits` (one sample per row; a single
/// column when spec.kind is MeanSquaredError).
///
/// SampleMean averages per-sample losses. ClassSumBatchMean accumulates the
/// squared CDF gap per class across the batch, sums the class totals, and
/// divides by the batch size; it is defined for SquaredEmd only, where it is
/// a linear rearrangement of SampleMean.
inline double batch_loss(const Matrix& logits, std::span<const int> gt_classes,
                         const LossSpec& spec) {
    spec.validate();
    const Index n = logits.rows();
    if (n == 0) throw ConfigError("batch_loss: empty batch");
    if (static_cast<Index>(gt_classes.size()) != n)
        throw ConfigError("batch_loss: batch size mismatch");

    if (spec.reduction == Reduction::ClassSumBatchMean) {
        if (spec.kind != LossKind::SquaredEmd)
            throw ConfigError("batch_loss: ClassSumBatchMean is defined for squared-emd only");
        Vector class_sums = Vector::Zero(logits.cols());
        for (Index r = 0; r < n; ++r) {
            const Vector p = softmax(logits.row(r).transpose());
            const Vector gap = cumsum(p) - cumsum(one_hot(gt_classes[r], logits.cols()));
            class_sums += gap.array().square().matrix();
        }
        return class_sums.sum() / static_cast<double>(n);
    }

    double acc = 0.0;
    for (Index r = 0; r < n; ++r)
        acc += sample_loss(logits.row(r).transpose(), gt_classes[r], spec);
    return acc / static_cast<double>(n);
}

/// Expected score of a distribution over ordinal classes 1..C.
template <typename Derived>
double expected_score(const Eigen::MatrixBase<Derived>& dist) {
    require_distribution(dist, "expected_score");
    double acc = 0.0;
    for (Index i = 0; i < dist.size(); ++i) acc += static_cast<double>(i + 1) * dist[i];
    return acc;
}

}  // namespace ordgrade
