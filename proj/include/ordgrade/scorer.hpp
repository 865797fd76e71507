#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordgrade/dataset.hpp"
#include "ordgrade/losses.hpp"
#include "ordgrade/metrics.hpp"

namespace ordgrade {

enum class ModelKind { Classification, Regression };
enum class Schedule { Cosine, Constant };

/// Small differentiable scorer: an affine map, optionally preceded by one
/// tanh hidden layer (hidden_size 0 means plain affine). Classification
/// emits num_classes logits, Regression a single raw scalar.
struct ScorerModel {
    ModelKind kind = ModelKind::Classification;
    Index input_dim = 0;
    Index hidden_size = 0;
    Index num_classes = kDefaultClasses;

    Matrix w_hidden;  // hidden_size x input_dim (empty when hidden_size == 0)
    Vector b_hidden;  // hidden_size
    Matrix w_out;     // output_dim x (hidden_size ? hidden_size : input_dim)
    Vector b_out;     // output_dim

    Index output_dim() const { return kind == ModelKind::Classification ? num_classes : 1; }
    bool finite() const;
};

struct TrainConfig {
    LossSpec loss;
    double learning_rate = 2e-5;
    double weight_decay = 0.005;
    double warmup_ratio = 0.05;
    int epochs = 5;
    int batch_size = 32;
    std::uint64_t seed = 0;
    Schedule schedule = Schedule::Cosine;

    void validate() const;
};

/// Adam hyper-parameters; the optimizer name pins down only the update rule,
/// so these standard values are fixed here and documented.
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

struct EpochRecord {
    int epoch = 0;  // 1-based
    double validation_loss = 0.0;
    MetricReport validation_metrics;
};

struct StepRecord {
    long step = 0;  // 1-based update index
    double lr = 0.0;
    double train_loss = 0.0;  // batch loss at the pre-update parameters
};

struct TrainTrace {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 1-based; argmin validation loss, earliest on ties
};

/// Thrown when training produces a non-finite loss or parameter; carries the
/// trace recorded up to the failure.
class TrainingFailure : public NumericError {
  public:
    TrainingFailure(const std::string& msg, TrainTrace trace)
        : NumericError(msg), trace_(std::move(trace)) {}
    const TrainTrace& trace() const { return trace_; }

  private:
    TrainTrace trace_;
};

/// Decoupled-weight-decay adaptive-moment optimizer over one parameter
/// block. step() first shrinks the weights by lr * weight_decay * w, then
/// applies the bias-corrected moment update.
class AdamW {
  public:
    AdamW(Index rows, Index cols, double weight_decay)
        : weight_decay_(weight_decay), m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

    void step(Eigen::Ref<Matrix> param, const Matrix& grad, double lr);

  private:
    double weight_decay_;
    long t_ = 0;
    Matrix m_;
    Matrix v_;
};

/// Fan-in-scaled uniform init, zero biases; bit-deterministic per seed.
ScorerModel init_model(ModelKind kind, Index input_dim, Index hidden_size, std::uint64_t seed,
                       Index num_classes = kDefaultClasses);

/// Raw model output: logits (length num_classes) or one raw scalar.
Vector forward(const ScorerModel& model, const Vector& features);

/// Batched forward; one row of outputs per row of features.
Matrix forward_batch(const ScorerModel& model, const Matrix& features);

/// Learning rate at `step` of `total_steps`: linear warmup from 0 over
/// ceil(warmup_ratio * total_steps) steps up to the peak, then (Cosine)
/// cosine decay to 0 at total_steps or (Constant) flat peak.
double lr_at(const TrainConfig& config, long step, long total_steps);

struct LabeledFeatures {
    Matrix features;          // n x input_dim
    std::vector<int> scores;  // gold scores, 1..5
};

struct ModelGradients {
    Matrix w_hidden;
    Vector b_hidden;
    Matrix w_out;
    Vector b_out;
};

/// Mean batch loss and its gradients with respect to every parameter,
/// chained through the loss, the softmax (classification) and the optional
/// tanh hidden layer. This is the training step's core; it is public so the
/// analytic path can be checked against finite differences end to end.
double batch_loss_gradients(const ScorerModel& model, const Matrix& batch_features,
                            std::span<const int> batch_scores, const LossSpec& loss,
                            ModelGradients& grads);

struct TrainResult {
    ScorerModel model;  // snapshot at the best epoch
    TrainTrace trace;
};

/// Deterministic mini-batch training; returns the epoch snapshot with the
/// minimum validation loss plus the full trace.
TrainResult train(const ScorerModel& model, const LabeledFeatures& train_set,
                  const LabeledFeatures& validation_set, const TrainConfig& config);

struct Prediction {
    double score = 0.0;                 // always in [1, num_classes]
    std::optional<Vector> distribution; // softmax probabilities (classification only)
};

/// Classification: expected score of the softmax distribution. Regression:
/// raw output clamped to [1, num_classes].
Prediction predict_score(const ScorerModel& model, const Vector& features);

MetricReport evaluate_model(const ScorerModel& model, const LabeledFeatures& set);

/// Mean per-sample training loss of `model` on a set, used for validation.
double evaluation_loss(const ScorerModel& model, const LabeledFeatures& set,
                       const LossSpec& loss);

// ---------------------------------------------------------------------------
// Head comparison
// ---------------------------------------------------------------------------

struct HeadSpec {
    std::string name;
    ModelKind kind = ModelKind::Classification;
    LossSpec loss;
};

struct CompareCell {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    MetricReport metrics;           // at the best epoch
    std::vector<EpochRecord> curve; // per-epoch validation losses
};

struct CompareRow {
    HeadSpec head;
    std::vector<CompareCell> cells;      // one per seed, in input order
    std::optional<MetricReport> median;  // over non-failed seeds; empty if all failed
};

struct CompareTable {
    std::vector<CompareRow> rows;
};

/// Trains every head once per seed on identical splits and features and
/// reports per-seed metrics plus the per-metric median over seeds. All
/// heads share the same architecture (`hidden_size`); only the output
/// arity and loss differ. Rows and cells come back in input order
/// regardless of `jobs`.
CompareTable compare_losses(const Matrix& features, std::span<const int> scores,
                            const SplitSpec& split_spec, const TrainConfig& base_config,
                            std::span<const HeadSpec> heads, std::span<const std::uint64_t> seeds,
                            int jobs = 1, Index hidden_size = 0);

/// Per-metric median over seed cells (median of the defined values; an
/// all-undefined column stays undefined).
MetricReport median_report(std::span<const CompareCell> cells);

}  // namespace ordgrade
