#include "ordgrade/scorer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "ordgrade/dataset.hpp"
#include "ordgrade/rng.hpp"

namespace ordgrade {

bool ScorerModel::finite() const {
    const bool hidden_ok = hidden_size == 0 || (w_hidden.allFinite() && b_hidden.allFinite());
    return hidden_ok && w_out.allFinite() && b_out.allFinite();
}

void TrainConfig::validate() const {
    loss.validate();
    // learning_rate 0 is allowed as an explicit no-op diagnostic.
    if (learning_rate < 0.0) throw ConfigError("TrainConfig: learning_rate must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
    if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0))
        throw ConfigError("TrainConfig: warmup_ratio must be in [0,1)");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
}

void AdamW::step(Eigen::Ref<Matrix> param, const Matrix& grad, double lr) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols())
        throw ConfigError("AdamW: gradient shape mismatch");
    ++t_;
    // Decay is decoupled: applied to the weights directly, not via the
    // gradient, and before the moment update.
    if (weight_decay_ != 0.0) param -= (lr * weight_decay_) * param;
    m_ = kAdamBeta1 * m_ + (1.0 - kAdamBeta1) * grad;
    v_ = kAdamBeta2 * v_ + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
    const Matrix m_hat = m_ / bc1;
    const Matrix v_hat = v_ / bc2;
    param -= lr * (m_hat.array() / (v_hat.array().sqrt() + kAdamEpsilon)).matrix();
}

ScorerModel init_model(ModelKind kind, Index input_dim, Index hidden_size, std::uint64_t seed,
                       Index num_classes) {
    if (input_dim < 1) throw ConfigError("init_model: input_dim must be >= 1");
    if (hidden_size < 0) throw ConfigError("init_model: hidden_size must be >= 0");
    if (num_classes < 2) throw ConfigError("init_model: num_classes must be >= 2");

    ScorerModel m;
    m.kind = kind;
    m.input_dim = input_dim;
    m.hidden_size = hidden_size;
    m.num_classes = num_classes;

    Rng rng(seed);
    const auto uniform_fan_in = [&rng](Index rows, Index cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        Matrix w(rows, cols);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c) w(r, c) = (2.0 * rng.next_double() - 1.0) * bound;
        return w;
    };

    const Index out_dim = m.output_dim();
    if (hidden_size > 0) {
        m.w_hidden = uniform_fan_in(hidden_size, input_dim);
        m.b_hidden = Vector::Zero(hidden_size);
        m.w_out = uniform_fan_in(out_dim, hidden_size);
    } else {
        m.w_out = uniform_fan_in(out_dim, input_dim);
    }
    m.b_out = Vector::Zero(out_dim);
    return m;
}

Vector forward(const ScorerModel& model, const Vector& features) {
    if (features.size() != model.input_dim)
        throw ConfigError("forward: feature dim " + std::to_string(features.size()) +
                          " != model input dim " + std::to_string(model.input_dim));
    if (model.hidden_size == 0) return model.w_out * features + model.b_out;
    const Vector h = (model.w_hidden * features + model.b_hidden).array().tanh();
    return model.w_out * h + model.b_out;
}

Matrix forward_batch(const ScorerModel& model, const Matrix& features) {
    if (features.cols() != model.input_dim)
        throw ConfigError("forward_batch: feature dim " + std::to_string(features.cols()) +
                          " != model input dim " + std::to_string(model.input_dim));
    if (model.hidden_size == 0)
        return (features * model.w_out.transpose()).rowwise() + model.b_out.transpose();
    const Matrix h =
        ((features * model.w_hidden.transpose()).rowwise() + model.b_hidden.transpose())
            .array()
            .tanh();
    return (h * model.w_out.transpose()).rowwise() + model.b_out.transpose();
}

double lr_at(const TrainConfig& config, long step, long total_steps) {
    if (total_steps < 1) throw ConfigError("lr_at: total_steps must be >= 1");
    if (step < 0 || step > total_steps) throw ConfigError("lr_at: step outside [0, total_steps]");
    const long warmup =
        static_cast<long>(std::ceil(config.warmup_ratio * static_cast<double>(total_steps)));
    if (warmup > 0 && step <= warmup)
        return config.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
    if (config.schedule == Schedule::Constant) return config.learning_rate;
    if (step == total_steps) return 0.0;  // exact terminus; cos(M_PI) misses -1 by an ulp
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return config.learning_rate * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// dL/d(outputs) comes from loss_gradient; the affine/tanh backward is
// hand-rolled here.
double batch_loss_gradients(const ScorerModel& model, const Matrix& batch_features,
                            std::span<const int> batch_scores, const LossSpec& loss,
                            ModelGradients& grads) {
    const Index b = batch_features.rows();
    const Matrix outputs = forward_batch(model, batch_features);

    double loss_acc = 0.0;
    Matrix d_out(b, outputs.cols());
    for (Index r = 0; r < b; ++r) {
        const Vector row = outputs.row(r).transpose();
        loss_acc += sample_loss(row, batch_scores[r], loss);
        d_out.row(r) = loss_gradient(row, batch_scores[r], loss).transpose();
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    loss_acc *= inv_b;
    d_out *= inv_b;

    if (model.hidden_size == 0) {
        grads.w_out = d_out.transpose() * batch_features;
        grads.b_out = d_out.colwise().sum().transpose();
        return loss_acc;
    }
    const Matrix h =
        ((batch_features * model.w_hidden.transpose()).rowwise() + model.b_hidden.transpose())
            .array()
            .tanh();
    grads.w_out = d_out.transpose() * h;
    grads.b_out = d_out.colwise().sum().transpose();
    const Matrix d_h = d_out * model.w_out;
    const Matrix d_pre = d_h.array() * (1.0 - h.array().square());
    grads.w_hidden = d_pre.transpose() * batch_features;
    grads.b_hidden = d_pre.colwise().sum().transpose();
    return loss_acc;
}

namespace {

void check_features(const LabeledFeatures& set, const ScorerModel& model, const char* who) {
    if (set.features.rows() == 0) throw ConfigError(std::string(who) + ": empty set");
    if (set.features.rows() != static_cast<Index>(set.scores.size()))
        throw ConfigError(std::string(who) + ": features/scores length mismatch");
    if (set.features.cols() != model.input_dim)
        throw ConfigError(std::string(who) + ": feature dim mismatch");
    for (int s : set.scores)
        if (s < 1 || s > model.num_classes)
            throw ConfigError(std::string(who) + ": score outside 1.." +
                              std::to_string(model.num_classes));
}

void check_loss_matches_head(const ScorerModel& model, const LossSpec& loss) {
    const bool regression_loss = loss.kind == LossKind::MeanSquaredError;
    if (regression_loss != (model.kind == ModelKind::Regression))
        throw ConfigError("train: loss kind does not match the model head");
}

}  // namespace

double evaluation_loss(const ScorerModel& model, const LabeledFeatures& set,
                       const LossSpec& loss) {
    check_features(set, model, "evaluation_loss");
    LossSpec eval = loss;
    eval.reduction = Reduction::SampleMean;
    const Matrix outputs = forward_batch(model, set.features);
    return batch_loss(outputs, set.scores, eval);
}

Prediction predict_score(const ScorerModel& model, const Vector& features) {
    const Vector out = forward(model, features);
    Prediction pred;
    if (model.kind == ModelKind::Classification) {
        Vector dist = softmax(out);
        pred.score = expected_score(dist);
        pred.distribution = std::move(dist);
    } else {
        pred.score = std::clamp(out[0], 1.0, static_cast<double>(model.num_classes));
    }
    return pred;
}

MetricReport evaluate_model(const ScorerModel& model, const LabeledFeatures& set) {
    check_features(set, model, "evaluate_model");
    std::vector<ScorePair> pairs(set.scores.size());
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const Vector f = set.features.row(static_cast<Index>(i)).transpose();
        pairs[i] = {predict_score(model, f).score, static_cast<double>(set.scores[i])};
    }
    return evaluate_scores(pairs);
}

TrainResult train(const ScorerModel& model, const LabeledFeatures& train_set,
                  const LabeledFeatures& validation_set, const TrainConfig& config) {
    config.validate();
    check_features(train_set, model, "train");
    check_features(validation_set, model, "train(validation)");
    check_loss_matches_head(model, config.loss);
    if (!model.finite()) throw ConfigError("train: non-finite initial parameters");

    ScorerModel current = model;
    const Index n = train_set.features.rows();
    const long steps_per_epoch =
        (n + config.batch_size - 1) / config.batch_size;  // last partial batch kept
    const long total_steps = steps_per_epoch * config.epochs;

    const bool has_hidden = current.hidden_size > 0;
    AdamW opt_w_out(current.w_out.rows(), current.w_out.cols(), config.weight_decay);
    AdamW opt_b_out(current.b_out.size(), 1, config.weight_decay);
    AdamW opt_w_hidden(has_hidden ? current.w_hidden.rows() : 0,
                       has_hidden ? current.w_hidden.cols() : 0, config.weight_decay);
    AdamW opt_b_hidden(has_hidden ? current.b_hidden.size() : 0, has_hidden ? 1 : 0,
                       config.weight_decay);

    TrainTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(total_steps));
    Rng shuffle_root(config.seed);
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;

    ScorerModel best = current;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    long step = 0;
    ModelGradients grads;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng = shuffle_root.fork(static_cast<std::uint64_t>(epoch));
        for (Index i = n - 1; i > 0; --i) {
            const Index j = static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }
        for (long b = 0; b < steps_per_epoch; ++b) {
            const Index begin = static_cast<Index>(b) * config.batch_size;
            const Index size = std::min<Index>(config.batch_size, n - begin);
            Matrix batch(size, current.input_dim);
            std::vector<int> scores(static_cast<std::size_t>(size));
            for (Index r = 0; r < size; ++r) {
                batch.row(r) = train_set.features.row(order[begin + r]);
                scores[static_cast<std::size_t>(r)] = train_set.scores[order[begin + r]];
            }

            const double lr = lr_at(config, step + 1, total_steps);
            const double loss = batch_loss_gradients(current, batch, scores, config.loss, grads);
            ++step;
            trace.steps.push_back({step, lr, loss});
            if (!std::isfinite(loss))
                throw TrainingFailure("train: non-finite loss at step " + std::to_string(step),
                                      std::move(trace));

            opt_w_out.step(current.w_out, grads.w_out, lr);
            opt_b_out.step(current.b_out, grads.b_out, lr);
            if (has_hidden) {
                opt_w_hidden.step(current.w_hidden, grads.w_hidden, lr);
                opt_b_hidden.step(current.b_hidden, grads.b_hidden, lr);
            }
            if (!current.finite())
                throw TrainingFailure(
                    "train: non-finite parameters at step " + std::to_string(step),
                    std::move(trace));
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.validation_loss = evaluation_loss(current, validation_set, config.loss);
        rec.validation_metrics = evaluate_model(current, validation_set);
        trace.epochs.push_back(rec);
        if (!std::isfinite(rec.validation_loss))
            throw TrainingFailure("train: non-finite validation loss after epoch " +
                                      std::to_string(epoch),
                                  std::move(trace));
        if (rec.validation_loss < best_loss) {
            best_loss = rec.validation_loss;
            best = current;
            best_epoch = epoch;
        }
    }
    trace.best_epoch = best_epoch;
    return {std::move(best), std::move(trace)};
}

MetricReport median_report(std::span<const CompareCell> cells) {
    const auto median_of = [](std::vector<double> v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        std::sort(v.begin(), v.end());
        const std::size_t mid = v.size() / 2;
        if (v.size() % 2 == 1) return v[mid];
        return 0.5 * (v[mid - 1] + v[mid]);
    };
    std::vector<double> pe, sp, ke, mae, mse, r2;
    std::size_t n = 0;
    for (const auto& c : cells) {
        if (c.failed) continue;
        const MetricReport& m = c.metrics;
        if (m.pearson) pe.push_back(*m.pearson);
        if (m.spearman) sp.push_back(*m.spearman);
        if (m.kendall) ke.push_back(*m.kendall);
        mae.push_back(m.mae);
        mse.push_back(m.mse);
        if (m.r_squared) r2.push_back(*m.r_squared);
        n = std::max(n, m.n);
    }
    MetricReport out;
    out.pearson = median_of(pe);
    out.spearman = median_of(sp);
    out.kendall = median_of(ke);
    out.mae = median_of(mae).value_or(0.0);
    out.mse = median_of(mse).value_or(0.0);
    out.r_squared = median_of(r2);
    out.n = n;
    return out;
}

CompareTable compare_losses(const Matrix& features, std::span<const int> scores,
                            const SplitSpec& split_spec, const TrainConfig& base_config,
                            std::span<const HeadSpec> heads, std::span<const std::uint64_t> seeds,
                            int jobs, Index hidden_size) {
    if (heads.size() < 2) throw ConfigError("compare_losses: need at least 2 head configs");
    if (seeds.empty()) throw ConfigError("compare_losses: need at least 1 seed");
    if (features.rows() != static_cast<Index>(scores.size()))
        throw ConfigError("compare_losses: features/scores length mismatch");
    if (jobs < 1) throw ConfigError("compare_losses: jobs must be >= 1");

    // Per-seed splits are shared across heads so every configuration sees
    // identical data.
    struct SeedData {
        LabeledFeatures train, validation;
    };
    std::vector<SeedData> per_seed(seeds.size());
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        SplitSpec s = split_spec;
        s.seed = seeds[si];
        const auto [train_idx, val_idx] = split_indices(static_cast<std::size_t>(features.rows()), s);
        auto gather = [&](const std::vector<std::size_t>& idx) {
            LabeledFeatures lf;
            lf.features.resize(static_cast<Index>(idx.size()), features.cols());
            lf.scores.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                lf.features.row(static_cast<Index>(i)) = features.row(static_cast<Index>(idx[i]));
                lf.scores[i] = scores[static_cast<Index>(idx[i])];
            }
            return lf;
        };
        per_seed[si] = {gather(train_idx), gather(val_idx)};
    }

    CompareTable table;
    table.rows.resize(heads.size());
    for (std::size_t h = 0; h < heads.size(); ++h) {
        table.rows[h].head = heads[h];
        table.rows[h].cells.resize(seeds.size());
    }

    struct Job {
        std::size_t head, seed_index;
    };
    std::vector<Job> queue;
    for (std::size_t h = 0; h < heads.size(); ++h)
        for (std::size_t si = 0; si < seeds.size(); ++si) queue.push_back({h, si});

    std::atomic<std::size_t> cursor{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t k = cursor.fetch_add(1);
            if (k >= queue.size()) return;
            const Job job = queue[k];
            const HeadSpec& head = heads[job.head];
            CompareCell& cell = table.rows[job.head].cells[job.seed_index];
            cell.seed = seeds[job.seed_index];
            TrainConfig config = base_config;
            config.loss = head.loss;
            config.seed = seeds[job.seed_index];
            try {
                const SeedData& data = per_seed[job.seed_index];
                ScorerModel init = init_model(head.kind, features.cols(), hidden_size, config.seed);
                TrainResult result = train(init, data.train, data.validation, config);
                cell.curve = result.trace.epochs;
                cell.metrics =
                    result.trace.epochs[static_cast<std::size_t>(result.trace.best_epoch - 1)]
                        .validation_metrics;
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
    };

    const int workers = std::min<int>(jobs, static_cast<int>(queue.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (auto& row : table.rows) {
        const bool any_ok =
            std::any_of(row.cells.begin(), row.cells.end(), [](const auto& c) { return !c.failed; });
        if (any_ok) row.median = median_report(row.cells);
    }
    return table;
}

}  // namespace ordgrade
