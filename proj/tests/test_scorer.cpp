#include <doctest.h>

#include <cmath>

#include "ordgrade/scorer.hpp"
#include "test_support.hpp"

using namespace ordgrade;
using namespace ordgrade::testing;

namespace {

// A linearly separable 5-class toy: the class is written into the first
// five feature coordinates, plus low-amplitude noise elsewhere.
LabeledFeatures make_toy(std::size_t n, Index dim, std::uint64_t seed) {
    Rng rng(seed);
    LabeledFeatures set;
    set.features = Matrix::Zero(static_cast<Index>(n), dim);
    set.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int klass = 1 + static_cast<int>(rng.bounded(5));
        set.scores[i] = klass;
        set.features(static_cast<Index>(i), klass - 1) = 1.0;
        for (Index d = 5; d < dim; ++d)
            set.features(static_cast<Index>(i), d) = 0.05 * (2.0 * rng.next_double() - 1.0);
    }
    return set;
}

TrainConfig toy_config(LossKind kind) {
    TrainConfig c;
    c.loss.kind = kind;
    c.learning_rate = 0.05;
    c.epochs = 5;
    c.batch_size = 16;
    c.seed = 1;
    return c;
}

}  // namespace

TEST_CASE("init_model is bit-deterministic per seed") {
    const ScorerModel a = init_model(ModelKind::Classification, 32, 8, 77);
    const ScorerModel b = init_model(ModelKind::Classification, 32, 8, 77);
    CHECK(a.w_out == b.w_out);
    CHECK(a.w_hidden == b.w_hidden);
    const ScorerModel c = init_model(ModelKind::Classification, 32, 8, 78);
    CHECK(a.w_out != c.w_out);
}

TEST_CASE("hidden_size 0 yields a single affine map") {
    const ScorerModel m = init_model(ModelKind::Regression, 16, 0, 3);
    CHECK(m.w_hidden.size() == 0);
    CHECK(m.w_out.rows() == 1);
    CHECK(m.w_out.cols() == 16);
    CHECK(m.b_out.size() == 1);
    CHECK((m.b_out.array() == 0.0).all());
}

TEST_CASE("a fresh classification model predicts near-uniform probabilities") {
    const ScorerModel m = init_model(ModelKind::Classification, 256, 0, 5);
    Rng rng(999);  // decorrelated from the init stream
    for (int it = 0; it < 20; ++it) {
        Vector f(256);
        for (Index i = 0; i < 256; ++i) f[i] = 2.0 * rng.next_double() - 1.0;
        f.normalize();
        const Vector probs = softmax(forward(m, f));
        for (Index i = 0; i < 5; ++i) CHECK(std::abs(probs[i] - 0.2) < 0.05);
    }
}

TEST_CASE("forward of a zero input through a zero-bias model is zero") {
    const ScorerModel m = init_model(ModelKind::Classification, 8, 0, 11);
    CHECK(forward(m, Vector::Zero(8)).norm() == 0.0);
}

TEST_CASE("a zero-bias linear model is homogeneous") {
    const ScorerModel m = init_model(ModelKind::Classification, 8, 0, 13);
    Rng rng(13);
    const Vector f = random_logits(rng, 8, 1.0);
    const Vector lhs = forward(m, 3.0 * f);
    const Vector rhs = 3.0 * forward(m, f);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("forward matches a hand-computed tiny fixture") {
    ScorerModel m;
    m.kind = ModelKind::Regression;
    m.input_dim = 2;
    m.hidden_size = 0;
    m.w_out = Matrix(1, 2);
    m.w_out << 0.5, -0.25;
    m.b_out = Vector::Constant(1, 0.1);
    Vector f(2);
    f << 2.0, 4.0;
    // 0.5*2 - 0.25*4 + 0.1 = 0.1
    CHECK(forward(m, f)[0] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("forward rejects dimension mismatches") {
    const ScorerModel m = init_model(ModelKind::Regression, 8, 0, 1);
    CHECK_THROWS_AS(forward(m, Vector::Zero(7)), ConfigError);
    CHECK_THROWS_AS(forward_batch(m, Matrix::Zero(3, 9)), ConfigError);
}

TEST_CASE("forward_batch agrees with row-by-row forward") {
    const ScorerModel m = init_model(ModelKind::Classification, 12, 6, 19);
    Rng rng(19);
    Matrix features(4, 12);
    for (Index r = 0; r < 4; ++r) features.row(r) = random_logits(rng, 12, 1.0).transpose();
    const Matrix batch = forward_batch(m, features);
    for (Index r = 0; r < 4; ++r) {
        const Vector single = forward(m, features.row(r).transpose());
        CHECK((batch.row(r).transpose() - single).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("learning-rate schedule endpoints and joint") {
    TrainConfig c;
    c.learning_rate = 0.1;
    c.warmup_ratio = 0.05;
    const long total = 100;  // warmup = ceil(5) = 5
    CHECK(lr_at(c, 0, total) == 0.0);
    CHECK(lr_at(c, 5, total) == 0.1);
    CHECK(lr_at(c, total, total) == 0.0);
    // The cosine branch evaluated at the joint equals the warmup peak.
    const double cosine_at_joint = 0.1 * 0.5 * (1.0 + std::cos(0.0));
    CHECK(std::abs(lr_at(c, 5, total) - cosine_at_joint) < 1e-9);
    for (long s = 0; s <= total; ++s) {
        CHECK(lr_at(c, s, total) >= 0.0);
        CHECK(lr_at(c, s, total) <= 0.1 + 1e-15);
    }
}

TEST_CASE("constant schedule holds the peak after warmup") {
    TrainConfig c;
    c.learning_rate = 0.2;
    c.warmup_ratio = 0.1;
    c.schedule = Schedule::Constant;
    CHECK(lr_at(c, 0, 50) == 0.0);
    CHECK(lr_at(c, 5, 50) == 0.2);
    CHECK(lr_at(c, 30, 50) == 0.2);
    CHECK(lr_at(c, 50, 50) == 0.2);
}

TEST_CASE("one optimizer step matches the hand-computed moment update") {
    // 3-parameter fixture, fresh state, weight decay 0: after one step
    //   m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    Matrix w(3, 1);
    w << 1.0, -2.0, 0.5;
    Matrix g(3, 1);
    g << 0.3, -0.1, 0.0;
    const double lr = 0.01;
    Matrix expected(3, 1);
    for (int i = 0; i < 3; ++i) {
        const double m_hat = g(i, 0);
        const double v_hat = g(i, 0) * g(i, 0);
        expected(i, 0) = w(i, 0) - lr * (m_hat / (std::sqrt(v_hat) + kAdamEpsilon));
    }
    AdamW opt(3, 1, 0.0);
    opt.step(w, g, lr);
    CHECK((w - expected).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("a zero-gradient step shrinks weights by exactly lr * decay * w") {
    Matrix w(3, 1);
    w << 1.0, -2.0, 0.5;
    const Matrix w0 = w;
    const double lr = 0.1, decay = 0.01;
    AdamW opt(3, 1, decay);
    opt.step(w, Matrix::Zero(3, 1), lr);
    const Matrix expected = w0 - (lr * decay) * w0;
    CHECK(w == expected);
}

TEST_CASE("bias correction follows the running moments over several steps") {
    // Two steps with a constant gradient, checked against the closed form.
    Matrix w = Matrix::Zero(1, 1);
    Matrix g = Matrix::Constant(1, 1, 0.5);
    const double lr = 0.001;
    AdamW opt(1, 1, 0.0);
    opt.step(w, g, lr);
    opt.step(w, g, lr);
    double m = 0, v = 0, wref = 0;
    for (int t = 1; t <= 2; ++t) {
        m = kAdamBeta1 * m + (1 - kAdamBeta1) * 0.5;
        v = kAdamBeta2 * v + (1 - kAdamBeta2) * 0.25;
        const double m_hat = m / (1 - std::pow(kAdamBeta1, t));
        const double v_hat = v / (1 - std::pow(kAdamBeta2, t));
        wref -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
    CHECK(w(0, 0) == doctest::Approx(wref).epsilon(1e-12));
}

TEST_CASE("training with learning rate 0 is a no-op that still traces") {
    const LabeledFeatures train_set = make_toy(64, 16, 2);
    const LabeledFeatures val_set = make_toy(32, 16, 3);
    TrainConfig c = toy_config(LossKind::SquaredEmd);
    c.learning_rate = 0.0;
    c.epochs = 2;
    const ScorerModel init = init_model(ModelKind::Classification, 16, 0, 5);
    const TrainResult r = train(init, train_set, val_set, c);
    CHECK(r.model.w_out == init.w_out);
    CHECK(r.model.b_out == init.b_out);
    CHECK(r.trace.steps.size() == 2 * 4);  // 64 / 16 batches per epoch
    CHECK(r.trace.epochs.size() == 2);
}

TEST_CASE("the toy problem trains to validation MAE below 0.2") {
    const LabeledFeatures train_set = make_toy(500, 16, 11);
    const LabeledFeatures val_set = make_toy(100, 16, 12);
    for (LossKind kind : {LossKind::SquaredEmd, LossKind::CrossEntropy}) {
        const ScorerModel init = init_model(ModelKind::Classification, 16, 0, 21);
        const TrainResult r = train(init, train_set, val_set, toy_config(kind));
        const MetricReport& m =
            r.trace.epochs[static_cast<std::size_t>(r.trace.best_epoch - 1)].validation_metrics;
        CAPTURE(loss_kind_name(kind));
        CHECK(m.mae < 0.2);
    }
    // Regression reaches the same bar with the MSE head.
    const ScorerModel init = init_model(ModelKind::Regression, 16, 0, 21);
    const TrainResult r = train(init, train_set, val_set, toy_config(LossKind::MeanSquaredError));
    const MetricReport& m =
        r.trace.epochs[static_cast<std::size_t>(r.trace.best_epoch - 1)].validation_metrics;
    CHECK(m.mae < 0.2);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const LabeledFeatures train_set = make_toy(120, 16, 31);
    const LabeledFeatures val_set = make_toy(40, 16, 32);
    const TrainConfig c = toy_config(LossKind::SquaredEmd);
    const ScorerModel init = init_model(ModelKind::Classification, 16, 0, c.seed);
    const TrainResult a = train(init, train_set, val_set, c);
    const TrainResult b = train(init, train_set, val_set, c);
    REQUIRE(a.trace.steps.size() == b.trace.steps.size());
    for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
        CHECK(a.trace.steps[i].lr == b.trace.steps[i].lr);
        CHECK(a.trace.steps[i].train_loss == b.trace.steps[i].train_loss);
    }
    CHECK(a.model.w_out == b.model.w_out);
    CHECK(a.trace.best_epoch == b.trace.best_epoch);
}

TEST_CASE("the returned model is the epoch snapshot minimizing validation loss") {
    const LabeledFeatures train_set = make_toy(200, 16, 41);
    const LabeledFeatures val_set = make_toy(60, 16, 42);
    const ScorerModel init = init_model(ModelKind::Classification, 16, 0, 43);
    const TrainResult r = train(init, train_set, val_set, toy_config(LossKind::SquaredEmd));
    double min_loss = std::numeric_limits<double>::infinity();
    int argmin = 0;
    for (const auto& e : r.trace.epochs)
        if (e.validation_loss < min_loss) {
            min_loss = e.validation_loss;
            argmin = e.epoch;
        }
    CHECK(r.trace.best_epoch == argmin);
    TrainConfig c = toy_config(LossKind::SquaredEmd);
    CHECK(evaluation_loss(r.model, val_set, c.loss) == doctest::Approx(min_loss).epsilon(1e-12));
}

TEST_CASE("divergence raises a training failure carrying the trace") {
    const LabeledFeatures train_set = make_toy(64, 16, 51);
    const LabeledFeatures val_set = make_toy(32, 16, 52);
    TrainConfig c = toy_config(LossKind::MeanSquaredError);
    c.learning_rate = 1e200;  // the decoupled decay and moment step blow the weights up
    const ScorerModel init = init_model(ModelKind::Regression, 16, 0, 53);
    try {
        train(init, train_set, val_set, c);
        FAIL("expected TrainingFailure");
    } catch (const TrainingFailure& e) {
        CHECK(e.trace().steps.size() >= 1);
    }
}

TEST_CASE("training rejects bad configs and mismatched heads") {
    const LabeledFeatures set = make_toy(32, 16, 61);
    const ScorerModel cls = init_model(ModelKind::Classification, 16, 0, 1);
    TrainConfig c = toy_config(LossKind::SquaredEmd);
    c.epochs = 0;
    CHECK_THROWS_AS(train(cls, set, set, c), ConfigError);
    c = toy_config(LossKind::MeanSquaredError);  // regression loss on a classification head
    CHECK_THROWS_AS(train(cls, set, set, c), ConfigError);
    const ScorerModel reg = init_model(ModelKind::Regression, 16, 0, 1);
    c = toy_config(LossKind::SquaredEmd);  // classification loss on a regression head
    CHECK_THROWS_AS(train(reg, set, set, c), ConfigError);
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
    // Tiny model: D = 4, linear. Every loss kind is driven through the
    // full model -> loss chain and compared against central differences on
    // each parameter entry.
    Rng rng(71);
    Matrix features(3, 4);
    for (Index r = 0; r < 3; ++r) features.row(r) = random_logits(rng, 4, 1.0).transpose();
    const std::vector<int> scores{1, 3, 5};

    const auto check_kind = [&](ModelKind kind, LossSpec spec, Index hidden) {
        ScorerModel m = init_model(kind, 4, hidden, 73);
        ModelGradients grads;
        batch_loss_gradients(m, features, scores, spec, grads);

        const auto loss_at = [&](const ScorerModel& probe) {
            LabeledFeatures set;
            set.features = features;
            set.scores = scores;
            return evaluation_loss(probe, set, spec);
        };
        const double h = 1e-5;
        const auto check_block = [&](Matrix& param, const Matrix& grad) {
            for (Index r = 0; r < param.rows(); ++r)
                for (Index c = 0; c < param.cols(); ++c) {
                    const double orig = param(r, c);
                    param(r, c) = orig + h;
                    const double hi = loss_at(m);
                    param(r, c) = orig - h;
                    const double lo = loss_at(m);
                    param(r, c) = orig;
                    const double fd = (hi - lo) / (2.0 * h);
                    const double denom = std::max(std::abs(fd), 1e-8);
                    CHECK(std::abs(grad(r, c) - fd) / denom < 1e-4);
                }
        };
        check_block(m.w_out, grads.w_out);
        for (Index i = 0; i < m.b_out.size(); ++i) {
            const double orig = m.b_out[i];
            m.b_out[i] = orig + h;
            const double hi = loss_at(m);
            m.b_out[i] = orig - h;
            const double lo = loss_at(m);
            m.b_out[i] = orig;
            const double fd = (hi - lo) / (2.0 * h);
            CHECK(std::abs(grads.b_out[i] - fd) / std::max(std::abs(fd), 1e-8) < 1e-4);
        }
        if (hidden > 0) {
            check_block(m.w_hidden, grads.w_hidden);
            for (Index i = 0; i < m.b_hidden.size(); ++i) {
                const double orig = m.b_hidden[i];
                m.b_hidden[i] = orig + h;
                const double hi = loss_at(m);
                m.b_hidden[i] = orig - h;
                const double lo = loss_at(m);
                m.b_hidden[i] = orig;
                const double fd = (hi - lo) / (2.0 * h);
                CHECK(std::abs(grads.b_hidden[i] - fd) / std::max(std::abs(fd), 1e-8) < 1e-4);
            }
        }
    };

    LossSpec spec;
    for (LossKind kind : {LossKind::CrossEntropy, LossKind::SquaredEmd, LossKind::GeneralizedEmd,
                          LossKind::NormalizedEmd}) {
        spec.kind = kind;
        check_kind(ModelKind::Classification, spec, 0);
    }
    spec.kind = LossKind::MeanSquaredError;
    check_kind(ModelKind::Regression, spec, 0);
    // The tanh hidden path gets one pass too.
    spec.kind = LossKind::SquaredEmd;
    check_kind(ModelKind::Classification, spec, 3);
}

TEST_CASE("predict_score fixtures") {
    // Logits engineered so softmax lands on the reference distributions.
    ScorerModel m;
    m.kind = ModelKind::Classification;
    m.input_dim = 5;
    m.hidden_size = 0;
    m.w_out = Matrix::Identity(5, 5) * 400.0;
    m.b_out = Vector::Zero(5);

    const Prediction spike = predict_score(m, Vector::Unit(5, 2));
    CHECK(spike.score == doctest::Approx(3.0).epsilon(1e-9));
    REQUIRE(spike.distribution.has_value());
    CHECK((*spike.distribution)[2] == doctest::Approx(1.0).epsilon(1e-9));

    const Prediction uniform = predict_score(m, Vector::Zero(5));
    CHECK(uniform.score == doctest::Approx(3.0).epsilon(1e-12));

    // Half the mass on each of the first two classes: expected score 1.5.
    Vector f = Vector::Zero(5);
    f[0] = f[1] = 1.0;
    const Prediction half = predict_score(m, f);
    CHECK(half.score == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("predict_score clamps regression outputs into [1, 5]") {
    ScorerModel m;
    m.kind = ModelKind::Regression;
    m.input_dim = 2;
    m.hidden_size = 0;
    m.w_out = Matrix(1, 2);
    m.w_out << 10.0, 0.0;
    m.b_out = Vector::Zero(1);
    Vector f(2);
    f << 2.0, 0.0;  // raw output 20
    const Prediction high = predict_score(m, f);
    CHECK(high.score == 5.0);
    CHECK_FALSE(high.distribution.has_value());
    f << -2.0, 0.0;  // raw output -20
    CHECK(predict_score(m, f).score == 1.0);

    Rng rng(81);
    for (int it = 0; it < 100; ++it) {
        f << 10.0 * (2.0 * rng.next_double() - 1.0), rng.next_double();
        const double s = predict_score(m, f).score;
        CHECK(s >= 1.0);
        CHECK(s <= 5.0);
    }
}

TEST_CASE("compare_losses produces identical rows for identical configs") {
    const LabeledFeatures toy = make_toy(200, 16, 91);
    const std::vector<HeadSpec> heads = {
        {"squared-emd", ModelKind::Classification, LossSpec{LossKind::SquaredEmd}},
        {"squared-emd-duplicate", ModelKind::Classification, LossSpec{LossKind::SquaredEmd}},
        {"regression", ModelKind::Regression, LossSpec{LossKind::MeanSquaredError}},
    };
    TrainConfig base = toy_config(LossKind::SquaredEmd);
    base.epochs = 2;
    const std::vector<std::uint64_t> seeds{1, 2};
    const CompareTable t = compare_losses(toy.features, toy.scores, SplitSpec{0.8, 0}, base, heads,
                                          seeds, 1);
    REQUIRE(t.rows.size() == 3);
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        const auto& a = t.rows[0].cells[si];
        const auto& b = t.rows[1].cells[si];
        REQUIRE_FALSE(a.failed);
        REQUIRE_FALSE(b.failed);
        CHECK(a.metrics.mae == b.metrics.mae);
        CHECK(a.metrics.mse == b.metrics.mse);
    }
    // The regression head's MAE column is populated from clamped scalars.
    CHECK(t.rows[2].median.has_value());
    CHECK(t.rows[2].median->mae >= 0.0);
}

TEST_CASE("compare_losses is invariant to the worker count") {
    const LabeledFeatures toy = make_toy(150, 16, 93);
    const std::vector<HeadSpec> heads = {
        {"ce", ModelKind::Classification, LossSpec{LossKind::CrossEntropy}},
        {"squared-emd", ModelKind::Classification, LossSpec{LossKind::SquaredEmd}},
    };
    TrainConfig base = toy_config(LossKind::SquaredEmd);
    base.epochs = 2;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const CompareTable serial = compare_losses(toy.features, toy.scores, SplitSpec{0.8, 0}, base,
                                               heads, seeds, 1);
    const CompareTable parallel = compare_losses(toy.features, toy.scores, SplitSpec{0.8, 0}, base,
                                                 heads, seeds, 3);
    for (std::size_t h = 0; h < heads.size(); ++h)
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            CHECK(serial.rows[h].cells[si].metrics.mse == parallel.rows[h].cells[si].metrics.mse);
            CHECK(serial.rows[h].cells[si].metrics.mae == parallel.rows[h].cells[si].metrics.mae);
        }
}

TEST_CASE("compare_losses rejects degenerate requests") {
    const LabeledFeatures toy = make_toy(50, 16, 95);
    const std::vector<HeadSpec> one = {
        {"ce", ModelKind::Classification, LossSpec{LossKind::CrossEntropy}}};
    const std::vector<std::uint64_t> seeds{1};
    CHECK_THROWS_AS(compare_losses(toy.features, toy.scores, SplitSpec{0.8, 0}, TrainConfig{}, one,
                                   seeds, 1),
                    ConfigError);
}
