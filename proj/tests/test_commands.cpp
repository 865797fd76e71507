#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ordgrade/commands.hpp"
#include "ordgrade/relative.hpp"

using namespace ordgrade;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("ordgrade-cmd-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GenSyntheticParams small_gen(const fs::path& out) {
    GenSyntheticParams g;
    g.count = 300;
    g.seed = 5;
    g.out_dir = out;
    return g;
}

TrainParams small_train(const fs::path& input, const fs::path& out) {
    TrainParams t;
    t.input = input;
    t.dim = 64;
    t.head = ModelKind::Regression;
    t.config.loss.kind = LossKind::MeanSquaredError;
    t.config.learning_rate = 0.02;
    t.config.epochs = 2;
    t.config.batch_size = 16;
    t.config.seed = 3;
    t.out_dir = out;
    return t;
}

}  // namespace

TEST_CASE("gen-synthetic is byte-deterministic per seed") {
    const auto d1 = fresh_dir("gen1");
    const auto d2 = fresh_dir("gen2");
    run_gen_synthetic(small_gen(d1));
    run_gen_synthetic(small_gen(d2));
    CHECK(slurp(d1 / "data.jsonl") == slurp(d2 / "data.jsonl"));
    CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));

    GenSyntheticParams other = small_gen(fresh_dir("gen3"));
    other.seed = 6;
    run_gen_synthetic(other);
    CHECK(slurp(d1 / "data.jsonl") != slurp(other.out_dir / "data.jsonl"));
}

TEST_CASE("gen-synthetic preference mode emits loadable pairs") {
    const auto dir = fresh_dir("genpref");
    GenSyntheticParams g = small_gen(dir);
    g.mode = "preference";
    g.count = 50;
    run_gen_synthetic(g);
    const auto pairs = load_preference_pairs(dir / "pairs.jsonl");
    CHECK(pairs.size() == 50);
    for (const auto& p : pairs) CHECK(p.label != PreferenceLabel::Tie);
}

TEST_CASE("augment with zero probabilities preserves the records") {
    const auto gen_dir = fresh_dir("aug-src");
    run_gen_synthetic(small_gen(gen_dir));
    const auto out_dir = fresh_dir("aug-out");
    AugmentParams a;
    a.input = gen_dir / "data.jsonl";
    a.drop_rubric = 0.0;
    a.drop_reference = 0.0;
    a.seed = 1;
    a.out_dir = out_dir;
    run_augment(a);
    CHECK(slurp(gen_dir / "data.jsonl") == slurp(out_dir / "augmented.jsonl"));
}

TEST_CASE("command errors map onto the exit-code taxonomy") {
    const auto dir = fresh_dir("exitcodes");

    // Malformed record: data-validation class.
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"id":"x","instruction":"q","response":"r","score":9})" << "\n";
    bad.close();
    AugmentParams a;
    a.input = dir / "bad.jsonl";
    a.out_dir = dir / "out";
    CHECK(run_with_exit_code([&] { run_augment(a); }) == exit_code::data);

    // Missing input: I/O class, distinct from the above.
    a.input = dir / "missing.jsonl";
    CHECK(run_with_exit_code([&] { run_augment(a); }) == exit_code::io);

    // epochs 0: config class, rejected before any work happens.
    TrainParams t = small_train(dir / "missing.jsonl", dir / "out");
    t.config.epochs = 0;
    CHECK(run_with_exit_code([&] { run_train(t); }) == exit_code::config);
}

TEST_CASE("train writes checkpoint, traces, metrics and manifest deterministically") {
    const auto gen_dir = fresh_dir("train-src");
    run_gen_synthetic(small_gen(gen_dir));
    const auto out1 = fresh_dir("train-out1");
    const auto out2 = fresh_dir("train-out2");
    run_train(small_train(gen_dir / "data.jsonl", out1));
    run_train(small_train(gen_dir / "data.jsonl", out2));
    for (const char* name : {"checkpoint.json", "steps.csv", "epochs.csv", "metrics.json",
                             "manifest.json"}) {
        CAPTURE(name);
        CHECK(slurp(out1 / name) == slurp(out2 / name));
    }
    const Checkpoint ckpt = load_checkpoint(out1 / "checkpoint.json");
    CHECK(ckpt.model.input_dim == 64);
    CHECK(ckpt.best_epoch >= 1);
    CHECK_FALSE(ckpt.data_fingerprint.empty());
}

TEST_CASE("evaluate on the training set produces finite metrics") {
    const auto gen_dir = fresh_dir("eval-src");
    run_gen_synthetic(small_gen(gen_dir));
    const auto train_dir = fresh_dir("eval-train");
    run_train(small_train(gen_dir / "data.jsonl", train_dir));

    const auto eval_dir = fresh_dir("eval-out");
    EvaluateParams e;
    e.checkpoint = train_dir / "checkpoint.json";
    e.input = gen_dir / "data.jsonl";
    e.out_dir = eval_dir;
    run_evaluate(e);
    const auto metrics =
        metric_report_from_json(nlohmann::json::parse(slurp(eval_dir / "metrics.json")));
    CHECK(metrics.n == 300);
    CHECK(metrics.mae >= 0.0);
    CHECK(std::isfinite(metrics.mse));
}

TEST_CASE("evaluate rejects a conflicting feature dimension naming both dims") {
    const auto gen_dir = fresh_dir("dim-src");
    run_gen_synthetic(small_gen(gen_dir));
    const auto train_dir = fresh_dir("dim-train");
    run_train(small_train(gen_dir / "data.jsonl", train_dir));
    EvaluateParams e;
    e.checkpoint = train_dir / "checkpoint.json";
    e.input = gen_dir / "data.jsonl";
    e.dim_override = 128;
    e.out_dir = fresh_dir("dim-out");
    try {
        run_evaluate(e);
        FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
        const std::string msg = err.what();
        CHECK(msg.find("128") != std::string::npos);
        CHECK(msg.find("64") != std::string::npos);
    }
}

TEST_CASE("a handcrafted perfect model evaluates to pearson 1 and mse 0") {
    // Five single-token responses whose hashed buckets are distinct; the
    // regression weights then read the score straight off the bucket.
    const Index dim = 64;
    std::vector<GradedSample> samples;
    std::vector<Index> buckets;
    for (int score = 1; score <= 5; ++score) {
        GradedSample s;
        s.id = "t" + std::to_string(score);
        s.instruction = "zz";
        s.response = "tok" + std::to_string(score);
        s.score = score;
        samples.push_back(s);
    }
    for (const auto& s : samples) {
        const Vector f = featurize(s, dim);
        Index nonzero_count = 0, which = 0;
        for (Index i = 0; i < dim; ++i)
            if (f[i] != 0.0) {
                ++nonzero_count;
                which = i;
            }
        REQUIRE(nonzero_count == 2);  // instruction token + response token
        (void)which;
    }
    // Solve for weights: features are known, targets are the scores.
    Matrix x(5, dim);
    Vector y(5);
    for (int i = 0; i < 5; ++i) {
        x.row(i) = featurize(samples[static_cast<std::size_t>(i)], dim).transpose();
        y[i] = samples[static_cast<std::size_t>(i)].score;
    }
    const Vector w = x.completeOrthogonalDecomposition().solve(y);
    ScorerModel m;
    m.kind = ModelKind::Regression;
    m.input_dim = dim;
    m.hidden_size = 0;
    m.w_out = w.transpose();
    m.b_out = Vector::Zero(1);

    LabeledFeatures set;
    set.features = x;
    set.scores = {1, 2, 3, 4, 5};
    const MetricReport r = evaluate_model(m, set);
    CHECK(*r.pearson == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.mse == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("relative evaluation emits one accuracy row per epsilon") {
    const auto gen_dir = fresh_dir("rel-src");
    GenSyntheticParams g = small_gen(gen_dir);
    run_gen_synthetic(g);
    const auto train_dir = fresh_dir("rel-train");
    run_train(small_train(gen_dir / "data.jsonl", train_dir));

    const auto pair_dir = fresh_dir("rel-pairs");
    GenSyntheticParams gp = small_gen(pair_dir);
    gp.mode = "preference";
    gp.count = 40;
    run_gen_synthetic(gp);

    const auto eval_dir = fresh_dir("rel-out");
    EvaluateParams e;
    e.checkpoint = train_dir / "checkpoint.json";
    e.input = pair_dir / "pairs.jsonl";
    e.mode = "relative";
    e.tie_epsilons = {0.0, 0.5};
    e.out_dir = eval_dir;
    run_evaluate(e);

    const std::string csv = slurp(eval_dir / "relative.csv");
    std::size_t rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 3);  // header + two epsilons
}

TEST_CASE("compare-losses writes a full table plus curves") {
    const auto gen_dir = fresh_dir("cmp-src");
    GenSyntheticParams g = small_gen(gen_dir);
    g.count = 400;
    run_gen_synthetic(g);

    const auto out = fresh_dir("cmp-out");
    CompareParams c;
    c.input = gen_dir / "data.jsonl";
    c.dim = 64;
    c.heads = {"ce", "squared-emd", "regression"};
    c.seeds = {1, 2};
    c.base.learning_rate = 0.02;
    c.base.epochs = 2;
    c.base.batch_size = 16;
    c.out_dir = out;
    run_compare_losses(c);

    const std::string csv = slurp(out / "comparison.csv");
    CHECK(csv.find("ce,1,") != std::string::npos);
    CHECK(csv.find("squared-emd,2,") != std::string::npos);
    CHECK(csv.find("regression,median,") != std::string::npos);
    CHECK(fs::exists(out / "curves" / "ce-seed1.csv"));
    CHECK(fs::exists(out / "curves" / "regression-seed2.csv"));
    CHECK(fs::exists(out / "comparison.txt"));
}

TEST_CASE("manifests rerun to identical outputs through the config loader") {
    const auto gen_dir = fresh_dir("mani-src");
    run_gen_synthetic(small_gen(gen_dir));

    // Feed the manifest back as a config object, into a fresh directory.
    const auto replay_dir = fresh_dir("mani-replay");
    const nlohmann::json manifest_config =
        load_config_file(gen_dir / "manifest.json", "gen-synthetic");
    GenSyntheticParams replay;
    replay.patch(manifest_config);
    replay.out_dir = replay_dir;
    run_gen_synthetic(replay);
    CHECK(slurp(gen_dir / "data.jsonl") == slurp(replay_dir / "data.jsonl"));
    CHECK(slurp(gen_dir / "manifest.json") == slurp(replay_dir / "manifest.json"));

    // A manifest from one command refuses to drive another.
    CHECK_THROWS_AS(load_config_file(gen_dir / "manifest.json", "train"), ConfigError);
}
