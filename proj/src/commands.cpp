#include "ordgrade/commands.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ordgrade/relative.hpp"

namespace ordgrade {

namespace {

using nlohmann::json;

void ensure_out_dir(const std::filesystem::path& dir) {
    if (dir.empty()) throw ConfigError("--out directory is required");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const json& config) {
    auto out = open_out(out_dir / "manifest.json");
    out << json{{"command", command}, {"config", config}}.dump(2) << "\n";
}

template <typename T>
void patch_field(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

void patch_path(const json& j, const char* key, std::filesystem::path& field) {
    if (j.contains(key)) field = j.at(key).get<std::string>();
}

std::string opt_metric(const std::optional<double>& v) {
    return v ? fmt_double(*v) : "undefined";
}

void write_epochs_csv(const std::filesystem::path& path, std::span<const EpochRecord> epochs) {
    auto out = open_out(path);
    out << "epoch,val_loss,pearson,spearman,kendall,mae,mse,r2,n\n";
    for (const auto& e : epochs) {
        const MetricReport& m = e.validation_metrics;
        out << e.epoch << ',' << fmt_double(e.validation_loss) << ',' << opt_metric(m.pearson)
            << ',' << opt_metric(m.spearman) << ',' << opt_metric(m.kendall) << ','
            << fmt_double(m.mae) << ',' << fmt_double(m.mse) << ',' << opt_metric(m.r_squared)
            << ',' << m.n << "\n";
    }
}

}  // namespace

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

int run_with_exit_code(const std::function<void()>& body) {
    try {
        body();
        return exit_code::ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return exit_code::data;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return exit_code::io;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_code::numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
}

json load_config_file(const std::filesystem::path& path, const std::string& command) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (j.contains("command")) {
        const auto cmd = j.at("command").get<std::string>();
        if (cmd != command)
            throw ConfigError("config " + path.string() + " is for command '" + cmd +
                              "', not '" + command + "'");
        return j.at("config");
    }
    return j;
}

// ---------------------------------------------------------------------------
// gen-synthetic
// ---------------------------------------------------------------------------

json GenSyntheticParams::to_json() const {
    return json{{"mode", mode},
                {"count", count},
                {"seed", seed},
                {"label_noise", label_noise},
                {"min_gap", min_gap}};
}

void GenSyntheticParams::patch(const json& j) {
    patch_field(j, "mode", mode);
    patch_field(j, "count", count);
    patch_field(j, "seed", seed);
    patch_field(j, "label_noise", label_noise);
    patch_field(j, "min_gap", min_gap);
}

void run_gen_synthetic(const GenSyntheticParams& p) {
    if (p.mode != "absolute" && p.mode != "preference")
        throw ConfigError("gen-synthetic: mode must be absolute or preference");
    ensure_out_dir(p.out_dir);
    SyntheticSpec spec;
    spec.count = p.count;
    spec.seed = p.seed;
    spec.label_noise = p.label_noise;
    spec.min_gap = p.min_gap;
    if (p.mode == "absolute")
        save_dataset(p.out_dir / "data.jsonl", generate_absolute(spec));
    else
        save_preference_pairs(p.out_dir / "pairs.jsonl", generate_preference(spec));
    write_manifest(p.out_dir, "gen-synthetic", p.to_json());
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

json AugmentParams::to_json() const {
    return json{{"input", input.string()},
                {"drop_rubric", drop_rubric},
                {"drop_reference", drop_reference},
                {"seed", seed}};
}

void AugmentParams::patch(const json& j) {
    patch_path(j, "input", input);
    patch_field(j, "drop_rubric", drop_rubric);
    patch_field(j, "drop_reference", drop_reference);
    patch_field(j, "seed", seed);
}

void run_augment(const AugmentParams& p) {
    if (p.input.empty()) throw ConfigError("augment: --input is required (flag or config)");
    const auto samples = load_dataset(p.input);
    AugmentSpec spec{p.drop_rubric, p.drop_reference, p.seed};
    const auto augmented = augment(samples, spec);
    ensure_out_dir(p.out_dir);
    save_dataset(p.out_dir / "augmented.jsonl", augmented);
    write_manifest(p.out_dir, "augment", p.to_json());
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

json TrainParams::to_json() const {
    return json{{"input", input.string()},
                {"dim", dim},
                {"hidden", hidden},
                {"head", model_kind_token(head)},
                {"train_fraction", train_fraction},
                {"train_config", train_config_to_json(config)}};
}

void TrainParams::patch(const json& j) {
    patch_path(j, "input", input);
    patch_field(j, "dim", dim);
    patch_field(j, "hidden", hidden);
    if (j.contains("head")) head = model_kind_from_token(j.at("head").get<std::string>());
    patch_field(j, "train_fraction", train_fraction);
    if (j.contains("train_config")) config = train_config_from_json(j.at("train_config"));
}

void run_train(const TrainParams& p) {
    if (p.input.empty()) throw ConfigError("train: --input is required (flag or config)");
    p.config.validate();
    const auto samples = load_dataset(p.input);
    const auto [train_idx, val_idx] =
        split_indices(samples.size(), SplitSpec{p.train_fraction, p.config.seed});
    if (train_idx.empty() || val_idx.empty())
        throw ConfigError("train: split produced an empty side; adjust train_fraction");

    const Matrix all_features = featurize_all(samples, p.dim);
    const auto gather = [&](const std::vector<std::size_t>& idx) {
        LabeledFeatures lf;
        lf.features.resize(static_cast<Index>(idx.size()), p.dim);
        lf.scores.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            lf.features.row(static_cast<Index>(i)) = all_features.row(static_cast<Index>(idx[i]));
            lf.scores[i] = samples[idx[i]].score;
        }
        return lf;
    };
    const LabeledFeatures train_set = gather(train_idx);
    const LabeledFeatures val_set = gather(val_idx);

    const ScorerModel init = init_model(p.head, p.dim, p.hidden, p.config.seed);
    ensure_out_dir(p.out_dir);
    TrainResult result;
    try {
        result = train(init, train_set, val_set, p.config);
    } catch (const TrainingFailure& e) {
        // Divergence still leaves the trace behind for inspection.
        auto out = open_out(p.out_dir / "steps.csv");
        out << "step,lr,train_loss\n";
        for (const auto& s : e.trace().steps)
            out << s.step << ',' << fmt_double(s.lr) << ',' << fmt_double(s.train_loss) << "\n";
        throw;
    }

    {
        auto out = open_out(p.out_dir / "steps.csv");
        out << "step,lr,train_loss\n";
        for (const auto& s : result.trace.steps)
            out << s.step << ',' << fmt_double(s.lr) << ',' << fmt_double(s.train_loss) << "\n";
    }
    write_epochs_csv(p.out_dir / "epochs.csv", result.trace.epochs);

    Checkpoint ckpt;
    ckpt.model = result.model;
    ckpt.config = p.config;
    ckpt.data_fingerprint = dataset_fingerprint(samples, p.dim);
    ckpt.best_epoch = result.trace.best_epoch;
    save_checkpoint(p.out_dir / "checkpoint.json", ckpt);

    const MetricReport& best =
        result.trace.epochs[static_cast<std::size_t>(result.trace.best_epoch - 1)]
            .validation_metrics;
    open_out(p.out_dir / "metrics.json") << metric_report_to_json(best).dump(2) << "\n";
    write_manifest(p.out_dir, "train", p.to_json());
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

json EvaluateParams::to_json() const {
    json j{{"checkpoint", checkpoint.string()},
           {"input", input.string()},
           {"mode", mode},
           {"tie_epsilons", tie_epsilons}};
    if (dim_override) j["dim"] = *dim_override;
    return j;
}

void EvaluateParams::patch(const json& j) {
    patch_path(j, "checkpoint", checkpoint);
    patch_path(j, "input", input);
    patch_field(j, "mode", mode);
    patch_field(j, "tie_epsilons", tie_epsilons);
    if (j.contains("dim")) dim_override = j.at("dim").get<Index>();
}

void run_evaluate(const EvaluateParams& p) {
    if (p.mode != "absolute" && p.mode != "relative")
        throw ConfigError("evaluate: mode must be absolute or relative");
    if (p.checkpoint.empty() || p.input.empty())
        throw ConfigError("evaluate: --checkpoint and --input are required (flag or config)");
    const Checkpoint ckpt = load_checkpoint(p.checkpoint);
    if (p.dim_override && *p.dim_override != ckpt.model.input_dim)
        throw ConfigError("evaluate: requested dim " + std::to_string(*p.dim_override) +
                          " does not match checkpoint dim " +
                          std::to_string(ckpt.model.input_dim));
    const Index dim = ckpt.model.input_dim;
    ensure_out_dir(p.out_dir);

    if (p.mode == "absolute") {
        const auto samples = load_dataset(p.input);
        if (samples.empty()) throw DataError("evaluate: empty dataset");
        LabeledFeatures set;
        set.features = featurize_all(samples, dim);
        set.scores.resize(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) set.scores[i] = samples[i].score;
        const MetricReport report = evaluate_model(ckpt.model, set);
        open_out(p.out_dir / "metrics.json") << metric_report_to_json(report).dump(2) << "\n";
        open_out(p.out_dir / "metrics.txt") << metric_report_to_text(report);
    } else {
        const auto pairs = load_preference_pairs(p.input);
        if (pairs.empty()) throw DataError("evaluate: empty preference set");
        if (p.tie_epsilons.empty()) throw ConfigError("evaluate: need at least one tie epsilon");
        auto csv = open_out(p.out_dir / "relative.csv");
        auto txt = open_out(p.out_dir / "relative.txt");
        csv << "tie_epsilon,accuracy,n\n";
        for (double eps : p.tie_epsilons) {
            const JudgeOutcome outcome = judge_pairs(ckpt.model, pairs, eps, dim);
            csv << fmt_double(eps) << ',' << fmt_double(outcome.accuracy) << ',' << pairs.size()
                << "\n";
            txt << "accuracy @ epsilon " << fmt_double(eps) << " = " << fmt_double(outcome.accuracy)
                << " (n=" << pairs.size() << ")\n";
        }
    }
    write_manifest(p.out_dir, "evaluate", p.to_json());
}

// ---------------------------------------------------------------------------
// compare-losses
// ---------------------------------------------------------------------------

HeadSpec head_from_token(const std::string& token, const TrainConfig& base) {
    HeadSpec h;
    h.name = token;
    h.loss = base.loss;
    if (token == "regression") {
        h.kind = ModelKind::Regression;
        h.loss.kind = LossKind::MeanSquaredError;
        return h;
    }
    h.kind = ModelKind::Classification;
    h.loss.kind = loss_kind_from_token(token);
    if (h.loss.kind == LossKind::MeanSquaredError)
        throw ConfigError("head 'mse' is spelled 'regression'");
    return h;
}

json CompareParams::to_json() const {
    return json{{"input", input.string()},   {"dim", dim},
                {"heads", heads},            {"seeds", seeds},
                {"train_fraction", train_fraction},
                {"jobs", jobs},              {"train_config", train_config_to_json(base)}};
}

void CompareParams::patch(const json& j) {
    patch_path(j, "input", input);
    patch_field(j, "dim", dim);
    patch_field(j, "heads", heads);
    patch_field(j, "seeds", seeds);
    patch_field(j, "train_fraction", train_fraction);
    patch_field(j, "jobs", jobs);
    if (j.contains("train_config")) base = train_config_from_json(j.at("train_config"));
}

void run_compare_losses(const CompareParams& p) {
    if (p.input.empty())
        throw ConfigError("compare-losses: --input is required (flag or config)");
    if (p.heads.size() < 2) throw ConfigError("compare-losses: need at least 2 heads");
    const auto samples = load_dataset(p.input);
    const Matrix features = featurize_all(samples, p.dim);
    std::vector<int> scores(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) scores[i] = samples[i].score;

    std::vector<HeadSpec> heads;
    heads.reserve(p.heads.size());
    for (const auto& token : p.heads) heads.push_back(head_from_token(token, p.base));

    const CompareTable table = compare_losses(features, scores, SplitSpec{p.train_fraction, 0},
                                              p.base, heads, p.seeds, p.jobs);

    ensure_out_dir(p.out_dir);
    std::filesystem::create_directories(p.out_dir / "curves");

    bool any_failed = false;
    {
        auto csv = open_out(p.out_dir / "comparison.csv");
        csv << "head,seed,pearson,spearman,kendall,mae,mse,r2,n,status\n";
        for (const auto& row : table.rows) {
            for (const auto& cell : row.cells) {
                if (cell.failed) {
                    any_failed = true;
                    csv << row.head.name << ',' << cell.seed << ",,,,,,,,failed: " << cell.error
                        << "\n";
                    continue;
                }
                const MetricReport& m = cell.metrics;
                csv << row.head.name << ',' << cell.seed << ',' << opt_metric(m.pearson) << ','
                    << opt_metric(m.spearman) << ',' << opt_metric(m.kendall) << ','
                    << fmt_double(m.mae) << ',' << fmt_double(m.mse) << ','
                    << opt_metric(m.r_squared) << ',' << m.n << ",ok\n";
            }
            if (p.seeds.size() > 1 && row.median) {
                const MetricReport& m = *row.median;
                csv << row.head.name << ",median," << opt_metric(m.pearson) << ','
                    << opt_metric(m.spearman) << ',' << opt_metric(m.kendall) << ','
                    << fmt_double(m.mae) << ',' << fmt_double(m.mse) << ','
                    << opt_metric(m.r_squared) << ',' << m.n << ",ok\n";
            }
        }
    }
    {
        auto txt = open_out(p.out_dir / "comparison.txt");
        txt << std::left << std::setw(18) << "head" << std::setw(10) << "seed" << std::setw(12)
            << "pearson" << std::setw(12) << "mae" << std::setw(12) << "mse" << "\n";
        for (const auto& row : table.rows) {
            for (const auto& cell : row.cells) {
                txt << std::left << std::setw(18) << row.head.name << std::setw(10) << cell.seed;
                if (cell.failed)
                    txt << "failed: " << cell.error;
                else
                    txt << std::setw(12) << opt_metric(cell.metrics.pearson) << std::setw(12)
                        << fmt_double(cell.metrics.mae) << std::setw(12)
                        << fmt_double(cell.metrics.mse);
                txt << "\n";
            }
            if (p.seeds.size() > 1 && row.median) {
                txt << std::left << std::setw(18) << row.head.name << std::setw(10) << "median"
                    << std::setw(12) << opt_metric(row.median->pearson) << std::setw(12)
                    << fmt_double(row.median->mae) << std::setw(12) << fmt_double(row.median->mse)
                    << "\n";
            }
        }
    }
    for (const auto& row : table.rows) {
        for (const auto& cell : row.cells) {
            if (cell.failed) continue;
            write_epochs_csv(p.out_dir / "curves" /
                                 (row.head.name + "-seed" + std::to_string(cell.seed) + ".csv"),
                             cell.curve);
        }
    }
    write_manifest(p.out_dir, "compare-losses", p.to_json());
    if (any_failed) throw NumericError("compare-losses: one or more runs failed; see comparison.csv");
}

}  // namespace ordgrade
