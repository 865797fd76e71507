#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "ordgrade/commands.hpp"

namespace {

using namespace ordgrade;

// Pre-scan argv for the subcommand name and --config path so config-file
// values can be loaded into the parameter structs before CLI11 parses;
// explicitly passed flags then override them.
struct PreScan {
    std::string command;
    std::string config_path;
};

PreScan pre_scan(int argc, char** argv) {
    PreScan out;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            out.config_path = argv[++i];
        } else if (arg.rfind("--config=", 0) == 0) {
            out.config_path = arg.substr(9);
        } else if (!arg.empty() && arg[0] != '-' && out.command.empty()) {
            out.command = arg;
        }
    }
    return out;
}

void add_config_flag(CLI::App* cmd) {
    static std::string sink;
    cmd->add_option("--config", sink, "JSON config or a previous run's manifest.json");
}

void add_train_config_flags(CLI::App* cmd, TrainConfig& c, std::string& loss_token,
                            std::string& reduction_token_str, std::string& schedule_token_str) {
    cmd->add_option("--loss", loss_token, "ce | squared-emd | generalized-emd | normalized-emd | mse");
    cmd->add_option("--p-order", c.loss.p_order, "Minkowski order p");
    cmd->add_option("--alpha", c.loss.alpha, "penalty exponent alpha");
    cmd->add_option("--l-order", c.loss.l_order, "norm order for normalized-emd");
    cmd->add_option("--reduction", reduction_token_str, "sample-mean | class-sum");
    cmd->add_option("--lr", c.learning_rate, "peak learning rate");
    cmd->add_option("--weight-decay", c.weight_decay, "decoupled weight decay");
    cmd->add_option("--warmup-ratio", c.warmup_ratio, "warmup fraction of total steps");
    cmd->add_option("--epochs", c.epochs, "training epochs");
    cmd->add_option("--batch-size", c.batch_size, "mini-batch size");
    cmd->add_option("--seed", c.seed, "root seed");
    cmd->add_option("--schedule", schedule_token_str, "cosine | constant");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ordinal response grading: EMD-family losses, scorer heads, grading metrics"};
    app.require_subcommand(1);

    const PreScan scan = pre_scan(argc, argv);
    nlohmann::json config;
    if (!scan.config_path.empty()) {
        const int rc = run_with_exit_code(
            [&] { config = load_config_file(scan.config_path, scan.command); });
        if (rc != exit_code::ok) return rc;
    }

    GenSyntheticParams gen;
    AugmentParams aug;
    TrainParams trn;
    EvaluateParams eva;
    CompareParams cmp;
    std::string trn_loss = "squared-emd", trn_reduction = "sample-mean", trn_schedule = "cosine";
    std::string trn_head = "classification";
    std::string cmp_loss = "squared-emd", cmp_reduction = "sample-mean", cmp_schedule = "cosine";
    std::string cmp_heads_csv, cmp_seeds_csv;

    const int prc = run_with_exit_code([&] {
        if (config.is_null()) return;
        if (scan.command == "gen-synthetic") gen.patch(config);
        if (scan.command == "augment") aug.patch(config);
        if (scan.command == "train") {
            trn.patch(config);
            trn_loss = loss_kind_token(trn.config.loss.kind);
            trn_reduction = reduction_token(trn.config.loss.reduction);
            trn_schedule = schedule_token(trn.config.schedule);
            trn_head = model_kind_token(trn.head);
        }
        if (scan.command == "evaluate") eva.patch(config);
        if (scan.command == "compare-losses") {
            cmp.patch(config);
            cmp_reduction = reduction_token(cmp.base.loss.reduction);
            cmp_schedule = schedule_token(cmp.base.schedule);
        }
    });
    if (prc != exit_code::ok) return prc;

    // gen-synthetic
    auto* c_gen = app.add_subcommand("gen-synthetic", "write the bundled synthetic benchmark");
    c_gen->add_option("--mode", gen.mode, "absolute | preference");
    c_gen->add_option("--count", gen.count, "samples (absolute) or pairs (preference)");
    c_gen->add_option("--seed", gen.seed, "generator seed");
    c_gen->add_option("--noise", gen.label_noise, "label noise sd before rounding");
    c_gen->add_option("--min-gap", gen.min_gap, "minimum latent gap between pair sides");
    c_gen->add_option("--out", gen.out_dir, "output directory")->required();
    add_config_flag(c_gen);

    // augment
    auto* c_aug = app.add_subcommand("augment", "drop rubric/reference fields at random");
    c_aug->add_option("--input", aug.input, "dataset (.jsonl)");
    c_aug->add_option("--drop-rubric", aug.drop_rubric, "rubric drop probability");
    c_aug->add_option("--drop-reference", aug.drop_reference, "reference drop probability");
    c_aug->add_option("--seed", aug.seed, "augmentation seed");
    c_aug->add_option("--out", aug.out_dir, "output directory")->required();
    add_config_flag(c_aug);

    // train
    auto* c_trn = app.add_subcommand("train", "train a scorer head on a graded dataset");
    c_trn->add_option("--input", trn.input, "dataset (.jsonl)");
    c_trn->add_option("--dim", trn.dim, "feature dimension");
    c_trn->add_option("--hidden", trn.hidden, "hidden layer width (0 = linear)");
    c_trn->add_option("--head", trn_head, "classification | regression");
    c_trn->add_option("--train-fraction", trn.train_fraction, "train split fraction");
    add_train_config_flags(c_trn, trn.config, trn_loss, trn_reduction, trn_schedule);
    c_trn->add_option("--out", trn.out_dir, "output directory")->required();
    add_config_flag(c_trn);

    // evaluate
    auto* c_eva = app.add_subcommand("evaluate", "score a dataset with a trained checkpoint");
    c_eva->add_option("--checkpoint", eva.checkpoint, "checkpoint.json");
    c_eva->add_option("--input", eva.input, "dataset or preference pairs (.jsonl)");
    c_eva->add_option("--mode", eva.mode, "absolute | relative");
    c_eva->add_option("--tie-epsilon", eva.tie_epsilons, "tie margins (relative mode)");
    Index eva_dim = 0;
    auto* eva_dim_opt = c_eva->add_option("--dim", eva_dim, "expected feature dim (checked)");
    c_eva->add_option("--out", eva.out_dir, "output directory")->required();
    add_config_flag(c_eva);

    // compare-losses
    auto* c_cmp = app.add_subcommand("compare-losses", "train several heads and tabulate metrics");
    c_cmp->add_option("--input", cmp.input, "dataset (.jsonl)");
    c_cmp->add_option("--dim", cmp.dim, "feature dimension");
    c_cmp->add_option("--heads", cmp_heads_csv,
                      "comma-separated: ce,squared-emd,generalized-emd,normalized-emd,regression");
    c_cmp->add_option("--seeds", cmp_seeds_csv, "comma-separated seeds");
    c_cmp->add_option("--train-fraction", cmp.train_fraction, "train split fraction");
    c_cmp->add_option("--jobs", cmp.jobs, "parallel training runs");
    add_train_config_flags(c_cmp, cmp.base, cmp_loss, cmp_reduction, cmp_schedule);
    c_cmp->add_option("--out", cmp.out_dir, "output directory")->required();
    add_config_flag(c_cmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code::config;
    }

    return run_with_exit_code([&] {
        if (c_gen->parsed()) {
            run_gen_synthetic(gen);
        } else if (c_aug->parsed()) {
            run_augment(aug);
        } else if (c_trn->parsed()) {
            trn.head = model_kind_from_token(trn_head);
            trn.config.loss.kind = loss_kind_from_token(trn_loss);
            trn.config.loss.reduction = reduction_from_token(trn_reduction);
            trn.config.schedule = schedule_from_token(trn_schedule);
            run_train(trn);
        } else if (c_eva->parsed()) {
            if (eva_dim_opt->count() > 0) eva.dim_override = eva_dim;
            run_evaluate(eva);
        } else if (c_cmp->parsed()) {
            cmp.base.loss.reduction = reduction_from_token(cmp_reduction);
            cmp.base.schedule = schedule_from_token(cmp_schedule);
            if (c_cmp->count("--heads") > 0) {
                cmp.heads.clear();
                std::stringstream ss(cmp_heads_csv);
                std::string tok;
                while (std::getline(ss, tok, ',')) cmp.heads.push_back(tok);
            }
            if (c_cmp->count("--seeds") > 0) {
                cmp.seeds.clear();
                std::stringstream ss(cmp_seeds_csv);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    try {
                        cmp.seeds.push_back(std::stoull(tok));
                    } catch (const std::exception&) {
                        throw ConfigError("--seeds: '" + tok + "' is not an unsigned integer");
                    }
                }
            }
            run_compare_losses(cmp);
        }
    });
}
