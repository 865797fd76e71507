#include "ordgrade/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ordgrade/errors.hpp"

namespace ordgrade {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "ordgrade-checkpoint-v1";

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (j.empty()) return Matrix();
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

}  // namespace

const char* loss_kind_token(LossKind k) {
    switch (k) {
        case LossKind::CrossEntropy: return "ce";
        case LossKind::SquaredEmd: return "squared-emd";
        case LossKind::GeneralizedEmd: return "generalized-emd";
        case LossKind::NormalizedEmd: return "normalized-emd";
        case LossKind::MeanSquaredError: return "mse";
    }
    return "?";
}

LossKind loss_kind_from_token(const std::string& s) {
    if (s == "ce") return LossKind::CrossEntropy;
    if (s == "squared-emd") return LossKind::SquaredEmd;
    if (s == "generalized-emd") return LossKind::GeneralizedEmd;
    if (s == "normalized-emd") return LossKind::NormalizedEmd;
    if (s == "mse") return LossKind::MeanSquaredError;
    throw ConfigError("unknown loss kind '" + s + "'");
}

const char* reduction_token(Reduction r) {
    return r == Reduction::SampleMean ? "sample-mean" : "class-sum";
}

Reduction reduction_from_token(const std::string& s) {
    if (s == "sample-mean") return Reduction::SampleMean;
    if (s == "class-sum") return Reduction::ClassSumBatchMean;
    throw ConfigError("unknown reduction '" + s + "'");
}

const char* model_kind_token(ModelKind k) {
    return k == ModelKind::Classification ? "classification" : "regression";
}

ModelKind model_kind_from_token(const std::string& s) {
    if (s == "classification") return ModelKind::Classification;
    if (s == "regression") return ModelKind::Regression;
    throw ConfigError("unknown model kind '" + s + "'");
}

const char* schedule_token(Schedule s) { return s == Schedule::Cosine ? "cosine" : "constant"; }

Schedule schedule_from_token(const std::string& s) {
    if (s == "cosine") return Schedule::Cosine;
    if (s == "constant") return Schedule::Constant;
    throw ConfigError("unknown schedule '" + s + "'");
}

std::string dataset_fingerprint(std::span<const GradedSample> samples, Index feature_dim) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto mix_bytes = [&h](std::string_view sv) {
        for (unsigned char c : sv) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= 0xff;  // field separator
        h *= 0x100000001b3ull;
    };
    for (const auto& s : samples) {
        mix_bytes(s.id);
        mix_bytes(std::to_string(s.score));
    }
    mix_bytes(std::to_string(feature_dim));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

json train_config_to_json(const TrainConfig& config) {
    return json{
        {"loss",
         {{"kind", loss_kind_token(config.loss.kind)},
          {"p_order", config.loss.p_order},
          {"alpha", config.loss.alpha},
          {"l_order", config.loss.l_order},
          {"reduction", reduction_token(config.loss.reduction)}}},
        {"learning_rate", config.learning_rate},
        {"weight_decay", config.weight_decay},
        {"warmup_ratio", config.warmup_ratio},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"seed", config.seed},
        {"schedule", schedule_token(config.schedule)},
    };
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    const json& loss = j.at("loss");
    c.loss.kind = loss_kind_from_token(loss.at("kind").get<std::string>());
    c.loss.p_order = loss.at("p_order").get<double>();
    c.loss.alpha = loss.at("alpha").get<double>();
    c.loss.l_order = loss.at("l_order").get<double>();
    c.loss.reduction = reduction_from_token(loss.at("reduction").get<std::string>());
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.warmup_ratio = j.at("warmup_ratio").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.schedule = schedule_from_token(j.at("schedule").get<std::string>());
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    json j{
        {"format", kFormatTag},
        {"kind", model_kind_token(ckpt.model.kind)},
        {"input_dim", ckpt.model.input_dim},
        {"hidden_size", ckpt.model.hidden_size},
        {"num_classes", ckpt.model.num_classes},
        {"weights",
         {{"w_out", matrix_to_json(ckpt.model.w_out)},
          {"b_out", vector_to_json(ckpt.model.b_out)},
          {"w_hidden", matrix_to_json(ckpt.model.w_hidden)},
          {"b_hidden", vector_to_json(ckpt.model.b_hidden)}}},
        {"train_config", train_config_to_json(ckpt.config)},
        {"data_fingerprint", ckpt.data_fingerprint},
        {"best_epoch", ckpt.best_epoch},
    };
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormatTag)
            throw DataError(path.string() + ": not an ordgrade checkpoint");
        Checkpoint c;
        c.model.kind = model_kind_from_token(j.at("kind").get<std::string>());
        c.model.input_dim = j.at("input_dim").get<Index>();
        c.model.hidden_size = j.at("hidden_size").get<Index>();
        c.model.num_classes = j.at("num_classes").get<Index>();
        const json& w = j.at("weights");
        c.model.w_out = matrix_from_json(w.at("w_out"));
        c.model.b_out = vector_from_json(w.at("b_out"));
        c.model.w_hidden = matrix_from_json(w.at("w_hidden"));
        c.model.b_hidden = vector_from_json(w.at("b_hidden"));
        c.config = train_config_from_json(j.at("train_config"));
        c.data_fingerprint = j.at("data_fingerprint").get<std::string>();
        c.best_epoch = j.at("best_epoch").get<int>();
        if (!c.model.finite()) throw DataError(path.string() + ": non-finite weights");
        return c;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace ordgrade
