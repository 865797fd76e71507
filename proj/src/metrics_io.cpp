#include <nlohmann/json.hpp>
#include <sstream>

#include "ordgrade/metrics.hpp"

namespace ordgrade {

namespace {

nlohmann::json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> opt_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::string opt_to_text(const std::optional<double>& v) {
    if (!v) return "undefined";
    std::ostringstream os;
    os.precision(6);
    os << *v;
    return os.str();
}

}  // namespace

nlohmann::json metric_report_to_json(const MetricReport& r) {
    return nlohmann::json{
        {"pearson", opt_to_json(r.pearson)}, {"spearman", opt_to_json(r.spearman)},
        {"kendall", opt_to_json(r.kendall)}, {"mae", r.mae},
        {"mse", r.mse},                      {"r2", opt_to_json(r.r_squared)},
        {"n", r.n},
    };
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.pearson = opt_from_json(j.at("pearson"));
    r.spearman = opt_from_json(j.at("spearman"));
    r.kendall = opt_from_json(j.at("kendall"));
    r.mae = j.at("mae").get<double>();
    r.mse = j.at("mse").get<double>();
    r.r_squared = opt_from_json(j.at("r2"));
    r.n = j.at("n").get<std::size_t>();
    return r;
}

std::string metric_report_to_text(const MetricReport& r) {
    std::ostringstream os;
    os << "pearson  " << opt_to_text(r.pearson) << "\n"
       << "spearman " << opt_to_text(r.spearman) << "\n"
       << "kendall  " << opt_to_text(r.kendall) << "\n"
       << "mae      " << opt_to_text(r.mae) << "\n"
       << "mse      " << opt_to_text(r.mse) << "\n"
       << "r2       " << opt_to_text(r.r_squared) << "\n"
       << "n        " << r.n << "\n";
    return os.str();
}

}  // namespace ordgrade
