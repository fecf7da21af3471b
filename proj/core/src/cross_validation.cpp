#include "patchseg/cross_validation.hpp"

#include <cmath>

#include "patchseg/error.hpp"

namespace patchseg {
using nlohmann::json;

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    out.count = values.size();
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / values.size();
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / values.size());
    return out;
}

std::map<std::string, double> metric_values(const EvalReport& r) {
    std::map<std::string, double> m{{"dice", r.dice}, {"jaccard", r.jaccard}};
    if (r.pixel_ap) m["pixel_ap"] = *r.pixel_ap;
    if (r.pixel_ap_stable) m["pixel_ap_stable"] = *r.pixel_ap_stable;
    if (r.frame_ap) m["frame_ap"] = *r.frame_ap;
    if (r.frame_ap_lp) m["frame_ap_lp"] = *r.frame_ap_lp;
    if (r.stack_auc) m["stack_auc"] = *r.stack_auc;
    return m;
}

std::map<std::string, MeanStd> aggregate_folds(std::span<const EvalReport> folds) {
    std::map<std::string, std::vector<double>> columns;
    for (const auto& r : folds)
        for (const auto& [name, value] : metric_values(r)) columns[name].push_back(value);
    std::map<std::string, MeanStd> out;
    for (const auto& [name, values] : columns) out[name] = mean_std(values);
    return out;
}

json CrossValidationReport::to_json() const {
    json per_fold = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
        json j = folds[f].to_json();
        j["fold"] = f;
        j["test_stacks"] = split.members(static_cast<int>(f));
        per_fold.push_back(j);
    }
    json agg = json::object();
    for (const auto& [name, ms] : summary) agg[name] = {{"mean", ms.mean}, {"std", ms.std}, {"folds", ms.count}};
    return json{{"fold_count", split.fold_count}, {"folds", per_fold}, {"summary", agg}};
}

CrossValidationReport cross_validate(std::span<const std::string> stack_ids, int folds, std::uint64_t seed,
                                     const FoldPipeline& pipeline) {
    if (folds < 2) throw ArgumentError("cross validation needs at least 2 folds");
    CrossValidationReport report;
    report.split = split_folds(stack_ids, folds, seed);
    for (int f = 0; f < folds; ++f) {
        const auto train_ids = report.split.complement(f);
        const auto test_ids = report.split.members(f);
        report.folds.push_back(pipeline(f, train_ids, test_ids));
    }
    report.summary = aggregate_folds(report.folds);
    return report;
}

}  // namespace patchseg
