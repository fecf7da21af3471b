#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "patchseg/folds.hpp"
#include "patchseg/metrics.hpp"

namespace patchseg {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

/// Named scalar metrics of a report, skipping undefined ones.
std::map<std::string, double> metric_values(const EvalReport& report);

struct CrossValidationReport {
    FoldSplit split;
    std::vector<EvalReport> folds;
    std::map<std::string, MeanStd> summary;

    nlohmann::json to_json() const;
};

using FoldPipeline =
    std::function<EvalReport(int fold, std::span<const std::string> train_ids, std::span<const std::string> test_ids)>;

/// Split with split_folds, run `pipeline` once per fold (train on the other
/// folds, evaluate on this one) and aggregate every metric as mean and
/// population standard deviation over the folds where it is defined.
CrossValidationReport cross_validate(std::span<const std::string> stack_ids, int folds, std::uint64_t seed,
                                     const FoldPipeline& pipeline);

std::map<std::string, MeanStd> aggregate_folds(std::span<const EvalReport> folds);

}  // namespace patchseg
