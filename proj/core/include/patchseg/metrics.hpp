#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <vector>

#include "patchseg/dataset.hpp"
#include "patchseg/stack.hpp"

namespace patchseg {

struct OverlapCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    bool operator==(const OverlapCounts&) const = default;
    OverlapCounts& operator+=(const OverlapCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

struct OverlapScores {
    double dice = 1.0;
    double jaccard = 1.0;
    OverlapCounts counts;
};

/// Pixels with score >= threshold are predicted positive.
OverlapCounts count_overlap(std::span<const float> scores, std::span<const std::uint8_t> gt, double threshold = 0.5);

/// Dice 2|P&G|/(|P|+|G|) and Jaccard |P&G|/|P or G|; both 1 when P and G are empty.
OverlapScores overlap_scores(const OverlapCounts& counts);

inline OverlapScores dice_jaccard(std::span<const float> scores, std::span<const std::uint8_t> gt,
                                  double threshold = 0.5) {
    return overlap_scores(count_overlap(scores, gt, threshold));
}

/// Area under the precision-recall step curve with tied scores forming a
/// single operating point: sum over distinct thresholds t (descending) of
/// (R(t) - R(t_prev)) * P(t). Throws UndefinedMetricError without positives.
template <typename S>
double average_precision(std::span<const S> scores, std::span<const std::uint8_t> labels);

/// Mean of precision at each positive after a stable descending sort (ties
/// keep input order).
template <typename S>
double average_precision_stable(std::span<const S> scores, std::span<const std::uint8_t> labels);

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half. Throws UndefinedMetricError for single-class input.
template <typename S>
double roc_auc(std::span<const S> scores, std::span<const std::uint8_t> labels);

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;  // FPR for ROC, recall for PR
    double y = 0.0;  // TPR for ROC, precision for PR
};

template <typename S>
std::vector<CurvePoint> roc_curve(std::span<const S> scores, std::span<const std::uint8_t> labels);
template <typename S>
std::vector<CurvePoint> pr_curve(std::span<const S> scores, std::span<const std::uint8_t> labels);

/// Metrics for one evaluated stack set. Ranking metrics that are undefined
/// on the given data (no positives, single class) are left empty.
struct EvalReport {
    double dice = 1.0;
    double jaccard = 1.0;
    std::optional<double> pixel_ap;
    std::optional<double> pixel_ap_stable;
    std::optional<double> frame_ap;     // over frame-average scores
    std::optional<double> frame_ap_lp;  // over L^p frame scores
    std::optional<double> stack_auc;
    OverlapCounts counts;
    std::size_t pixels = 0;
    std::size_t frames = 0;
    std::size_t positive_frames = 0;
    std::size_t stacks = 0;
    std::size_t positive_stacks = 0;
    double threshold = 0.5;
    double p = 256.0;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
    double threshold = 0.5;
    double p = 256.0;
    /// Stack labels; derived from the masks when absent.
    const Manifest* manifest = nullptr;
};

/// Pixel metrics pool every pixel of every stack; frame AP labels a frame
/// positive when any of its ground-truth pixels is; stack AUC ranks stacks by
/// their L^p stack score. Throws ArgumentError on unmatched ids or shapes.
EvalReport evaluate(std::span<const ScoreVolume> predictions, std::span<const CtStack> ground_truth,
                    const EvalOptions& options = {});

/// Write ROC (stack level) and PR (pixel level) curves as CSV.
void write_curves_csv(std::span<const ScoreVolume> predictions, std::span<const CtStack> ground_truth,
                      const std::filesystem::path& roc_csv, const std::filesystem::path& pr_csv,
                      const EvalOptions& options = {});

}  // namespace patchseg
