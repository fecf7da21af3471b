#include "patchseg/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "patchseg/error.hpp"
#include "patchseg/inference.hpp"

namespace patchseg {
using nlohmann::json;

OverlapCounts count_overlap(std::span<const float> scores, std::span<const std::uint8_t> gt, double threshold) {
    if (scores.size() != gt.size())
        throw ArgumentError("score and mask sizes differ (" + std::to_string(scores.size()) + " vs " +
                            std::to_string(gt.size()) + ")");
    OverlapCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool p = scores[i] >= threshold;
        const bool g = gt[i] != 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

OverlapScores overlap_scores(const OverlapCounts& c) {
    OverlapScores s;
    s.counts = c;
    const std::int64_t pred_plus_gt = 2 * c.tp + c.fp + c.fn;
    if (pred_plus_gt == 0) return s;  // both empty
    s.dice = 2.0 * static_cast<double>(c.tp) / static_cast<double>(pred_plus_gt);
    s.jaccard = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
    return s;
}

namespace {

template <typename S>
void check_ranking_input(std::span<const S> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
}

template <typename S>
std::vector<std::size_t> descending_order(std::span<const S> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

template <typename S>
double average_precision(std::span<const S> scores, std::span<const std::uint8_t> labels) {
    check_ranking_input(scores, labels);
    const auto positives = static_cast<std::int64_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
    if (positives == 0) throw UndefinedMetricError("average precision needs at least one positive");
    const auto idx = descending_order(scores);
    std::int64_t tp = 0, fp = 0;
    double ap = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        const std::int64_t tp_before = tp;
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]]) ++tp;
            else ++fp;
            ++j;
        }
        if (tp != tp_before) {
            const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            ap += static_cast<double>(tp - tp_before) / static_cast<double>(positives) * precision;
        }
        i = j;
    }
    return ap;
}

template <typename S>
double average_precision_stable(std::span<const S> scores, std::span<const std::uint8_t> labels) {
    check_ranking_input(scores, labels);
    const auto idx = descending_order(scores);
    std::int64_t tp = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (labels[idx[i]]) {
            ++tp;
            sum += static_cast<double>(tp) / static_cast<double>(i + 1);
        }
    if (tp == 0) throw UndefinedMetricError("average precision needs at least one positive");
    return sum / static_cast<double>(tp);
}

template <typename S>
double roc_auc(std::span<const S> scores, std::span<const std::uint8_t> labels) {
    check_ranking_input(scores, labels);
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Twice the Mann-Whitney U statistic, kept integral so ties add exactly 1.
    std::int64_t twice_u = 0, negatives_below = 0, positives = 0, negatives = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::int64_t pos = 0, neg = 0;
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]]) ++pos;
            else ++neg;
            ++j;
        }
        twice_u += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        positives += pos;
        negatives += neg;
        i = j;
    }
    if (positives == 0 || negatives == 0) throw UndefinedMetricError("ROC AUC needs both classes");
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

template <typename S>
std::vector<CurvePoint> roc_curve(std::span<const S> scores, std::span<const std::uint8_t> labels) {
    check_ranking_input(scores, labels);
    const auto idx = descending_order(scores);
    const auto positives = std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; });
    const auto negatives = static_cast<std::int64_t>(labels.size()) - positives;
    if (positives == 0 || negatives == 0) throw UndefinedMetricError("ROC curve needs both classes");
    std::vector<CurvePoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) (labels[idx[j++]] ? tp : fp)++;
        out.push_back({static_cast<double>(scores[idx[i]]), static_cast<double>(fp) / negatives,
                       static_cast<double>(tp) / positives});
        i = j;
    }
    return out;
}

template <typename S>
std::vector<CurvePoint> pr_curve(std::span<const S> scores, std::span<const std::uint8_t> labels) {
    check_ranking_input(scores, labels);
    const auto idx = descending_order(scores);
    const auto positives = std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; });
    if (positives == 0) throw UndefinedMetricError("PR curve needs a positive");
    std::vector<CurvePoint> out;
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) (labels[idx[j++]] ? tp : fp)++;
        out.push_back({static_cast<double>(scores[idx[i]]), static_cast<double>(tp) / positives,
                       static_cast<double>(tp) / static_cast<double>(tp + fp)});
        i = j;
    }
    return out;
}

#define PATCHSEG_INSTANTIATE_RANKING(S)                                                              \
    template double average_precision<S>(std::span<const S>, std::span<const std::uint8_t>);        \
    template double average_precision_stable<S>(std::span<const S>, std::span<const std::uint8_t>); \
    template double roc_auc<S>(std::span<const S>, std::span<const std::uint8_t>);                  \
    template std::vector<CurvePoint> roc_curve<S>(std::span<const S>, std::span<const std::uint8_t>); \
    template std::vector<CurvePoint> pr_curve<S>(std::span<const S>, std::span<const std::uint8_t>);

PATCHSEG_INSTANTIATE_RANKING(float)
PATCHSEG_INSTANTIATE_RANKING(double)

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

template <typename F>
std::optional<double> defined_or_empty(F&& f) {
    try {
        return f();
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

struct Pooled {
    std::vector<float> pixel_scores;
    std::vector<std::uint8_t> pixel_labels;
    std::vector<double> frame_avg, frame_lp, stack_scores;
    std::vector<std::uint8_t> frame_labels, stack_labels;
    OverlapCounts counts;
};

Pooled pool(std::span<const ScoreVolume> predictions, std::span<const CtStack> ground_truth, const EvalOptions& options) {
    if (predictions.size() != ground_truth.size())
        throw ArgumentError("prediction and ground-truth stack counts differ");
    std::map<std::string, const CtStack*> by_id;
    for (const auto& s : ground_truth) {
        if (!s.mask) throw ArgumentError("ground-truth stack '" + s.stack_id + "' has no mask");
        if (!by_id.emplace(s.stack_id, &s).second) throw ArgumentError("duplicate stack id '" + s.stack_id + "'");
    }
    Pooled p;
    for (const auto& pred : predictions) {
        const auto it = by_id.find(pred.stack_id);
        if (it == by_id.end()) throw ArgumentError("prediction '" + pred.stack_id + "' has no ground truth");
        const CtStack& gt = *it->second;
        if (!pred.scores.same_shape(gt.frames)) throw ArgumentError("shape mismatch for stack '" + gt.stack_id + "'");
        const auto scores = pred.scores.values();
        const auto mask = gt.mask->values();
        p.pixel_scores.insert(p.pixel_scores.end(), scores.begin(), scores.end());
        p.pixel_labels.insert(p.pixel_labels.end(), mask.begin(), mask.end());
        p.counts += count_overlap(scores, mask, options.threshold);
        const ScoreSummary summary = summarize(pred, options.p);
        for (int d = 0; d < gt.depth(); ++d) {
            p.frame_avg.push_back(summary.frame_avg[d]);
            p.frame_lp.push_back(summary.frame_lp[d]);
            p.frame_labels.push_back(gt.frame_positive(d) ? 1 : 0);
        }
        p.stack_scores.push_back(summary.stack_score);
        const int label = options.manifest ? options.manifest->label_of(gt.stack_id) : (gt.positive() ? 1 : 0);
        p.stack_labels.push_back(static_cast<std::uint8_t>(label != 0));
    }
    return p;
}

}  // namespace

json EvalReport::to_json() const {
    return json{{"dice", dice},
                {"jaccard", jaccard},
                {"pixel_ap", optional_json(pixel_ap)},
                {"pixel_ap_stable", optional_json(pixel_ap_stable)},
                {"frame_ap", optional_json(frame_ap)},
                {"frame_ap_lp", optional_json(frame_ap_lp)},
                {"stack_auc", optional_json(stack_auc)},
                {"counts", {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}}},
                {"pixels", pixels},
                {"frames", frames},
                {"positive_frames", positive_frames},
                {"stacks", stacks},
                {"positive_stacks", positive_stacks},
                {"threshold", threshold},
                {"p", p},
                {"empty_mask_dice", 1.0}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    r.dice = j.at("dice").get<double>();
    r.jaccard = j.at("jaccard").get<double>();
    r.pixel_ap = optional_from(j, "pixel_ap");
    r.pixel_ap_stable = optional_from(j, "pixel_ap_stable");
    r.frame_ap = optional_from(j, "frame_ap");
    r.frame_ap_lp = optional_from(j, "frame_ap_lp");
    r.stack_auc = optional_from(j, "stack_auc");
    const auto& c = j.at("counts");
    r.counts = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(), c.at("fn").get<std::int64_t>(),
                c.at("tn").get<std::int64_t>()};
    r.pixels = j.at("pixels").get<std::size_t>();
    r.frames = j.at("frames").get<std::size_t>();
    r.positive_frames = j.at("positive_frames").get<std::size_t>();
    r.stacks = j.at("stacks").get<std::size_t>();
    r.positive_stacks = j.at("positive_stacks").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    r.p = j.at("p").get<double>();
    return r;
}

EvalReport evaluate(std::span<const ScoreVolume> predictions, std::span<const CtStack> ground_truth,
                    const EvalOptions& options) {
    const Pooled p = pool(predictions, ground_truth, options);
    EvalReport r;
    r.threshold = options.threshold;
    r.p = options.p;
    const OverlapScores overlap = overlap_scores(p.counts);
    r.dice = overlap.dice;
    r.jaccard = overlap.jaccard;
    r.counts = p.counts;
    r.pixels = p.pixel_scores.size();
    r.frames = p.frame_avg.size();
    r.positive_frames = static_cast<std::size_t>(std::count(p.frame_labels.begin(), p.frame_labels.end(), 1));
    r.stacks = p.stack_scores.size();
    r.positive_stacks = static_cast<std::size_t>(std::count(p.stack_labels.begin(), p.stack_labels.end(), 1));
    const std::span<const float> px(p.pixel_scores);
    const std::span<const double> fa(p.frame_avg), fl(p.frame_lp), ss(p.stack_scores);
    r.pixel_ap = defined_or_empty([&] { return average_precision(px, std::span<const std::uint8_t>(p.pixel_labels)); });
    r.pixel_ap_stable =
        defined_or_empty([&] { return average_precision_stable(px, std::span<const std::uint8_t>(p.pixel_labels)); });
    r.frame_ap = defined_or_empty([&] { return average_precision(fa, std::span<const std::uint8_t>(p.frame_labels)); });
    r.frame_ap_lp = defined_or_empty([&] { return average_precision(fl, std::span<const std::uint8_t>(p.frame_labels)); });
    r.stack_auc = defined_or_empty([&] { return roc_auc(ss, std::span<const std::uint8_t>(p.stack_labels)); });
    return r;
}

void write_curves_csv(std::span<const ScoreVolume> predictions, std::span<const CtStack> ground_truth,
                      const std::filesystem::path& roc_csv, const std::filesystem::path& pr_csv,
                      const EvalOptions& options) {
    const Pooled p = pool(predictions, ground_truth, options);
    auto write = [](const std::filesystem::path& path, const char* header, const std::vector<CurvePoint>& pts) {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << header << '\n';
        // Pixel-level curves have one point per distinct score; keep at most
        // kMaxCurvePoints evenly spaced ones plus the final point.
        constexpr std::size_t kMaxCurvePoints = 2000;
        const std::size_t stride = pts.size() > kMaxCurvePoints ? pts.size() / kMaxCurvePoints + 1 : 1;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (i % stride == 0 || i + 1 == pts.size())
                out << pts[i].threshold << ',' << pts[i].x << ',' << pts[i].y << '\n';
    };
    try {
        write(roc_csv, "threshold,fpr,tpr",
              roc_curve(std::span<const double>(p.stack_scores), std::span<const std::uint8_t>(p.stack_labels)));
    } catch (const UndefinedMetricError&) {
        write(roc_csv, "threshold,fpr,tpr", {});
    }
    try {
        write(pr_csv, "threshold,recall,precision",
              pr_curve(std::span<const float>(p.pixel_scores), std::span<const std::uint8_t>(p.pixel_labels)));
    } catch (const UndefinedMetricError&) {
        write(pr_csv, "threshold,recall,precision", {});
    }
}

}  // namespace patchseg
