#include "patchseg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "patchseg/error.hpp"
#include "patchseg/loss.hpp"

namespace patchseg {

WindowGrid window_grid(int size, int crop, double beta) {
    if (crop < 1 || crop > size)
        throw ArgumentError("crop " + std::to_string(crop) + " must lie in [1, " + std::to_string(size) + "]");
    if (!(beta >= 1.0)) throw ArgumentError("beta must be >= 1");
    WindowGrid grid;
    grid.size = size;
    grid.crop = crop;
    grid.beta = beta;
    grid.windows_per_axis = static_cast<int>(std::ceil(beta * size / crop));
    const int k = grid.windows_per_axis;
    for (int i = 0; i < k; ++i)
        grid.axis_starts.push_back(k == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(i) * (size - crop) / (k - 1))));
    for (int r : grid.axis_starts)
        for (int c : grid.axis_starts) grid.starts.push_back({r, c});
    return grid;
}

std::string to_string(InferenceMode mode) { return mode == InferenceMode::sliding ? "sliding" : "fullconv"; }

InferenceMode inference_mode_from_string(const std::string& name) {
    if (name == "sliding") return InferenceMode::sliding;
    if (name == "fullconv") return InferenceMode::fullconv;
    throw ArgumentError("unknown inference mode '" + name + "'");
}

namespace {

void check_models(ModelSet models) {
    if (models.empty()) throw ArgumentError("inference needs at least one model");
    for (const auto* m : models) {
        if (m == nullptr) throw ContractError("null backbone");
        if (!m->trained()) throw ContractError("backbone has no trained state");
    }
}

Tensor<float> run_logits(Backbone<float>& model, const Tensor<float>& input) {
    model.set_training(false);
    Tensor<float> logits = forward_any_size(model, input);
    if (logits.n != input.n || logits.c != 1 || logits.h != input.h || logits.w != input.w)
        throw ContractError("backbone returned " + logits.shape_string() + " for input " + input.shape_string());
    return logits;
}

}  // namespace

std::vector<float> sliding_infer_frame(ModelSet models, const FusedFrame& frame, const WindowGrid& grid,
                                       std::span<const int> order, int windows_per_forward) {
    check_models(models);
    if (grid.size != frame.size) throw ArgumentError("window grid does not match frame size");
    const int size = frame.size, crop = grid.crop;
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<int> sequence(order.begin(), order.end());
    if (sequence.empty()) {
        sequence.resize(grid.starts.size());
        std::iota(sequence.begin(), sequence.end(), 0);
    }
    if (sequence.size() != grid.starts.size()) throw ArgumentError("window order must list every window once");

    // Each pixel sees at most windows_per_axis^2 contributions; double
    // accumulators keep the mean independent of evaluation order to well
    // below float resolution.
    std::vector<double> model_sum(plane, 0.0);
    std::vector<int> coverage(plane, 0);
    for (int r : grid.axis_starts)
        for (int c : grid.axis_starts)
            for (int y = 0; y < crop; ++y)
                for (int x = 0; x < crop; ++x) ++coverage[static_cast<std::size_t>(r + y) * size + c + x];

    std::vector<double> ensemble_sum(plane, 0.0);
    for (auto* model : models) {
        std::fill(model_sum.begin(), model_sum.end(), 0.0);
        for (std::size_t first = 0; first < sequence.size(); first += windows_per_forward) {
            const int count = static_cast<int>(std::min<std::size_t>(windows_per_forward, sequence.size() - first));
            Tensor<float> input(count, 3, crop, crop);
            for (int i = 0; i < count; ++i) {
                const PixelCoord s = grid.starts[sequence[first + i]];
                for (int ch = 0; ch < 3; ++ch) {
                    const auto src = frame.channel(ch);
                    for (int y = 0; y < crop; ++y)
                        std::copy_n(src.data() + static_cast<std::size_t>(s.row + y) * size + s.col, crop,
                                    input.channel(i, ch) + static_cast<std::size_t>(y) * crop);
                }
            }
            const Tensor<float> logits = run_logits(*model, input);
            for (int i = 0; i < count; ++i) {
                const PixelCoord s = grid.starts[sequence[first + i]];
                const float* l = logits.channel(i, 0);
                for (int y = 0; y < crop; ++y)
                    for (int x = 0; x < crop; ++x)
                        model_sum[static_cast<std::size_t>(s.row + y) * size + s.col + x] +=
                            sigmoid(l[static_cast<std::size_t>(y) * crop + x]);
            }
        }
        for (std::size_t k = 0; k < plane; ++k) ensemble_sum[k] += model_sum[k] / coverage[k];
    }
    std::vector<float> out(plane);
    for (std::size_t k = 0; k < plane; ++k) out[k] = static_cast<float>(ensemble_sum[k] / models.size());
    return out;
}

std::vector<float> fullconv_infer_frame(ModelSet models, const FusedFrame& frame) {
    check_models(models);
    const std::size_t plane = static_cast<std::size_t>(frame.size) * frame.size;
    Tensor<float> input(1, 3, frame.size, frame.size);
    std::copy(frame.channels.begin(), frame.channels.end(), input.data.begin());
    std::vector<double> sum(plane, 0.0);
    for (auto* model : models) {
        const Tensor<float> logits = run_logits(*model, input);
        for (std::size_t k = 0; k < plane; ++k) sum[k] += sigmoid(logits.data[k]);
    }
    std::vector<float> out(plane);
    for (std::size_t k = 0; k < plane; ++k) out[k] = static_cast<float>(sum[k] / models.size());
    return out;
}

namespace {

template <typename FrameFn>
ScoreVolume infer_frames(const PreparedStack& prepared, FrameFn&& fn) {
    const CtStack& stack = prepared.stack;
    ScoreVolume out{stack.stack_id, Volume<float>(stack.depth(), stack.size(), stack.size())};
    for (int d = 0; d < stack.depth(); ++d) {
        const auto scores = fn(fuse_z(prepared.windowed, d));
        std::copy(scores.begin(), scores.end(), out.scores.frame(d).begin());
    }
    return out;
}

}  // namespace

ScoreVolume sliding_infer(const PreparedStack& stack, ModelSet models, int crop, double beta) {
    const WindowGrid grid = window_grid(stack.stack.size(), crop, beta);
    return infer_frames(stack, [&](const FusedFrame& f) { return sliding_infer_frame(models, f, grid); });
}

ScoreVolume fullconv_infer(const PreparedStack& stack, ModelSet models) {
    return infer_frames(stack, [&](const FusedFrame& f) { return fullconv_infer_frame(models, f); });
}

ScoreVolume infer(const PreparedStack& stack, ModelSet models, InferenceMode mode, int crop, double beta) {
    return mode == InferenceMode::sliding ? sliding_infer(stack, models, crop, beta) : fullconv_infer(stack, models);
}

double frame_avg_score(std::span<const float> scores) {
    if (scores.empty()) throw ArgumentError("frame has no pixels");
    double sum = 0.0;
    for (float s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

double frame_lp_score(std::span<const float> scores, double p) {
    if (!(p >= 1.0)) throw ArgumentError("L^p pooling needs p >= 1");
    if (scores.empty()) throw ArgumentError("frame has no pixels");
    const double m = *std::max_element(scores.begin(), scores.end());
    if (m <= 0.0) return 0.0;
    double sum = 0.0;
    for (float s : scores) sum += std::pow(s / m, p);
    return m * std::pow(sum, 1.0 / p);
}

double stack_score(std::span<const double> frame_lp) {
    if (frame_lp.empty()) throw ArgumentError("stack has no frames");
    return *std::max_element(frame_lp.begin(), frame_lp.end());
}

ScoreSummary summarize(const ScoreVolume& volume, double p) {
    ScoreSummary s;
    s.p = p;
    for (int d = 0; d < volume.scores.depth(); ++d) {
        s.frame_avg.push_back(frame_avg_score(volume.scores.frame(d)));
        s.frame_lp.push_back(frame_lp_score(volume.scores.frame(d), p));
    }
    s.stack_score = stack_score(s.frame_lp);
    return s;
}

}  // namespace patchseg
