#pragma once

#include <span>
#include <string>
#include <vector>

#include "patchseg/backbone.hpp"
#include "patchseg/preprocess.hpp"
#include "patchseg/sampler.hpp"
#include "patchseg/stack.hpp"

namespace patchseg {

/// Sliding-window layout over a square frame: windows_per_axis =
/// ceil(beta * size / crop) evenly spaced starts per axis with the first at
/// 0 and the last flush with the far border.
struct WindowGrid {
    int size = 0;
    int crop = 0;
    double beta = 1.0;
    int windows_per_axis = 0;
    std::vector<int> axis_starts;
    std::vector<PixelCoord> starts;  // row-major over axis_starts x axis_starts

    int window_count() const { return static_cast<int>(starts.size()); }
};

/// Throws ArgumentError when crop > size, crop < 1 or beta < 1.
WindowGrid window_grid(int size, int crop, double beta);

enum class InferenceMode { sliding, fullconv };

std::string to_string(InferenceMode mode);
InferenceMode inference_mode_from_string(const std::string& name);

using ModelSet = std::span<Backbone<float>* const>;

/// Pixel probabilities for one fused frame: every window is run through
/// every model, passed through the logistic function, and each pixel takes
/// the mean over covering windows and then over models. `order` (optional)
/// fixes the window evaluation order.
std::vector<float> sliding_infer_frame(ModelSet models, const FusedFrame& frame, const WindowGrid& grid,
                                       std::span<const int> order = {}, int windows_per_forward = 16);

ScoreVolume sliding_infer(const PreparedStack& stack, ModelSet models, int crop, double beta);

/// One whole-frame forward per frame and model.
std::vector<float> fullconv_infer_frame(ModelSet models, const FusedFrame& frame);
ScoreVolume fullconv_infer(const PreparedStack& stack, ModelSet models);

ScoreVolume infer(const PreparedStack& stack, ModelSet models, InferenceMode mode, int crop, double beta);

/// Arithmetic mean of the pixel scores of a frame.
double frame_avg_score(std::span<const float> scores);

/// (sum s_i^p)^(1/p), evaluated as m * (sum (s_i/m)^p)^(1/p) with m = max s_i.
double frame_lp_score(std::span<const float> scores, double p = 256.0);

/// Maximum over the per-frame L^p scores.
double stack_score(std::span<const double> frame_lp);

ScoreSummary summarize(const ScoreVolume& volume, double p = 256.0);

}  // namespace patchseg
