#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "patchseg/preprocess.hpp"
#include "patchseg/stack.hpp"

namespace patchseg {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB

    bool operator==(const RgbImage&) const = default;
};

/// 8-bit RGB PNG. Throws IoError on failure.
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

/// Windowed frame as gray RGB.
RgbImage gray_frame(const WindowedStack& windowed, int frame);

/// Side-by-side panel: prediction (scores >= threshold tinted red) on the
/// left, ground truth (tinted green) on the right.
RgbImage compose_overlay(const PreparedStack& stack, const ScoreVolume& scores, int frame, double threshold = 0.5);

/// Gray frame with a green layer whose intensity follows `heat` normalised
/// by its maximum.
RgbImage compose_heatmap(const WindowedStack& windowed, int frame, std::span<const double> heat);

struct OverlayOptions {
    double threshold = 0.5;
    int random_frames = 0;  // 0 renders every frame; otherwise a seeded sample
    std::uint64_t seed = 0;
};

/// Writes <out_dir>/<stack_id>_f<frame>.png per rendered frame and returns
/// the written paths. Throws ShapeError on mismatched shapes.
std::vector<std::filesystem::path> render_overlay(const PreparedStack& stack, const ScoreVolume& scores,
                                                  const std::filesystem::path& out_dir,
                                                  const OverlayOptions& options = {});

}  // namespace patchseg
