#pragma once

#include <span>
#include <string>
#include <vector>

#include "patchseg/stack.hpp"

namespace patchseg {

inline constexpr double kHuWindowLow = -40.0;
inline constexpr double kHuWindowHigh = 90.0;
inline constexpr double kWindowedMax = 255.0;

/// Clamp to the [-40, 90] HU window.
double hu_clip(double hu);

/// Clip to the HU window and rescale linearly onto [0, 255]. No rounding.
double hu_window(double hu);

/// HU volume mapped through hu_window.
struct WindowedStack {
    std::string stack_id;
    Volume<float> values;
};

WindowedStack window_stack(const CtStack& stack);

/// Three-channel network input for one frame: (previous, center, next).
/// Missing neighbours at either end of the stack replicate the center.
struct FusedFrame {
    int frame_index = 0;
    int size = 0;
    std::vector<float> channels;  // 3 x size x size

    std::span<const float> channel(int c) const {
        const std::size_t plane = static_cast<std::size_t>(size) * size;
        return {channels.data() + c * plane, plane};
    }
};

FusedFrame fuse_z(const WindowedStack& stack, int frame_index);

/// A stack together with its windowed image, the unit the sampler and
/// inference operate on.
struct PreparedStack {
    CtStack stack;
    WindowedStack windowed;
};

PreparedStack prepare(CtStack stack);

}  // namespace patchseg
