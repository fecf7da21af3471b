#include "patchseg/preprocess.hpp"

#include <algorithm>
#include <cstring>

#include "patchseg/error.hpp"

namespace patchseg {

double hu_clip(double hu) { return std::clamp(hu, kHuWindowLow, kHuWindowHigh); }

double hu_window(double hu) {
    return (hu_clip(hu) - kHuWindowLow) / (kHuWindowHigh - kHuWindowLow) * kWindowedMax;
}

WindowedStack window_stack(const CtStack& stack) {
    WindowedStack out{stack.stack_id,
                      Volume<float>(stack.frames.depth(), stack.frames.height(), stack.frames.width())};
    const auto src = stack.frames.values();
    auto dst = out.values.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(hu_window(src[i]));
    return out;
}

FusedFrame fuse_z(const WindowedStack& stack, int frame_index) {
    const int depth = stack.values.depth();
    if (frame_index < 0 || frame_index >= depth)
        throw ArgumentError("frame index " + std::to_string(frame_index) + " outside [0," +
                            std::to_string(depth) + ")");
    FusedFrame out;
    out.frame_index = frame_index;
    out.size = stack.values.height();
    const std::size_t plane = stack.values.frame_size();
    out.channels.resize(3 * plane);
    const int sources[3] = {frame_index > 0 ? frame_index - 1 : frame_index, frame_index,
                            frame_index + 1 < depth ? frame_index + 1 : frame_index};
    for (int c = 0; c < 3; ++c) {
        const auto src = stack.values.frame(sources[c]);
        std::memcpy(out.channels.data() + c * plane, src.data(), plane * sizeof(float));
    }
    return out;
}

PreparedStack prepare(CtStack stack) {
    stack.validate();
    WindowedStack windowed = window_stack(stack);
    return {std::move(stack), std::move(windowed)};
}

}  // namespace patchseg
