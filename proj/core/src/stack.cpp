#include "patchseg/stack.hpp"

#include <algorithm>
#include <string>

#include "patchseg/error.hpp"

namespace patchseg {

bool CtStack::positive() const {
    if (!mask) return false;
    const auto v = mask->values();
    return std::any_of(v.begin(), v.end(), [](std::uint8_t m) { return m != 0; });
}

bool CtStack::frame_positive(int d) const {
    if (!mask) return false;
    const auto f = mask->frame(d);
    return std::any_of(f.begin(), f.end(), [](std::uint8_t m) { return m != 0; });
}

void CtStack::validate() const {
    if (frames.depth() < 1) throw ArgumentError("stack '" + stack_id + "' has no frames");
    if (frames.height() != frames.width())
        throw ArgumentError("stack '" + stack_id + "' frames are not square");
    if (mask) {
        if (!mask->same_shape(frames))
            throw ArgumentError("stack '" + stack_id + "' mask shape differs from frames");
        const auto v = mask->values();
        if (std::any_of(v.begin(), v.end(), [](std::uint8_t m) { return m > 1; }))
            throw ArgumentError("stack '" + stack_id + "' mask is not binary");
    }
}

void ScoreVolume::validate() const {
    const auto v = scores.values();
    if (std::any_of(v.begin(), v.end(), [](float s) { return !(s >= 0.0f && s <= 1.0f); }))
        throw ArgumentError("score volume '" + stack_id + "' has values outside [0,1]");
}

}  // namespace patchseg
