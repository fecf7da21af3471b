#include "patchseg/sampler.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "patchseg/error.hpp"

namespace patchseg {

void BatchSpec::validate(int frame_size) const {
    if (crop <= 0 || images_per_batch <= 0 || patches_per_image <= 0 || batch_size <= 0)
        throw ArgumentError("batch spec fields must be positive");
    if (batch_size != images_per_batch * patches_per_image)
        throw ArgumentError("batch size " + std::to_string(batch_size) + " != images " +
                            std::to_string(images_per_batch) + " x patches " + std::to_string(patches_per_image));
    if (crop > frame_size)
        throw ArgumentError("crop " + std::to_string(crop) + " exceeds frame size " + std::to_string(frame_size));
}

namespace {

PixelCoord pick(const std::vector<int>& candidates, int size, std::mt19937_64& rng) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
    return {candidates[k] / size, candidates[k] % size};
}

}  // namespace

PixelCoord sample_center(const CtStack& stack, int frame, std::mt19937_64& rng) {
    if (frame < 0 || frame >= stack.depth()) throw ArgumentError("frame index out of range");
    const int size = stack.size();
    std::vector<int> candidates;
    if (stack.mask) {
        const auto m = stack.mask->frame(frame);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i]) candidates.push_back(static_cast<int>(i));
        if (!candidates.empty()) return pick(candidates, size, rng);
    }
    const auto hu = stack.frames.frame(frame);
    for (std::size_t i = 0; i < hu.size(); ++i)
        if (hu[i] > kHeadRegionHu) candidates.push_back(static_cast<int>(i));
    if (!candidates.empty()) return pick(candidates, size, rng);
    const auto k = std::uniform_int_distribution<int>(0, size * size - 1)(rng);
    return {k / size, k % size};
}

PixelCoord crop_origin(int frame_size, PixelCoord center, int crop) {
    if (crop > frame_size || crop <= 0)
        throw ArgumentError("crop " + std::to_string(crop) + " does not fit frame " + std::to_string(frame_size));
    const int hi = frame_size - crop;
    return {std::clamp(center.row - crop / 2, 0, hi), std::clamp(center.col - crop / 2, 0, hi)};
}

PatchSample crop_patch(const PreparedStack& prepared, int frame, PixelCoord center, int crop) {
    const CtStack& stack = prepared.stack;
    const int size = stack.size();
    const PixelCoord origin = crop_origin(size, center, crop);
    const int depth = stack.depth();
    const int sources[3] = {frame > 0 ? frame - 1 : frame, frame, frame + 1 < depth ? frame + 1 : frame};

    PatchSample out;
    out.stack_id = stack.stack_id;
    out.frame = frame;
    out.top_left = origin;
    out.crop = crop;
    out.input.resize(3 * static_cast<std::size_t>(crop) * crop);
    out.target.assign(static_cast<std::size_t>(crop) * crop, 0);
    for (int ch = 0; ch < 3; ++ch) {
        const auto src = prepared.windowed.values.frame(sources[ch]);
        for (int r = 0; r < crop; ++r)
            std::memcpy(out.input.data() + (static_cast<std::size_t>(ch) * crop + r) * crop,
                        src.data() + static_cast<std::size_t>(origin.row + r) * size + origin.col,
                        crop * sizeof(float));
    }
    if (stack.mask) {
        const auto m = stack.mask->frame(frame);
        for (int r = 0; r < crop; ++r)
            std::memcpy(out.target.data() + static_cast<std::size_t>(r) * crop,
                        m.data() + static_cast<std::size_t>(origin.row + r) * size + origin.col, crop);
    }
    return out;
}

PatchSampler::PatchSampler(std::span<const PreparedStack> stacks) : stacks_(stacks) {
    if (stacks.empty()) throw ArgumentError("sampler needs at least one stack");
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        if (stacks[s].stack.size() != stacks[0].stack.size())
            throw ArgumentError("all stacks must share one frame size");
        for (int d = 0; d < stacks[s].stack.depth(); ++d) frames_.emplace_back(static_cast<int>(s), d);
    }
}

int PatchSampler::frame_size() const { return stacks_[0].stack.size(); }

std::vector<PatchSample> PatchSampler::make_batch(const BatchSpec& spec, std::mt19937_64& rng) const {
    spec.validate(frame_size());
    if (static_cast<std::size_t>(spec.images_per_batch) > frames_.size())
        throw ArgumentError("batch wants " + std::to_string(spec.images_per_batch) + " distinct frames, only " +
                            std::to_string(frames_.size()) + " available");
    // Partial Fisher-Yates: the first N entries become the chosen frames.
    std::vector<int> order(frames_.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < spec.images_per_batch; ++i) {
        const auto j = std::uniform_int_distribution<std::size_t>(i, order.size() - 1)(rng);
        std::swap(order[i], order[j]);
    }
    std::vector<PatchSample> batch;
    batch.reserve(spec.batch_size);
    for (int i = 0; i < spec.images_per_batch; ++i) {
        const auto [s, d] = frames_[order[i]];
        const PreparedStack& prepared = stacks_[s];
        for (int k = 0; k < spec.patches_per_image; ++k)
            batch.push_back(crop_patch(prepared, d, sample_center(prepared.stack, d, rng), spec.crop));
    }
    return batch;
}

}  // namespace patchseg
