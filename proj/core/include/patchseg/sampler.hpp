#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchseg/preprocess.hpp"

namespace patchseg {

/// Batch composition: `images_per_batch` distinct frames, `patches_per_image`
/// crops of size `crop` from each, batch_size = images * patches.
struct BatchSpec {
    int crop = 240;
    int images_per_batch = 16;
    int patches_per_image = 1;
    int batch_size = 16;

    static BatchSpec of(int crop, int images, int patches) { return {crop, images, patches, images * patches}; }

    /// Throws ArgumentError unless all fields are positive, batch_size equals
    /// images * patches and crop <= frame_size.
    void validate(int frame_size) const;
    bool operator==(const BatchSpec&) const = default;
};

struct PixelCoord {
    int row = 0;
    int col = 0;
    bool operator==(const PixelCoord&) const = default;
};

struct PatchSample {
    std::vector<float> input;           // 3 x crop x crop, fused windowed channels
    std::vector<std::uint8_t> target;   // crop x crop
    std::string stack_id;
    int frame = 0;
    PixelCoord top_left;
    int crop = 0;
};

/// HU threshold separating head tissue from air.
inline constexpr int kHeadRegionHu = -500;

/// Uniform positive pixel when the frame has foreground; otherwise a uniform
/// head pixel (HU > -500); otherwise a uniform pixel of the frame.
PixelCoord sample_center(const CtStack& stack, int frame, std::mt19937_64& rng);

/// Top-left corner of the crop centered on `center`, clamped per axis to
/// [0, frame_size - crop] so the window never leaves the frame.
PixelCoord crop_origin(int frame_size, PixelCoord center, int crop);

PatchSample crop_patch(const PreparedStack& stack, int frame, PixelCoord center, int crop);

/// Draws batches from every frame of a set of prepared stacks.
class PatchSampler {
public:
    explicit PatchSampler(std::span<const PreparedStack> stacks);

    std::size_t frame_count() const { return frames_.size(); }
    int frame_size() const;

    /// N distinct frames uniformly over all frames, then K foreground-centered
    /// crops from each. Throws ArgumentError when N exceeds frame_count().
    std::vector<PatchSample> make_batch(const BatchSpec& spec, std::mt19937_64& rng) const;

private:
    std::span<const PreparedStack> stacks_;
    std::vector<std::pair<int, int>> frames_;  // (stack index, frame index)
};

}  // namespace patchseg
