#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace patchseg {

/// Dense D x H x W volume stored frame-major, row-major.
template <typename T>
class Volume {
public:
    Volume() = default;
    Volume(int depth, int height, int width, T fill = T{})
        : depth_(depth), height_(height), width_(width),
          data_(static_cast<std::size_t>(depth) * height * width, fill) {}

    int depth() const { return depth_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t frame_size() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int d, int r, int c) { return data_[index(d, r, c)]; }
    const T& at(int d, int r, int c) const { return data_[index(d, r, c)]; }

    std::span<T> frame(int d) { return {data_.data() + d * frame_size(), frame_size()}; }
    std::span<const T> frame(int d) const { return {data_.data() + d * frame_size(), frame_size()}; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    bool same_shape(int depth, int height, int width) const {
        return depth_ == depth && height_ == height && width_ == width;
    }
    template <typename U>
    bool same_shape(const Volume<U>& other) const {
        return same_shape(other.depth(), other.height(), other.width());
    }

    bool operator==(const Volume&) const = default;

private:
    std::size_t index(int d, int r, int c) const {
        return (static_cast<std::size_t>(d) * height_ + r) * width_ + c;
    }

    int depth_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

/// One head CT scan: D axial frames of signed Hounsfield units, optionally
/// with a voxelwise binary hemorrhage mask.
struct CtStack {
    std::string stack_id;
    Volume<std::int16_t> frames;
    std::optional<Volume<std::uint8_t>> mask;

    int depth() const { return frames.depth(); }
    /// Frames are square; this is both H and W.
    int size() const { return frames.height(); }
    bool has_mask() const { return mask.has_value(); }
    /// True when the mask holds at least one positive voxel.
    bool positive() const;
    bool frame_positive(int d) const;

    /// Throws ArgumentError when D < 1, frames are not square, or the
    /// mask has the wrong shape or non-binary values.
    void validate() const;

    bool operator==(const CtStack&) const = default;
};

/// Per-voxel hemorrhage probability for one stack.
struct ScoreVolume {
    std::string stack_id;
    Volume<float> scores;

    /// Throws ArgumentError unless every score lies in [0,1].
    void validate() const;
    bool operator==(const ScoreVolume&) const = default;
};

/// Frame and stack level scores pooled from a ScoreVolume.
struct ScoreSummary {
    std::vector<double> frame_avg;
    std::vector<double> frame_lp;
    double stack_score = 0.0;
    double p = 256.0;
};

}  // namespace patchseg
