#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "patchseg/dataset.hpp"
#include "patchseg/stack.hpp"

namespace patchseg {

/// Knobs of the CT phantom generator. HU values are the centers of uniform
/// ranges [value - spread, value + spread] unless noted.
struct PhantomParams {
    int size = 128;
    int min_depth = 4;
    int max_depth = 8;
    double background_hu = -1000.0;
    double tissue_hu = 30.0;
    double tissue_spread = 10.0;  // standard deviation of the smoothed texture
    double texture_sigma = 2.0;   // Gaussian smoothing of the white noise, pixels
    int min_lesions = 1;
    int max_lesions = 3;
    double lesion_hu = 60.0;
    double lesion_spread = 15.0;
    double min_lesion_radius = 4.0;  // in-plane mask radius at the blob center
    double max_lesion_radius = 12.0;
    double positive_rate = 0.5;
    std::uint64_t seed = 0;

    /// Smallest head semi-axis the generator can draw, in pixels.
    double min_head_radius() const;
    /// Throws ArgumentError on inconsistent ranges or when lesions cannot
    /// fit inside the head.
    void validate() const;
};

void to_json(nlohmann::json& j, const PhantomParams& p);
void from_json(const nlohmann::json& j, PhantomParams& p);

/// Geometry of one rendered lesion. The mask is the ellipsoid
/// ((r-row)^2 + (c-col)^2) / radius^2 + (d-frame)^2 / depth_radius^2 < 1
/// intersected with the head.
struct LesionTruth {
    double row = 0.0;
    double col = 0.0;
    double frame = 0.0;
    double radius = 0.0;
    double depth_radius = 0.0;
    double hu = 0.0;

    /// Radius of the cross-section through frame d (0 when not intersected).
    double radius_at(int d) const;
};

struct Phantom {
    CtStack stack;
    std::vector<LesionTruth> lesions;
};

/// Render one phantom. All randomness derives from (params.seed, stack_seed).
Phantom generate_phantom(const PhantomParams& params, std::uint64_t stack_seed);

inline CtStack generate_stack(const PhantomParams& params, std::uint64_t stack_seed) {
    return generate_phantom(params, stack_seed).stack;
}

/// Write n_stacks phantoms plus manifest.json under out_dir. Exactly
/// round(positive_rate * n_stacks) stacks carry lesions.
Manifest generate_dataset(const PhantomParams& params, int n_stacks, const std::filesystem::path& out_dir);

}  // namespace patchseg
