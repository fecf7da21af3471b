#pragma once

#include <vector>

#include "patchseg/preprocess.hpp"
#include "patchseg/reference_net.hpp"
#include "patchseg/sampler.hpp"

namespace patchseg {

/// A set of pixels inside one frame.
struct Region {
    int frame = 0;
    std::vector<PixelCoord> pixels;
};

/// 8-connected components of the ground-truth mask, frame by frame.
std::vector<Region> gt_components(const CtStack& stack);

/// Input gradient of the region's logit sum.
struct SaliencyMap {
    int frame = 0;
    int size = 0;
    std::vector<double> channels;   // 3 x size x size, d objective / d input
    std::vector<double> magnitude;  // size x size, sum over channels of |gradient|
    double objective = 0.0;
};

/// Gradient of scale * (sum of logits over the region) with respect to the
/// fused input frame, computed in double precision in evaluation mode.
/// Throws ArgumentError for an empty region or one outside the frame.
SaliencyMap saliency(const ReferenceNet<float>& net, const PreparedStack& stack, const Region& region,
                     double scale = 1.0);

/// scale * (sum of logits over the region) for an explicit 3 x S x S input.
double region_objective(ReferenceNet<double>& net, const std::vector<double>& input, int size, const Region& region,
                        double scale = 1.0);

/// Gradient of region_objective with respect to the input.
SaliencyMap region_gradient(ReferenceNet<double>& net, const std::vector<double>& input, int size,
                            const Region& region, double scale = 1.0);

}  // namespace patchseg
