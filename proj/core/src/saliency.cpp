#include "patchseg/saliency.hpp"

#include <cmath>

#include "patchseg/error.hpp"

namespace patchseg {

std::vector<Region> gt_components(const CtStack& stack) {
    std::vector<Region> out;
    if (!stack.mask) return out;
    const int h = stack.frames.height(), w = stack.frames.width();
    for (int d = 0; d < stack.depth(); ++d) {
        const auto mask = stack.mask->frame(d);
        std::vector<char> seen(mask.size(), 0);
        for (int start = 0; start < h * w; ++start) {
            if (!mask[start] || seen[start]) continue;
            Region region{d, {}};
            std::vector<int> todo{start};
            seen[start] = 1;
            while (!todo.empty()) {
                const int idx = todo.back();
                todo.pop_back();
                const int r = idx / w, c = idx % w;
                region.pixels.push_back({r, c});
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                        const int n = rr * w + cc;
                        if (mask[n] && !seen[n]) {
                            seen[n] = 1;
                            todo.push_back(n);
                        }
                    }
            }
            out.push_back(std::move(region));
        }
    }
    return out;
}

namespace {

void check_region(const Region& region, int size) {
    if (region.pixels.empty()) throw ArgumentError("saliency region is empty");
    for (const auto& p : region.pixels)
        if (p.row < 0 || p.row >= size || p.col < 0 || p.col >= size)
            throw ArgumentError("saliency region pixel outside the frame");
}

Tensor<double> as_tensor(const std::vector<double>& input, int size) {
    if (input.size() != static_cast<std::size_t>(3) * size * size) throw ShapeError("saliency input must be 3 x S x S");
    Tensor<double> t(1, 3, size, size);
    t.data = input;
    return t;
}

}  // namespace

double region_objective(ReferenceNet<double>& net, const std::vector<double>& input, int size, const Region& region,
                        double scale) {
    check_region(region, size);
    net.set_training(false);
    const Tensor<double> logits = forward_any_size<double>(net, as_tensor(input, size));
    double sum = 0.0;
    for (const auto& p : region.pixels) sum += logits.at(0, 0, p.row, p.col);
    return scale * sum;
}

SaliencyMap region_gradient(ReferenceNet<double>& net, const std::vector<double>& input, int size,
                            const Region& region, double scale) {
    check_region(region, size);
    net.set_training(false);
    const Tensor<double> logits = forward_any_size<double>(net, as_tensor(input, size));
    Tensor<double> grad(1, 1, size, size);
    SaliencyMap map;
    map.frame = region.frame;
    map.size = size;
    for (const auto& p : region.pixels) {
        map.objective += logits.at(0, 0, p.row, p.col);
        grad.at(0, 0, p.row, p.col) += scale;
    }
    map.objective *= scale;
    const Tensor<double> g = backward_any_size<double>(net, grad, true);
    map.channels = g.data;
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    map.magnitude.assign(plane, 0.0);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) map.magnitude[i] += std::abs(map.channels[c * plane + i]);
    return map;
}

SaliencyMap saliency(const ReferenceNet<float>& net, const PreparedStack& stack, const Region& region, double scale) {
    if (region.frame < 0 || region.frame >= stack.stack.depth()) throw ArgumentError("saliency region frame out of range");
    const FusedFrame fused = fuse_z(stack.windowed, region.frame);
    ReferenceNet<double> copy = net.converted<double>();
    std::vector<double> input(fused.channels.begin(), fused.channels.end());
    return region_gradient(copy, input, fused.size, region, scale);
}

}  // namespace patchseg
