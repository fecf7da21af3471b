#include "patchseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "patchseg/error.hpp"
#include "patchseg/stack_io.hpp"

namespace patchseg {
using nlohmann::json;

namespace {

constexpr double kMinHeadAxis = 0.34;   // fraction of the frame size
constexpr double kMaxHeadAxis = 0.44;
constexpr double kEndFrameShrink = 0.85;  // head scale at the first/last frame
constexpr double kLesionMargin = 3.0;     // pixels between lesion edge and head edge
constexpr double kHaloWidth = 0.1;        // partial-volume rim, in normalized radius units

std::mt19937_64 stack_rng(std::uint64_t seed, std::uint64_t stack_seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stack_seed), static_cast<std::uint32_t>(stack_seed >> 32)};
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (auto& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur with edge clamping, then rescaled to unit variance.
std::vector<double> smooth_noise(std::mt19937_64& rng, int size, double sigma) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> white(static_cast<std::size_t>(size) * size);
    for (auto& v : white) v = normal(rng);
    if (sigma <= 0.0) return white;

    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> tmp(white.size()), out(white.size());
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * white[r * size + std::clamp(c + k, 0, size - 1)];
            tmp[r * size + c] = acc;
        }
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[std::clamp(r + k, 0, size - 1) * size + c];
            out[r * size + c] = acc;
        }
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / out.size();
    double var = 0.0;
    for (double v : out) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / out.size());
    for (auto& v : out) v = (v - mean) / (sd > 0.0 ? sd : 1.0);
    return out;
}

struct Head {
    double row, col, semi_rows, semi_cols;

    bool contains(double r, double c) const {
        const double dr = (r - row) / semi_rows, dc = (c - col) / semi_cols;
        return dr * dr + dc * dc < 1.0;
    }
};

std::int16_t to_hu(double v) {
    return static_cast<std::int16_t>(std::clamp(std::lround(v), -32768L, 32767L));
}

}  // namespace

double PhantomParams::min_head_radius() const { return kMinHeadAxis * kEndFrameShrink * size; }

void PhantomParams::validate() const {
    if (size < 16) throw ArgumentError("phantom size must be at least 16");
    if (min_depth < 1 || max_depth < min_depth) throw ArgumentError("invalid depth range");
    if (min_lesions < 0 || max_lesions < min_lesions) throw ArgumentError("invalid lesion count range");
    if (min_lesion_radius <= 0.0 || max_lesion_radius < min_lesion_radius)
        throw ArgumentError("invalid lesion radius range");
    if (max_lesion_radius + kLesionMargin >= min_head_radius())
        throw ArgumentError("lesion radius " + std::to_string(max_lesion_radius) +
                            " does not fit inside head radius " + std::to_string(min_head_radius()));
    if (positive_rate < 0.0 || positive_rate > 1.0) throw ArgumentError("positive_rate outside [0,1]");
    if (tissue_spread < 0.0 || lesion_spread < 0.0 || texture_sigma < 0.0)
        throw ArgumentError("negative spread");
}

void to_json(json& j, const PhantomParams& p) {
    j = json{{"size", p.size},
             {"min_depth", p.min_depth},
             {"max_depth", p.max_depth},
             {"background_hu", p.background_hu},
             {"tissue_hu", p.tissue_hu},
             {"tissue_spread", p.tissue_spread},
             {"texture_sigma", p.texture_sigma},
             {"min_lesions", p.min_lesions},
             {"max_lesions", p.max_lesions},
             {"lesion_hu", p.lesion_hu},
             {"lesion_spread", p.lesion_spread},
             {"min_lesion_radius", p.min_lesion_radius},
             {"max_lesion_radius", p.max_lesion_radius},
             {"positive_rate", p.positive_rate},
             {"seed", p.seed}};
}

void from_json(const json& j, PhantomParams& p) {
    const PhantomParams d;
    p.size = j.value("size", d.size);
    p.min_depth = j.value("min_depth", d.min_depth);
    p.max_depth = j.value("max_depth", d.max_depth);
    p.background_hu = j.value("background_hu", d.background_hu);
    p.tissue_hu = j.value("tissue_hu", d.tissue_hu);
    p.tissue_spread = j.value("tissue_spread", d.tissue_spread);
    p.texture_sigma = j.value("texture_sigma", d.texture_sigma);
    p.min_lesions = j.value("min_lesions", d.min_lesions);
    p.max_lesions = j.value("max_lesions", d.max_lesions);
    p.lesion_hu = j.value("lesion_hu", d.lesion_hu);
    p.lesion_spread = j.value("lesion_spread", d.lesion_spread);
    p.min_lesion_radius = j.value("min_lesion_radius", d.min_lesion_radius);
    p.max_lesion_radius = j.value("max_lesion_radius", d.max_lesion_radius);
    p.positive_rate = j.value("positive_rate", d.positive_rate);
    p.seed = j.value("seed", d.seed);
}

double LesionTruth::radius_at(int d) const {
    const double dz = (d - frame) / depth_radius;
    if (dz * dz >= 1.0) return 0.0;
    return radius * std::sqrt(1.0 - dz * dz);
}

Phantom generate_phantom(const PhantomParams& params, std::uint64_t stack_seed) {
    params.validate();
    auto rng = stack_rng(params.seed, stack_seed);
    const int size = params.size;
    const int depth = uniform_int(rng, params.min_depth, params.max_depth);

    const double center = 0.5 * (size - 1);
    const double head_row = center + uniform(rng, -3.0, 3.0);
    const double head_col = center + uniform(rng, -3.0, 3.0);
    const double semi_rows = size * uniform(rng, kMaxHeadAxis - 0.04, kMaxHeadAxis);
    const double semi_cols = size * uniform(rng, kMinHeadAxis, kMinHeadAxis + 0.04);
    std::vector<Head> heads(depth);
    for (int d = 0; d < depth; ++d) {
        const double t = depth > 1 ? std::abs(d - 0.5 * (depth - 1)) / (0.5 * (depth - 1)) : 0.0;
        const double scale = 1.0 - (1.0 - kEndFrameShrink) * t;
        heads[d] = {head_row, head_col, semi_rows * scale, semi_cols * scale};
    }

    Phantom out;
    const int lesion_count = uniform_int(rng, params.min_lesions, params.max_lesions);
    for (int i = 0; i < lesion_count; ++i) {
        LesionTruth l;
        l.radius = uniform(rng, params.min_lesion_radius, params.max_lesion_radius);
        l.depth_radius = uniform(rng, 1.2, 2.5);
        // The center sits between two frames (or on the only frame) so that
        // the blob crosses at least two adjacent frames whenever D >= 2.
        l.frame = depth >= 2 ? uniform_int(rng, 0, depth - 2) + uniform(rng, 0.0, 1.0) : 0.0;
        // Place the center inside the smallest head ellipse shrunk by the radius.
        const double reach_rows = semi_rows * kEndFrameShrink - l.radius - kLesionMargin;
        const double reach_cols = semi_cols * kEndFrameShrink - l.radius - kLesionMargin;
        const double angle = uniform(rng, 0.0, 2.0 * M_PI);
        const double rho = std::sqrt(uniform(rng, 0.0, 1.0));
        l.row = head_row + rho * reach_rows * std::sin(angle);
        l.col = head_col + rho * reach_cols * std::cos(angle);
        l.hu = uniform(rng, params.lesion_hu - params.lesion_spread, params.lesion_hu + params.lesion_spread);
        out.lesions.push_back(l);
    }

    CtStack& stack = out.stack;
    char id[32];
    std::snprintf(id, sizeof(id), "stack_%04llu", static_cast<unsigned long long>(stack_seed));
    stack.stack_id = id;
    stack.frames = Volume<std::int16_t>(depth, size, size);
    stack.mask.emplace(depth, size, size, std::uint8_t{0});

    for (int d = 0; d < depth; ++d) {
        const auto texture = smooth_noise(rng, size, params.texture_sigma);
        const Head& head = heads[d];
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                if (!head.contains(r, c)) {
                    stack.frames.at(d, r, c) = to_hu(params.background_hu);
                    continue;
                }
                const double noise = texture[r * size + c];
                double hu = params.tissue_hu + params.tissue_spread * noise;
                bool inside = false;
                for (const auto& l : out.lesions) {
                    const double dr = (r - l.row) / l.radius, dc = (c - l.col) / l.radius;
                    const double dz = (d - l.frame) / l.depth_radius;
                    const double q = std::sqrt(dr * dr + dc * dc + dz * dz);
                    // Gaussian falloff outside the unit ellipsoid, full lesion
                    // density inside.
                    const double x = (q - 1.0) / kHaloWidth;
                    const double weight = q < 1.0 ? 1.0 : std::exp(-x * x);
                    if (q < 1.0) inside = true;
                    const double lesion_hu = l.hu + 0.5 * params.tissue_spread * noise;
                    hu = std::max(hu, hu + weight * (lesion_hu - hu));
                }
                stack.frames.at(d, r, c) = to_hu(hu);
                stack.mask->at(d, r, c) = inside ? 1 : 0;
            }
    }
    return out;
}

Manifest generate_dataset(const PhantomParams& params, int n_stacks, const std::filesystem::path& out_dir) {
    params.validate();
    if (n_stacks < 1) throw ArgumentError("n_stacks must be positive");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    const int n_positive = static_cast<int>(std::lround(params.positive_rate * n_stacks));
    std::vector<int> order(n_stacks);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(params.seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    std::vector<bool> positive(n_stacks, false);
    for (int i = 0; i < n_positive; ++i) positive[order[i]] = true;

    Manifest manifest;
    manifest.params = params;
    manifest.params["n_stacks"] = n_stacks;
    for (int i = 0; i < n_stacks; ++i) {
        PhantomParams p = params;
        if (!positive[i]) p.min_lesions = p.max_lesions = 0;
        else p.min_lesions = std::max(1, p.min_lesions);
        p.max_lesions = std::max(p.max_lesions, p.min_lesions);
        const CtStack stack = generate_stack(p, static_cast<std::uint64_t>(i));
        save_stack(stack, out_dir / stack.stack_id);
        manifest.stacks.push_back({stack.stack_id, stack.positive() ? 1 : 0});
    }
    save_manifest(manifest, out_dir);
    return manifest;
}

}  // namespace patchseg
