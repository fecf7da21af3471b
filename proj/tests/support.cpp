#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <unistd.h>

namespace patchseg::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("patchseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

CtStack random_stack(std::mt19937_64& rng, int depth, int size, bool with_mask, const std::string& id) {
    CtStack s;
    s.stack_id = id;
    s.frames = Volume<std::int16_t>(depth, size, size);
    std::uniform_int_distribution<int> hu(-1024, 3071);
    for (auto& v : s.frames.values()) v = static_cast<std::int16_t>(hu(rng));
    if (with_mask) {
        s.mask.emplace(depth, size, size);
        std::bernoulli_distribution bit(0.2);
        for (auto& v : s.mask->values()) v = bit(rng) ? 1 : 0;
    }
    return s;
}

CtStack constant_stack(int depth, int size, std::int16_t hu, const std::string& id) {
    CtStack s;
    s.stack_id = id;
    s.frames = Volume<std::int16_t>(depth, size, size, hu);
    s.mask.emplace(depth, size, size, std::uint8_t{0});
    return s;
}

PhantomParams small_phantom(int size, std::uint64_t seed) {
    PhantomParams p;
    p.size = size;
    p.min_depth = 3;
    p.max_depth = 5;
    p.min_lesion_radius = 3.0;
    p.max_lesion_radius = 6.0;
    p.seed = seed;
    return p;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double oracle_average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::int64_t positives = 0;
    for (auto l : labels) positives += l ? 1 : 0;
    double ap = 0.0;
    std::int64_t previous_tp = 0;
    for (double t : thresholds) {
        std::int64_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) (labels[i] ? tp : fp) += 1;
        if (tp != previous_tp) {
            const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            ap += static_cast<double>(tp - previous_tp) / static_cast<double>(positives) * precision;
        }
        previous_tp = tp;
    }
    return ap;
}

double oracle_roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    std::int64_t twice_wins = 0, positives = 0, negatives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i]) ++positives;
        else ++negatives;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) twice_wins += 2;
            else if (scores[i] == scores[j]) twice_wins += 1;
        }
    }
    return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

Tensor<float> ConstantLogitModel::forward(const Tensor<float>& input) {
    return Tensor<float>(input.n, 1, input.h, input.w, logit_);
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace patchseg::testing
