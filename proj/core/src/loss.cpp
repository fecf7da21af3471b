#include "patchseg/loss.hpp"

#include <cmath>

#include "patchseg/error.hpp"

namespace patchseg {

namespace {
// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
}  // namespace

void LossConfig::validate() const {
    if (!(alpha > 0.0)) throw ArgumentError("loss alpha must be positive");
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

template <typename T>
double weighted_bce(std::span<const T> logits, std::span<const std::uint8_t> targets, const LossConfig& cfg,
                    std::span<T> grad) {
    cfg.validate();
    if (logits.size() != targets.size())
        throw ArgumentError("logits (" + std::to_string(logits.size()) + ") and targets (" +
                            std::to_string(targets.size()) + ") differ in size");
    if (!grad.empty() && grad.size() != logits.size()) throw ArgumentError("gradient buffer size mismatch");
    if (logits.empty()) throw ArgumentError("empty loss input");

    const double inv_n = 1.0 / static_cast<double>(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const std::uint8_t y = targets[i];
        if (y > 1) throw ArgumentError("targets must be binary");
        const double s = sigmoid(z);
        if (y == 1) {
            total += cfg.alpha * softplus(-z);
            if (!grad.empty()) grad[i] = static_cast<T>(cfg.alpha * (s - 1.0) * inv_n);
        } else {
            total += softplus(z);
            if (!grad.empty()) grad[i] = static_cast<T>(s * inv_n);
        }
    }
    return total * inv_n;
}

template double weighted_bce<float>(std::span<const float>, std::span<const std::uint8_t>, const LossConfig&,
                                    std::span<float>);
template double weighted_bce<double>(std::span<const double>, std::span<const std::uint8_t>, const LossConfig&,
                                     std::span<double>);

}  // namespace patchseg
