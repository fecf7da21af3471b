#pragma once

#include <cstdint>
#include <span>

namespace patchseg {

struct LossConfig {
    double alpha = 3.0;  // weight on positive-pixel terms

    void validate() const;
};

/// Class-reweighted binary cross-entropy on logits:
///   mean_i [ alpha * y_i * -log(sigmoid(z_i)) + (1 - y_i) * -log(1 - sigmoid(z_i)) ]
/// When grad is non-empty it receives dLoss/dz_i.
template <typename T>
double weighted_bce(std::span<const T> logits, std::span<const std::uint8_t> targets, const LossConfig& cfg,
                    std::span<T> grad = {});

double sigmoid(double z);

}  // namespace patchseg
