#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "patchseg/backbone.hpp"
#include "patchseg/preprocess.hpp"
#include "patchseg/stack.hpp"
#include "patchseg/synthdata.hpp"

namespace patchseg::testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

/// Uniform random stack with an optional random mask.
CtStack random_stack(std::mt19937_64& rng, int depth, int size, bool with_mask, const std::string& id = "rand");

/// Stack of constant HU with an explicit mask (all zero when mask is empty).
CtStack constant_stack(int depth, int size, std::int16_t hu, const std::string& id = "const");

/// Small phantom parameters for fast tests.
PhantomParams small_phantom(int size = 64, std::uint64_t seed = 1);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Threshold-sweep AP: walk every distinct score from high to low and add
/// recall increment times precision at that threshold.
double oracle_average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Pair-enumeration ROC AUC with ties counted one half.
double oracle_roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Model that ignores its input and returns one constant logit everywhere.
class ConstantLogitModel final : public Backbone<float> {
public:
    explicit ConstantLogitModel(float logit, int stride = 8) : logit_(logit), stride_(stride) {}
    Tensor<float> forward(const Tensor<float>& input) override;
    Tensor<float> backward(const Tensor<float>&, bool) override { return {}; }
    std::vector<Parameter<float>*> parameters() override { return {}; }
    void set_training(bool) override {}
    bool training() const override { return false; }
    bool trained() const override { return trained_; }
    bool is_translation_covariant() const override { return true; }
    int stride() const override { return stride_; }
    void set_trained(bool t) { trained_ = t; }

private:
    float logit_;
    int stride_;
    bool trained_ = true;
};

/// Relative error |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace patchseg::testing
