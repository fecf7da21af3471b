#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchseg/backbone.hpp"
#include "patchseg/layers.hpp"

namespace patchseg {

/// Channel width of the first stage; deeper stages use 2x and 4x.
struct NetPreset {
    std::string name;
    int width = 12;
};

/// "tiny" (8), "small" (12) or "base" (16). Throws ArgumentError otherwise.
NetPreset net_preset(const std::string& name);

/// Compact encoder-decoder FCN: three stride-2 stages (total stride 8),
/// batch normalization after every 3x3 convolution, nearest-neighbour
/// upsampling with skip concatenation, and a 1x1 logit head. The stem
/// divides the [0,255] input by 255.
template <typename T>
class ReferenceNet final : public Backbone<T> {
public:
    explicit ReferenceNet(const NetPreset& preset = net_preset("small"), std::uint64_t init_seed = 0);

    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> backward(const Tensor<T>& grad_logits, bool want_input_grad) override;
    std::vector<Parameter<T>*> parameters() override;
    void set_training(bool on) override { training_ = on; }
    bool training() const override { return training_; }
    bool trained() const override { return trained_; }
    bool is_translation_covariant() const override { return true; }
    int stride() const override { return 8; }

    void mark_trained() { trained_ = true; }
    const NetPreset& preset() const { return preset_; }

    /// Parameters followed by statistics buffers, in a fixed order.
    std::vector<Parameter<T>*> state();
    std::vector<const Parameter<T>*> state() const;
    std::size_t parameter_count() const;

    /// Same architecture and state in another scalar type.
    template <typename U>
    ReferenceNet<U> converted() const;

private:
    NetPreset preset_;
    bool training_ = false;
    bool trained_ = false;

    ConvBnRelu<T> enc1a_, enc1b_, enc2a_, enc2b_, enc3a_, enc3b_, bott_a_, bott_b_;
    ConvBnRelu<T> dec3_, dec2_, dec1_;
    Conv2d<T> head_;
    int enc1_channels_ = 0, enc2_channels_ = 0, enc3_channels_ = 0;
    int input_h_ = 0, input_w_ = 0;
};

}  // namespace patchseg
