#include "patchseg/reference_net.hpp"

#include "patchseg/error.hpp"

namespace patchseg {

NetPreset net_preset(const std::string& name) {
    if (name == "tiny") return {name, 8};
    if (name == "small") return {name, 12};
    if (name == "base") return {name, 16};
    throw ArgumentError("unknown network preset '" + name + "'");
}

template <typename T>
ReferenceNet<T>::ReferenceNet(const NetPreset& preset, std::uint64_t init_seed) : preset_(preset) {
    const int w = preset.width;
    if (w < 1) throw ArgumentError("network width must be positive");
    enc1_channels_ = w;
    enc2_channels_ = 2 * w;
    enc3_channels_ = 4 * w;
    enc1a_ = ConvBnRelu<T>("enc1a", 3, w, 1);
    enc1b_ = ConvBnRelu<T>("enc1b", w, w, 1);
    enc2a_ = ConvBnRelu<T>("enc2a", w, 2 * w, 2);
    enc2b_ = ConvBnRelu<T>("enc2b", 2 * w, 2 * w, 1);
    enc3a_ = ConvBnRelu<T>("enc3a", 2 * w, 4 * w, 2);
    enc3b_ = ConvBnRelu<T>("enc3b", 4 * w, 4 * w, 1);
    bott_a_ = ConvBnRelu<T>("bottleneck_a", 4 * w, 4 * w, 2);
    bott_b_ = ConvBnRelu<T>("bottleneck_b", 4 * w, 4 * w, 1);
    dec3_ = ConvBnRelu<T>("dec3", 8 * w, 2 * w, 1);
    dec2_ = ConvBnRelu<T>("dec2", 4 * w, w, 1);
    dec1_ = ConvBnRelu<T>("dec1", 2 * w, w, 1);
    head_ = Conv2d<T>("head", w, 1, 1, 1, true);

    std::mt19937_64 rng(init_seed);
    for (auto* block : {&enc1a_, &enc1b_, &enc2a_, &enc2b_, &enc3a_, &enc3b_, &bott_a_, &bott_b_, &dec3_, &dec2_, &dec1_})
        block->init(rng);
    head_.init(rng);
}

template <typename T>
Tensor<T> ReferenceNet<T>::forward(const Tensor<T>& input) {
    if (input.c != 3) throw ShapeError("reference net expects 3 input channels, got " + input.shape_string());
    if (input.h % stride() != 0 || input.w % stride() != 0)
        throw ShapeError("input " + input.shape_string() + " is not a multiple of stride " + std::to_string(stride()));
    input_h_ = input.h;
    input_w_ = input.w;

    Tensor<T> x = input;
    const T scale = T{1} / T{255};
    for (auto& v : x.data) v *= scale;

    const bool tr = training_;
    Tensor<T> e1 = enc1b_.forward(enc1a_.forward(x, tr), tr);
    Tensor<T> e2 = enc2b_.forward(enc2a_.forward(e1, tr), tr);
    Tensor<T> e3 = enc3b_.forward(enc3a_.forward(e2, tr), tr);
    Tensor<T> b = bott_b_.forward(bott_a_.forward(e3, tr), tr);
    Tensor<T> d3 = dec3_.forward(concat_channels(upsample2x(b), e3), tr);
    Tensor<T> d2 = dec2_.forward(concat_channels(upsample2x(d3), e2), tr);
    Tensor<T> d1 = dec1_.forward(concat_channels(upsample2x(d2), e1), tr);
    if (tr) trained_ = true;
    return head_.forward(d1);
}

template <typename T>
Tensor<T> ReferenceNet<T>::backward(const Tensor<T>& grad_logits, bool want_input_grad) {
    if (grad_logits.c != 1 || grad_logits.h != input_h_ || grad_logits.w != input_w_)
        throw ShapeError("logit gradient " + grad_logits.shape_string() + " does not match the last forward");
    Tensor<T> up, skip;

    Tensor<T> g = head_.backward(grad_logits, true);
    g = dec1_.backward(g, true);
    split_channels(g, g.c - enc1_channels_, up, skip);
    Tensor<T> g_e1 = skip;
    g = dec2_.backward(upsample2x_backward(up), true);
    split_channels(g, g.c - enc2_channels_, up, skip);
    Tensor<T> g_e2 = skip;
    g = dec3_.backward(upsample2x_backward(up), true);
    split_channels(g, g.c - enc3_channels_, up, skip);
    Tensor<T> g_e3 = skip;

    g = bott_a_.backward(bott_b_.backward(upsample2x_backward(up), true), true);
    for (std::size_t k = 0; k < g.data.size(); ++k) g_e3.data[k] += g.data[k];
    g = enc3a_.backward(enc3b_.backward(g_e3, true), true);
    for (std::size_t k = 0; k < g.data.size(); ++k) g_e2.data[k] += g.data[k];
    g = enc2a_.backward(enc2b_.backward(g_e2, true), true);
    for (std::size_t k = 0; k < g.data.size(); ++k) g_e1.data[k] += g.data[k];
    g = enc1a_.backward(enc1b_.backward(g_e1, true), want_input_grad);
    if (!want_input_grad) return {};
    const T scale = T{1} / T{255};
    for (auto& v : g.data) v *= scale;
    return g;
}

template <typename T>
std::vector<Parameter<T>*> ReferenceNet<T>::parameters() {
    std::vector<Parameter<T>*> params, buffers;
    for (auto* block : {&enc1a_, &enc1b_, &enc2a_, &enc2b_, &enc3a_, &enc3b_, &bott_a_, &bott_b_, &dec3_, &dec2_, &dec1_})
        block->collect(params, buffers);
    head_.collect(params, buffers);
    return params;
}

template <typename T>
std::vector<Parameter<T>*> ReferenceNet<T>::state() {
    std::vector<Parameter<T>*> params, buffers;
    for (auto* block : {&enc1a_, &enc1b_, &enc2a_, &enc2b_, &enc3a_, &enc3b_, &bott_a_, &bott_b_, &dec3_, &dec2_, &dec1_})
        block->collect(params, buffers);
    head_.collect(params, buffers);
    params.insert(params.end(), buffers.begin(), buffers.end());
    return params;
}

template <typename T>
std::vector<const Parameter<T>*> ReferenceNet<T>::state() const {
    auto mutable_state = const_cast<ReferenceNet<T>*>(this)->state();
    return {mutable_state.begin(), mutable_state.end()};
}

template <typename T>
std::size_t ReferenceNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : const_cast<ReferenceNet<T>*>(this)->parameters()) n += p->value.size();
    return n;
}

template <typename T>
template <typename U>
ReferenceNet<U> ReferenceNet<T>::converted() const {
    ReferenceNet<U> out(preset_);
    const auto src = state();
    const auto dst = out.state();
    for (std::size_t i = 0; i < src.size(); ++i)
        for (std::size_t k = 0; k < src[i]->value.size(); ++k) dst[i]->value[k] = static_cast<U>(src[i]->value[k]);
    if (trained_) out.mark_trained();
    out.set_training(training_);
    return out;
}

template class ReferenceNet<float>;
template class ReferenceNet<double>;
template ReferenceNet<double> ReferenceNet<float>::converted<double>() const;
template ReferenceNet<float> ReferenceNet<double>::converted<float>() const;
template ReferenceNet<float> ReferenceNet<float>::converted<float>() const;

}  // namespace patchseg
