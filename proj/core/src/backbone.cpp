#include "patchseg/backbone.hpp"

#include "patchseg/layers.hpp"

namespace patchseg {

template <typename T>
Tensor<T> forward_any_size(Backbone<T>& net, const Tensor<T>& input) {
    const int ph = padded_extent(input.h, net.stride()), pw = padded_extent(input.w, net.stride());
    if (ph == input.h && pw == input.w) return net.forward(input);
    return crop_spatial(net.forward(reflect_pad(input, ph - input.h, pw - input.w)), input.h, input.w);
}

template <typename T>
Tensor<T> backward_any_size(Backbone<T>& net, const Tensor<T>& grad_logits, bool want_input_grad) {
    const int ph = padded_extent(grad_logits.h, net.stride()), pw = padded_extent(grad_logits.w, net.stride());
    if (ph == grad_logits.h && pw == grad_logits.w) return net.backward(grad_logits, want_input_grad);
    Tensor<T> g = net.backward(crop_spatial_backward(grad_logits, ph, pw), want_input_grad);
    if (!want_input_grad) return g;
    return reflect_pad_backward(g, grad_logits.h, grad_logits.w);
}

template Tensor<float> forward_any_size(Backbone<float>&, const Tensor<float>&);
template Tensor<double> forward_any_size(Backbone<double>&, const Tensor<double>&);
template Tensor<float> backward_any_size(Backbone<float>&, const Tensor<float>&, bool);
template Tensor<double> backward_any_size(Backbone<double>&, const Tensor<double>&, bool);

}  // namespace patchseg
