#pragma once

#include <vector>

#include "patchseg/tensor.hpp"

namespace patchseg {

/// Contract every segmentation network plugged into training and inference
/// must satisfy: N x 3 x S x S inputs in windowed units ([0,255]) map to
/// N x 1 x S x S logits for every S that is a multiple of stride().
template <typename T>
class Backbone {
public:
    virtual ~Backbone() = default;

    /// Throws ShapeError when S is not a multiple of stride().
    virtual Tensor<T> forward(const Tensor<T>& input) = 0;
    /// Back-propagate dL/dlogits through the last forward. Parameter
    /// gradients accumulate; the input gradient is returned only when
    /// requested (empty tensor otherwise).
    virtual Tensor<T> backward(const Tensor<T>& grad_logits, bool want_input_grad) = 0;

    virtual std::vector<Parameter<T>*> parameters() = 0;
    virtual void zero_grad() {
        for (auto* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), T{});
    }

    virtual void set_training(bool on) = 0;
    virtual bool training() const = 0;
    /// False for a freshly initialized network that has neither taken a
    /// training step nor been restored from a checkpoint.
    virtual bool trained() const = 0;
    virtual bool is_translation_covariant() const = 0;
    virtual int stride() const = 0;
};

/// Smallest multiple of stride that is >= extent.
inline int padded_extent(int extent, int stride) { return (extent + stride - 1) / stride * stride; }

/// Forward for arbitrary square sizes: inputs are reflection-padded on the
/// bottom/right to the next multiple of the stride and the logits are
/// cropped back to the input extent.
template <typename T>
Tensor<T> forward_any_size(Backbone<T>& net, const Tensor<T>& input);

/// Backward matching forward_any_size; returns dL/dinput at the original
/// extent when requested.
template <typename T>
Tensor<T> backward_any_size(Backbone<T>& net, const Tensor<T>& grad_logits, bool want_input_grad);

}  // namespace patchseg
