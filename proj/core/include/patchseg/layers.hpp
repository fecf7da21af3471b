#pragma once

#include <random>
#include <string>
#include <vector>

#include "patchseg/tensor.hpp"

namespace patchseg {

/// Square-kernel 2-D convolution with zero padding of kernel/2 (im2col + GEMM).
template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, bool bias);

    Tensor<T> forward(const Tensor<T>& x);
    /// Accumulates parameter gradients; returns dL/dx when want_input_grad.
    Tensor<T> backward(const Tensor<T>& grad_out, bool want_input_grad);

    void init(std::mt19937_64& rng);
    void collect(std::vector<Parameter<T>*>& params, std::vector<Parameter<T>*>& buffers);
    void collect(std::vector<const Parameter<T>*>& all) const;

    int out_extent(int in_extent) const { return (in_extent + 2 * pad_ - kernel_) / stride_ + 1; }

private:
    void im2col(const T* x, int h, int w, T* cols) const;
    void col2im(const T* cols, int h, int w, T* x) const;

    int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
    bool has_bias_ = false;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

/// Per-channel batch normalization. Training mode normalizes with batch
/// statistics and updates running estimates; evaluation mode uses the
/// running estimates.
template <typename T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(const std::string& name, int channels);

    Tensor<T> forward(const Tensor<T>& x, bool training);
    Tensor<T> backward(const Tensor<T>& grad_out);

    void collect(std::vector<Parameter<T>*>& params, std::vector<Parameter<T>*>& buffers);
    void collect(std::vector<const Parameter<T>*>& all) const;

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

private:
    int channels_ = 0;
    bool last_training_ = false;
    Parameter<T> gamma_, beta_, running_mean_, running_var_;
    Tensor<T> normalized_;
    std::vector<T> inv_std_;
};

/// conv3x3 (no bias) -> batch norm -> ReLU.
template <typename T>
class ConvBnRelu {
public:
    ConvBnRelu() = default;
    ConvBnRelu(const std::string& name, int in_channels, int out_channels, int stride);

    Tensor<T> forward(const Tensor<T>& x, bool training);
    Tensor<T> backward(const Tensor<T>& grad_out, bool want_input_grad);

    void init(std::mt19937_64& rng) { conv_.init(rng); }
    void collect(std::vector<Parameter<T>*>& params, std::vector<Parameter<T>*>& buffers);
    void collect(std::vector<const Parameter<T>*>& all) const;

private:
    Conv2d<T> conv_;
    BatchNorm2d<T> bn_;
    Tensor<T> activated_;
};

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out);

/// Channel concatenation [a, b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
void split_channels(const Tensor<T>& grad, int first_channels, Tensor<T>& grad_a, Tensor<T>& grad_b);

/// Reflection-pad the bottom and right edges.
template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, int bottom, int right);
template <typename T>
Tensor<T> reflect_pad_backward(const Tensor<T>& grad, int h, int w);

/// Top-left h x w window of every plane.
template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& x, int h, int w);
template <typename T>
Tensor<T> crop_spatial_backward(const Tensor<T>& grad, int padded_h, int padded_w);

}  // namespace patchseg
