#include "patchseg/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "patchseg/error.hpp"

namespace patchseg {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, bool bias)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(kernel / 2), has_bias_(bias),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}) {
    if (has_bias_) bias_ = Parameter<T>(name + ".bias", {out_channels});
}

template <typename T>
void Conv2d<T>::init(std::mt19937_64& rng) {
    // Fan-in scaled normal (He) initialization.
    const double fan_in = static_cast<double>(in_) * kernel_ * kernel_;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : weight_.value) v = static_cast<T>(normal(rng));
    std::fill(bias_.value.begin(), bias_.value.end(), T{});
}

template <typename T>
void Conv2d<T>::collect(std::vector<Parameter<T>*>& params, std::vector<Parameter<T>*>&) {
    params.push_back(&weight_);
    if (has_bias_) params.push_back(&bias_);
}

template <typename T>
void Conv2d<T>::collect(std::vector<const Parameter<T>*>& all) const {
    all.push_back(&weight_);
    if (has_bias_) all.push_back(&bias_);
}

template <typename T>
void Conv2d<T>::im2col(const T* x, int h, int w, T* cols) const {
    const int ho = out_extent(h), wo = out_extent(w);
    const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < in_; ++ci) {
        const T* src = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
                T* row = cols + ((static_cast<std::size_t>(ci) * kernel_ + ky) * kernel_ + kx) * out_plane;
                for (int oy = 0; oy < ho; ++oy) {
                    T* dst = row + static_cast<std::size_t>(oy) * wo;
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, T{});
                        continue;
                    }
                    const T* line = src + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride_ - pad_ + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? line[ix] : T{};
                    }
                }
            }
    }
}

template <typename T>
void Conv2d<T>::col2im(const T* cols, int h, int w, T* x) const {
    const int ho = out_extent(h), wo = out_extent(w);
    const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < in_; ++ci) {
        T* dst = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
                const T* row = cols + ((static_cast<std::size_t>(ci) * kernel_ + ky) * kernel_ + kx) * out_plane;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = row + static_cast<std::size_t>(oy) * wo;
                    T* line = dst + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (ix >= 0 && ix < w) line[ix] += src[ox];
                    }
                }
            }
    }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
    if (x.c != in_)
        throw ShapeError(weight_.name + " expects " + std::to_string(in_) + " channels, got " + x.shape_string());
    input_ = x;
    const int ho = out_extent(x.h), wo = out_extent(x.w);
    Tensor<T> y(x.n, out_, ho, wo);
    const int rows = in_ * kernel_ * kernel_;
    const int cols_n = ho * wo;
    const bool direct = kernel_ == 1 && stride_ == 1;
    std::vector<T> cols(direct ? 0 : static_cast<std::size_t>(rows) * cols_n);
    ConstMatrixMap<T> weight(weight_.value.data(), out_, rows);
    for (int i = 0; i < x.n; ++i) {
        const T* src = x.sample(i);
        if (!direct) {
            im2col(src, x.h, x.w, cols.data());
            src = cols.data();
        }
        MatrixMap<T> out(y.sample(i), out_, cols_n);
        out.noalias() = weight * ConstMatrixMap<T>(src, rows, cols_n);
        if (has_bias_)
            for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
    }
    return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, bool want_input_grad) {
    const Tensor<T>& x = input_;
    const int rows = in_ * kernel_ * kernel_;
    const int cols_n = grad_out.h * grad_out.w;
    const bool direct = kernel_ == 1 && stride_ == 1;
    std::vector<T> cols(direct ? 0 : static_cast<std::size_t>(rows) * cols_n);
    std::vector<T> grad_cols(direct || !want_input_grad ? 0 : static_cast<std::size_t>(rows) * cols_n);
    Tensor<T> grad_in;
    if (want_input_grad) grad_in = Tensor<T>(x.n, x.c, x.h, x.w);

    ConstMatrixMap<T> weight(weight_.value.data(), out_, rows);
    MatrixMap<T> grad_weight(weight_.grad.data(), out_, rows);
    for (int i = 0; i < x.n; ++i) {
        const T* src = x.sample(i);
        if (!direct) {
            im2col(src, x.h, x.w, cols.data());
            src = cols.data();
        }
        ConstMatrixMap<T> dy(grad_out.sample(i), out_, cols_n);
        grad_weight.noalias() += dy * ConstMatrixMap<T>(src, rows, cols_n).transpose();
        if (has_bias_)
            for (int o = 0; o < out_; ++o) bias_.grad[o] += dy.row(o).sum();
        if (want_input_grad) {
            if (direct) {
                MatrixMap<T>(grad_in.sample(i), rows, cols_n).noalias() = weight.transpose() * dy;
            } else {
                MatrixMap<T>(grad_cols.data(), rows, cols_n).noalias() = weight.transpose() * dy;
                col2im(grad_cols.data(), x.h, x.w, grad_in.sample(i));
            }
        }
    }
    return grad_in;
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels)
    : channels_(channels),
      gamma_(name + ".gamma", {channels}),
      beta_(name + ".beta", {channels}),
      running_mean_(name + ".running_mean", {channels}, false),
      running_var_(name + ".running_var", {channels}, false) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T{1});
    std::fill(running_var_.value.begin(), running_var_.value.end(), T{1});
}

template <typename T>
void BatchNorm2d<T>::collect(std::vector<Parameter<T>*>& params, std::vector<Parameter<T>*>& buffers) {
    params.push_back(&gamma_);
    params.push_back(&beta_);
    buffers.push_back(&running_mean_);
    buffers.push_back(&running_var_);
}

template <typename T>
void BatchNorm2d<T>::collect(std::vector<const Parameter<T>*>& all) const {
    all.push_back(&gamma_);
    all.push_back(&beta_);
    all.push_back(&running_mean_);
    all.push_back(&running_var_);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, bool training) {
    if (x.c != channels_) throw ShapeError(gamma_.name + " channel mismatch: " + x.shape_string());
    last_training_ = training;
    normalized_ = Tensor<T>(x.n, x.c, x.h, x.w);
    Tensor<T> y(x.n, x.c, x.h, x.w);
    inv_std_.assign(channels_, T{});
    const std::size_t plane = x.plane();
    const double count = static_cast<double>(x.n) * plane;
    for (int ch = 0; ch < channels_; ++ch) {
        double mean, var;
        if (training) {
            double sum = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const T* p = x.channel(i, ch);
                for (std::size_t k = 0; k < plane; ++k) sum += p[k];
            }
            mean = sum / count;
            double sq = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const T* p = x.channel(i, ch);
                for (std::size_t k = 0; k < plane; ++k) sq += (p[k] - mean) * (p[k] - mean);
            }
            var = sq / count;
            const double unbiased = count > 1 ? var * count / (count - 1) : var;
            running_mean_.value[ch] = static_cast<T>((1 - kMomentum) * running_mean_.value[ch] + kMomentum * mean);
            running_var_.value[ch] = static_cast<T>((1 - kMomentum) * running_var_.value[ch] + kMomentum * unbiased);
        } else {
            mean = running_mean_.value[ch];
            var = running_var_.value[ch];
        }
        const T inv_std = static_cast<T>(1.0 / std::sqrt(var + kEps));
        const T m = static_cast<T>(mean);
        inv_std_[ch] = inv_std;
        const T g = gamma_.value[ch], b = beta_.value[ch];
        for (int i = 0; i < x.n; ++i) {
            const T* src = x.channel(i, ch);
            T* xn = normalized_.channel(i, ch);
            T* dst = y.channel(i, ch);
            for (std::size_t k = 0; k < plane; ++k) {
                xn[k] = (src[k] - m) * inv_std;
                dst[k] = g * xn[k] + b;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
    const Tensor<T>& xn = normalized_;
    Tensor<T> grad_in(xn.n, xn.c, xn.h, xn.w);
    const std::size_t plane = xn.plane();
    const double count = static_cast<double>(xn.n) * plane;
    for (int ch = 0; ch < channels_; ++ch) {
        double sum_dy = 0.0, sum_dy_xn = 0.0;
        for (int i = 0; i < xn.n; ++i) {
            const T* dy = grad_out.channel(i, ch);
            const T* x = xn.channel(i, ch);
            for (std::size_t k = 0; k < plane; ++k) {
                sum_dy += dy[k];
                sum_dy_xn += static_cast<double>(dy[k]) * x[k];
            }
        }
        gamma_.grad[ch] += static_cast<T>(sum_dy_xn);
        beta_.grad[ch] += static_cast<T>(sum_dy);
        const T scale = gamma_.value[ch] * inv_std_[ch];
        if (last_training_) {
            const T mean_dy = static_cast<T>(sum_dy / count);
            const T mean_dy_xn = static_cast<T>(sum_dy_xn / count);
            for (int i = 0; i < xn.n; ++i) {
                const T* dy = grad_out.channel(i, ch);
                const T* x = xn.channel(i, ch);
                T* dx = grad_in.channel(i, ch);
                for (std::size_t k = 0; k < plane; ++k) dx[k] = scale * (dy[k] - mean_dy - x[k] * mean_dy_xn);
            }
        } else {
            for (int i = 0; i < xn.n; ++i) {
                const T* dy = grad_out.channel(i, ch);
                T* dx = grad_in.channel(i, ch);
                for (std::size_t k = 0; k < plane; ++k) dx[k] = scale * dy[k];
            }
        }
    }
    return grad_in;
}

// ------------------------------------------------------------ ConvBnRelu

template <typename T>
ConvBnRelu<T>::ConvBnRelu(const std::string& name, int in_channels, int out_channels, int stride)
    : conv_(name + ".conv", in_channels, out_channels, 3, stride, false), bn_(name + ".bn", out_channels) {}

template <typename T>
Tensor<T> ConvBnRelu<T>::forward(const Tensor<T>& x, bool training) {
    Tensor<T> y = bn_.forward(conv_.forward(x), training);
    for (auto& v : y.data) v = v > T{} ? v : T{};
    activated_ = y;
    return y;
}

template <typename T>
Tensor<T> ConvBnRelu<T>::backward(const Tensor<T>& grad_out, bool want_input_grad) {
    Tensor<T> g = grad_out;
    for (std::size_t k = 0; k < g.data.size(); ++k)
        if (!(activated_.data[k] > T{})) g.data[k] = T{};
    return conv_.backward(bn_.backward(g), want_input_grad);
}

template <typename T>
void ConvBnRelu<T>::collect(std::vector<Parameter<T>*>& params, std::vector<Parameter<T>*>& buffers) {
    conv_.collect(params, buffers);
    bn_.collect(params, buffers);
}

template <typename T>
void ConvBnRelu<T>::collect(std::vector<const Parameter<T>*>& all) const {
    conv_.collect(all);
    bn_.collect(all);
}

// ---------------------------------------------------- shape-only layers

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
    Tensor<T> y(x.n, x.c, 2 * x.h, 2 * x.w);
    for (int i = 0; i < x.n; ++i)
        for (int ch = 0; ch < x.c; ++ch) {
            const T* src = x.channel(i, ch);
            T* dst = y.channel(i, ch);
            for (int r = 0; r < y.h; ++r)
                for (int c = 0; c < y.w; ++c) dst[r * y.w + c] = src[(r / 2) * x.w + c / 2];
        }
    return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out) {
    Tensor<T> g(grad_out.n, grad_out.c, grad_out.h / 2, grad_out.w / 2);
    for (int i = 0; i < g.n; ++i)
        for (int ch = 0; ch < g.c; ++ch) {
            const T* src = grad_out.channel(i, ch);
            T* dst = g.channel(i, ch);
            for (int r = 0; r < grad_out.h; ++r)
                for (int c = 0; c < grad_out.w; ++c) dst[(r / 2) * g.w + c / 2] += src[r * grad_out.w + c];
        }
    return g;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ShapeError("cannot concatenate " + a.shape_string() + " and " + b.shape_string());
    Tensor<T> y(a.n, a.c + b.c, a.h, a.w);
    for (int i = 0; i < a.n; ++i) {
        std::memcpy(y.sample(i), a.sample(i), a.sample_size() * sizeof(T));
        std::memcpy(y.sample(i) + a.sample_size(), b.sample(i), b.sample_size() * sizeof(T));
    }
    return y;
}

template <typename T>
void split_channels(const Tensor<T>& grad, int first_channels, Tensor<T>& grad_a, Tensor<T>& grad_b) {
    grad_a = Tensor<T>(grad.n, first_channels, grad.h, grad.w);
    grad_b = Tensor<T>(grad.n, grad.c - first_channels, grad.h, grad.w);
    for (int i = 0; i < grad.n; ++i) {
        std::memcpy(grad_a.sample(i), grad.sample(i), grad_a.sample_size() * sizeof(T));
        std::memcpy(grad_b.sample(i), grad.sample(i) + grad_a.sample_size(), grad_b.sample_size() * sizeof(T));
    }
}

namespace {
int reflect(int i, int extent) { return i < extent ? i : 2 * (extent - 1) - i; }
}  // namespace

template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, int bottom, int right) {
    if (bottom >= x.h || right >= x.w || bottom < 0 || right < 0)
        throw ShapeError("reflection padding must be smaller than the extent: " + x.shape_string());
    Tensor<T> y(x.n, x.c, x.h + bottom, x.w + right);
    for (int i = 0; i < x.n; ++i)
        for (int ch = 0; ch < x.c; ++ch) {
            const T* src = x.channel(i, ch);
            T* dst = y.channel(i, ch);
            for (int r = 0; r < y.h; ++r)
                for (int c = 0; c < y.w; ++c) dst[r * y.w + c] = src[reflect(r, x.h) * x.w + reflect(c, x.w)];
        }
    return y;
}

template <typename T>
Tensor<T> reflect_pad_backward(const Tensor<T>& grad, int h, int w) {
    Tensor<T> g(grad.n, grad.c, h, w);
    for (int i = 0; i < grad.n; ++i)
        for (int ch = 0; ch < grad.c; ++ch) {
            const T* src = grad.channel(i, ch);
            T* dst = g.channel(i, ch);
            for (int r = 0; r < grad.h; ++r)
                for (int c = 0; c < grad.w; ++c) dst[reflect(r, h) * w + reflect(c, w)] += src[r * grad.w + c];
        }
    return g;
}

template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& x, int h, int w) {
    if (h == x.h && w == x.w) return x;
    Tensor<T> y(x.n, x.c, h, w);
    for (int i = 0; i < x.n; ++i)
        for (int ch = 0; ch < x.c; ++ch)
            for (int r = 0; r < h; ++r)
                std::memcpy(y.channel(i, ch) + r * w, x.channel(i, ch) + r * x.w, w * sizeof(T));
    return y;
}

template <typename T>
Tensor<T> crop_spatial_backward(const Tensor<T>& grad, int padded_h, int padded_w) {
    if (grad.h == padded_h && grad.w == padded_w) return grad;
    Tensor<T> g(grad.n, grad.c, padded_h, padded_w);
    for (int i = 0; i < grad.n; ++i)
        for (int ch = 0; ch < grad.c; ++ch)
            for (int r = 0; r < grad.h; ++r)
                std::memcpy(g.channel(i, ch) + r * padded_w, grad.channel(i, ch) + r * grad.w, grad.w * sizeof(T));
    return g;
}

#define PATCHSEG_INSTANTIATE_LAYERS(T)                                                     \
    template class Conv2d<T>;                                                              \
    template class BatchNorm2d<T>;                                                         \
    template class ConvBnRelu<T>;                                                          \
    template Tensor<T> upsample2x(const Tensor<T>&);                                       \
    template Tensor<T> upsample2x_backward(const Tensor<T>&);                              \
    template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                \
    template void split_channels(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);           \
    template Tensor<T> reflect_pad(const Tensor<T>&, int, int);                            \
    template Tensor<T> reflect_pad_backward(const Tensor<T>&, int, int);                   \
    template Tensor<T> crop_spatial(const Tensor<T>&, int, int);                           \
    template Tensor<T> crop_spatial_backward(const Tensor<T>&, int, int);

PATCHSEG_INSTANTIATE_LAYERS(float)
PATCHSEG_INSTANTIATE_LAYERS(double)

}  // namespace patchseg
