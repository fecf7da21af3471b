#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace patchseg {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T{})
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t sample_size() const { return c * plane(); }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    T* sample(int i) { return data.data() + i * sample_size(); }
    const T* sample(int i) const { return data.data() + i * sample_size(); }
    T* channel(int i, int ch) { return sample(i) + ch * plane(); }
    const T* channel(int i, int ch) const { return sample(i) + ch * plane(); }
    T& at(int i, int ch, int y, int x) { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }
    const T& at(int i, int ch, int y, int x) const { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    std::string shape_string() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

/// Named trainable tensor (or statistics buffer, in which case grad stays empty).
template <typename T>
struct Parameter {
    std::string name;
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;

    Parameter() = default;
    Parameter(std::string name_, std::vector<int> shape_, bool trainable = true) : name(std::move(name_)), shape(std::move(shape_)) {
        std::size_t count = 1;
        for (int s : shape) count *= static_cast<std::size_t>(s);
        value.assign(count, T{});
        if (trainable) grad.assign(count, T{});
    }
};

}  // namespace patchseg
