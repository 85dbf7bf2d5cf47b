// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pscal::nn {

/// Eigen picks where vectorized reductions start from the pointer address,
/// so buffers get a fixed alignment to keep results reproducible.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense NCHW float tensor.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    FloatBuffer data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    /// Elements per batch item.
    std::size_t item_size() const { return static_cast<std::size_t>(c) * h * w; }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    float& at(int i, int ch, int y, int x) { return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x]; }
    float at(int i, int ch, int y, int x) const { return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x]; }

    std::span<float> item(int i) { return {data.data() + i * item_size(), item_size()}; }
    std::span<const float> item(int i) const { return {data.data() + i * item_size(), item_size()}; }

    void fill(float v);
    std::string shape_string() const;
};

}  // namespace pscal::nn
