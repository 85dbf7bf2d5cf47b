// SPDX-License-Identifier: Apache-2.0
#include "pscal/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pscal/error.hpp"

namespace pscal::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void init_normal(Tensor& t, Rng& rng, double stddev) {
    for (float& v : t.data) v = static_cast<float>(standard_normal(rng) * stddev);
}

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

}  // namespace

void Tensor::fill(float v) { std::fill(data.begin(), data.end(), v); }

std::string Tensor::shape_string() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) + ")";
}

float leaky_gain(float slope) { return std::sqrt(2.0f / (1.0f + slope * slope)); }

// Conv2d --------------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int stride, Rng& rng, float init_gain)
    : in_(in_channels), out_(out_channels), stride_(stride) {
    require(in_channels > 0 && out_channels > 0, "conv channels must be positive");
    require(stride == 1 || stride == 2, "conv stride must be 1 or 2");
    weight_.value = Tensor(out_, in_ * 9, 1, 1);
    weight_.grad = Tensor(out_, in_ * 9, 1, 1);
    bias_.value = Tensor(out_, 1, 1, 1);
    bias_.grad = Tensor(out_, 1, 1, 1);
    init_normal(weight_.value, rng, init_gain / std::sqrt(static_cast<double>(in_ * 9)));
}

Tensor Conv2d::shape_of(const Tensor& x) const {
    return Tensor(x.n, out_, (x.h - 1) / stride_ + 1, (x.w - 1) / stride_ + 1);
}

int Conv2d::chunk_items(int ho, int wo) const {
    constexpr std::size_t kTargetFloats = 96 * 1024;
    const std::size_t per_item = static_cast<std::size_t>(in_) * 9 * ho * wo;
    return static_cast<int>(std::max<std::size_t>(1, kTargetFloats / per_item));
}

void Conv2d::im2col(const Tensor& x, int first, int count, float* cols) const {
    const int H = x.h, W = x.w, s = stride_;
    const int ho = (H - 1) / s + 1, wo = (W - 1) / s + 1;
    const std::size_t P = static_cast<std::size_t>(ho) * wo;
    const std::size_t NP = P * count;
    for (int c = 0; c < in_; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                float* row = cols + ((static_cast<std::size_t>(c) * 3 + ky) * 3 + kx) * NP;
                for (int n = 0; n < count; ++n) {
                    const float* src = x.data.data() + (static_cast<std::size_t>(first + n) * in_ + c) * H * W;
                    float* dst = row + n * P;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s + ky - 1;
                        float* d = dst + static_cast<std::size_t>(oy) * wo;
                        if (iy < 0 || iy >= H) {
                            std::fill(d, d + wo, 0.0f);
                            continue;
                        }
                        const float* srow = src + static_cast<std::size_t>(iy) * W;
                        if (s == 1) {
                            d[0] = kx == 0 ? 0.0f : srow[kx - 1];
                            std::memcpy(d + 1, srow + kx, (wo - 2) * sizeof(float));
                            d[wo - 1] = kx == 2 ? 0.0f : srow[wo - 2 + kx];
                        } else {
                            const int hi = std::min(wo, (W - kx) / 2 + 1);
                            int ox = 0;
                            if (kx == 0) d[ox++] = 0.0f;
                            for (; ox < hi; ++ox) d[ox] = srow[2 * ox + kx - 1];
                            for (; ox < wo; ++ox) d[ox] = 0.0f;
                        }
                    }
                }
            }
}

void Conv2d::col2im(const float* cols, int first, int count, Tensor& dx) const {
    const int H = dx.h, W = dx.w, s = stride_;
    const int ho = (H - 1) / s + 1, wo = (W - 1) / s + 1;
    const std::size_t P = static_cast<std::size_t>(ho) * wo;
    const std::size_t NP = P * count;
    for (int c = 0; c < in_; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const float* row = cols + ((static_cast<std::size_t>(c) * 3 + ky) * 3 + kx) * NP;
                for (int n = 0; n < count; ++n) {
                    float* dst = dx.data.data() + (static_cast<std::size_t>(first + n) * in_ + c) * H * W;
                    const float* src = row + n * P;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        float* drow = dst + static_cast<std::size_t>(iy) * W;
                        const float* srow = src + static_cast<std::size_t>(oy) * wo;
                        // ix = s * ox + kx - 1 must lie in [0, W)
                        const int lo = kx == 0 ? 1 : 0;
                        const int hi = std::min(wo, (W - kx) / s + 1);
                        for (int ox = lo; ox < hi; ++ox) drow[s * ox + kx - 1] += srow[ox];
                    }
                }
            }
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    if (x.c != in_) throw DomainError("conv input has " + std::to_string(x.c) + " channels, expected " + std::to_string(in_));
    if (x.w < 2) throw DomainError("conv input must be at least 2 pixels wide");
    const int ho = (x.h - 1) / stride_ + 1, wo = (x.w - 1) / stride_ + 1;
    const std::size_t P = static_cast<std::size_t>(ho) * wo;
    const std::size_t K = static_cast<std::size_t>(in_) * 9;
    const int chunk = chunk_items(ho, wo);

    Tensor out(x.n, out_, ho, wo);
    FloatBuffer cols(K * P * std::min(chunk, x.n));
    RowMat y;
    ConstMapMat wmat(weight_.value.data.data(), out_, static_cast<Eigen::Index>(K));
    for (int first = 0; first < x.n; first += chunk) {
        const int count = std::min(chunk, x.n - first);
        const std::size_t NP = P * count;
        im2col(x, first, count, cols.data());
        ConstMapMat cmat(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(NP));
        y.noalias() = wmat * cmat;
        for (int n = 0; n < count; ++n)
            for (int o = 0; o < out_; ++o) {
                const float b = bias_.value.data[o];
                const float* src = y.data() + static_cast<std::size_t>(o) * NP + n * P;
                float* dst = out.data.data() + (static_cast<std::size_t>(first + n) * out_ + o) * P;
                for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + b;
            }
    }
    if (train) input_ = x;
    else input_ = Tensor();
    return out;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const int N = input_.n, s = stride_;
    const int ho = (input_.h - 1) / s + 1, wo = (input_.w - 1) / s + 1;
    if (input_.empty() || dy.n != N || dy.c != out_ || dy.h != ho || dy.w != wo)
        throw DomainError("conv backward without a matching training forward");
    const std::size_t P = static_cast<std::size_t>(ho) * wo;
    const std::size_t K = static_cast<std::size_t>(in_) * 9;
    const int chunk = chunk_items(ho, wo);

    Tensor dx(N, in_, input_.h, input_.w);
    FloatBuffer cols(K * P * std::min(chunk, N));
    RowMat g, dcols;
    ConstMapMat wmat(weight_.value.data.data(), out_, static_cast<Eigen::Index>(K));
    MapMat dw(weight_.grad.data.data(), out_, static_cast<Eigen::Index>(K));
    Eigen::Map<Eigen::VectorXf> db(bias_.grad.data.data(), out_);
    for (int first = 0; first < N; first += chunk) {
        const int count = std::min(chunk, N - first);
        const std::size_t NP = P * count;
        g.resize(out_, static_cast<Eigen::Index>(NP));
        for (int n = 0; n < count; ++n)
            for (int o = 0; o < out_; ++o)
                std::memcpy(g.data() + static_cast<std::size_t>(o) * NP + n * P,
                            dy.data.data() + (static_cast<std::size_t>(first + n) * out_ + o) * P, P * sizeof(float));
        im2col(input_, first, count, cols.data());
        ConstMapMat cmat(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(NP));
        dw.noalias() += g * cmat.transpose();
        db += g.rowwise().sum();
        dcols.noalias() = wmat.transpose() * g;
        col2im(dcols.data(), first, count, dx);
    }
    input_ = Tensor();
    return dx;
}

// Linear --------------------------------------------------------------------

Linear::Linear(int in_features, int out_features, Rng& rng, float init_gain) : in_(in_features), out_(out_features) {
    require(in_features > 0 && out_features > 0, "linear sizes must be positive");
    weight_.value = Tensor(out_, in_, 1, 1);
    weight_.grad = Tensor(out_, in_, 1, 1);
    bias_.value = Tensor(out_, 1, 1, 1);
    bias_.grad = Tensor(out_, 1, 1, 1);
    init_normal(weight_.value, rng, init_gain / std::sqrt(static_cast<double>(in_)));
}

Tensor Linear::forward(const Tensor& x, bool train) {
    if (static_cast<int>(x.item_size()) != in_)
        throw DomainError("linear input has " + std::to_string(x.item_size()) + " features, expected " + std::to_string(in_));
    ConstMapMat xm(x.data.data(), x.n, in_);
    ConstMapMat wm(weight_.value.data.data(), out_, in_);
    Tensor y(x.n, out_, 1, 1);
    MapMat ym(y.data.data(), x.n, out_);
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const Eigen::RowVectorXf> b(bias_.value.data.data(), out_);
    ym.rowwise() += b;
    if (train) input_ = x;
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    if (input_.empty() || dy.n != input_.n || static_cast<int>(dy.item_size()) != out_)
        throw DomainError("linear backward without a matching training forward");
    ConstMapMat xm(input_.data.data(), input_.n, in_);
    ConstMapMat gm(dy.data.data(), dy.n, out_);
    MapMat dw(weight_.grad.data.data(), out_, in_);
    dw.noalias() += gm.transpose() * xm;
    Eigen::Map<Eigen::RowVectorXf> db(bias_.grad.data.data(), out_);
    db += gm.colwise().sum();
    Tensor dx(input_.n, input_.c, input_.h, input_.w);
    MapMat dxm(dx.data.data(), input_.n, in_);
    ConstMapMat wm(weight_.value.data.data(), out_, in_);
    dxm.noalias() = gm * wm;
    input_ = Tensor();
    return dx;
}

// Activations ---------------------------------------------------------------

Tensor LeakyRelu::forward(const Tensor& x, bool train) {
    Tensor y = x;
    if (train) positive_.resize(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool pos = y.data[i] > 0.0f;
        if (!pos) y.data[i] *= slope_;
        if (train) positive_[i] = pos;
    }
    return y;
}

Tensor LeakyRelu::backward(const Tensor& dy) {
    if (positive_.size() != dy.size()) throw DomainError("leaky relu backward without a matching forward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!positive_[i]) dx.data[i] *= slope_;
    return dx;
}

Tensor Softplus::forward(const Tensor& x, bool train) {
    Tensor y = x;
    for (float& v : y.data) v = v > 20.0f ? v : std::log1p(std::exp(v));
    if (train) input_ = x;
    return y;
}

Tensor Softplus::backward(const Tensor& dy) {
    if (!input_.same_shape(dy)) throw DomainError("softplus backward without a matching forward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= 1.0f / (1.0f + std::exp(-input_.data[i]));
    return dx;
}

Tensor L2NormalizeChannels::forward(const Tensor& x, bool train) {
    Tensor y = x;
    const std::size_t P = x.plane();
    std::vector<float> norms(static_cast<std::size_t>(x.n) * P);
    for (int n = 0; n < x.n; ++n)
        for (std::size_t p = 0; p < P; ++p) {
            double s = 0.0;
            for (int c = 0; c < x.c; ++c) {
                const double v = x.data[(static_cast<std::size_t>(n) * x.c + c) * P + p];
                s += v * v;
            }
            const float len = static_cast<float>(std::max(std::sqrt(s), 1e-12));
            norms[n * P + p] = len;
            for (int c = 0; c < x.c; ++c) y.data[(static_cast<std::size_t>(n) * x.c + c) * P + p] /= len;
        }
    if (train) {
        output_ = y;
        norms_ = std::move(norms);
    }
    return y;
}

Tensor L2NormalizeChannels::backward(const Tensor& dy) {
    if (!output_.same_shape(dy)) throw DomainError("normalize backward without a matching forward");
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t P = dy.plane();
    for (int n = 0; n < dy.n; ++n)
        for (std::size_t p = 0; p < P; ++p) {
            double dot = 0.0;
            for (int c = 0; c < dy.c; ++c) {
                const std::size_t i = (static_cast<std::size_t>(n) * dy.c + c) * P + p;
                dot += static_cast<double>(output_.data[i]) * dy.data[i];
            }
            const float len = norms_[n * P + p];
            for (int c = 0; c < dy.c; ++c) {
                const std::size_t i = (static_cast<std::size_t>(n) * dy.c + c) * P + p;
                dx.data[i] = static_cast<float>((dy.data[i] - output_.data[i] * dot) / len);
            }
        }
    return dx;
}

Tensor Upsample2x::forward(const Tensor& x, bool) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) y.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
    return y;
}

Tensor Upsample2x::backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int n = 0; n < dy.n; ++n)
        for (int c = 0; c < dy.c; ++c)
            for (int yy = 0; yy < dy.h; ++yy)
                for (int xx = 0; xx < dy.w; ++xx) dx.at(n, c, yy / 2, xx / 2) += dy.at(n, c, yy, xx);
    return dx;
}

// Sequential ----------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train);
    return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

Tensor Sequential::shape_of(const Tensor& x) const {
    Tensor cur(x.n, x.c, x.h, x.w);
    cur.data.clear();
    for (const auto& l : layers_) {
        Tensor next = l->shape_of(cur);
        next.data.clear();
        cur = std::move(next);
    }
    return cur;
}

std::vector<Parameter*> Sequential::parameters(const std::string& prefix) {
    std::vector<Parameter*> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto ps = layers_[i]->parameters();
        for (std::size_t k = 0; k < ps.size(); ++k) {
            ps[k]->name = prefix + "." + std::to_string(i) + (k == 0 ? ".weight" : ".bias");
            out.push_back(ps[k]);
        }
    }
    return out;
}

void add_conv_block(Sequential& seq, int in, int out, int stride, Rng& rng) {
    seq.add<Conv2d>(in, out, stride, rng, leaky_gain(0.1f));
    seq.add<LeakyRelu>(0.1f);
}

// Fusion --------------------------------------------------------------------

Tensor MaxFusion::forward(const Tensor& x, int g, bool train) {
    if (g < 1 || x.n % g != 0) throw DomainError("fusion group size does not divide the batch");
    const int B = x.n / g;
    const std::size_t item = x.item_size();
    Tensor y(B, x.c, x.h, x.w);
    std::vector<int> arg(train ? y.size() : 0);
    for (int b = 0; b < B; ++b) {
        float* dst = y.data.data() + b * item;
        std::memcpy(dst, x.data.data() + static_cast<std::size_t>(b) * g * item, item * sizeof(float));
        for (int k = 1; k < g; ++k) {
            const float* src = x.data.data() + (static_cast<std::size_t>(b) * g + k) * item;
            for (std::size_t e = 0; e < item; ++e)
                if (src[e] > dst[e]) {
                    dst[e] = src[e];
                    if (train) arg[b * item + e] = k;
                }
        }
    }
    if (train) {
        group = g;
        input_shape = Tensor();
        input_shape.n = x.n;
        input_shape.c = x.c;
        input_shape.h = x.h;
        input_shape.w = x.w;
        argmax = std::move(arg);
    }
    return y;
}

Tensor MaxFusion::backward(const Tensor& dy) {
    if (argmax.size() != dy.size()) throw DomainError("fusion backward without a matching forward");
    Tensor dx(input_shape.n, input_shape.c, input_shape.h, input_shape.w);
    const std::size_t item = dy.item_size();
    for (int b = 0; b < dy.n; ++b)
        for (std::size_t e = 0; e < item; ++e) {
            const std::size_t o = b * item + e;
            dx.data[(static_cast<std::size_t>(b) * group + argmax[o]) * item + e] = dy.data[o];
        }
    return dx;
}

Tensor concat_with_global(const Tensor& local, const Tensor& global, int group) {
    if (local.n != global.n * group || local.h != global.h || local.w != global.w)
        throw DomainError("local/global feature shapes are incompatible");
    Tensor out(local.n, local.c + global.c, local.h, local.w);
    const std::size_t li = local.item_size(), gi = global.item_size();
    for (int i = 0; i < local.n; ++i) {
        float* dst = out.data.data() + i * (li + gi);
        std::memcpy(dst, local.data.data() + i * li, li * sizeof(float));
        std::memcpy(dst + li, global.data.data() + (i / group) * gi, gi * sizeof(float));
    }
    return out;
}

void split_global_grad(const Tensor& d, int local_channels, int group, Tensor& d_local, Tensor& d_global) {
    const int gc = d.c - local_channels;
    d_local = Tensor(d.n, local_channels, d.h, d.w);
    d_global = Tensor(d.n / group, gc, d.h, d.w);
    const std::size_t li = d_local.item_size(), gi = d_global.item_size();
    for (int i = 0; i < d.n; ++i) {
        const float* src = d.data.data() + i * (li + gi);
        std::memcpy(d_local.data.data() + i * li, src, li * sizeof(float));
        float* g = d_global.data.data() + (i / group) * gi;
        for (std::size_t e = 0; e < gi; ++e) g[e] += src[li + e];
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DomainError("tensor shapes differ in add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

}  // namespace pscal::nn
