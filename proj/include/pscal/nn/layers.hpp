// SPDX-License-Identifier: Apache-2.0
//
// Minimal CPU layers with hand-written backward passes. A layer caches
// what its backward pass needs only when forward() is called with
// train = true; backward() must follow the matching forward().
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pscal/nn/tensor.hpp"
#include "pscal/random.hpp"

namespace pscal::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<Parameter*> parameters() { return {}; }
    /// Output shape for a given input shape (n, c, h, w).
    virtual Tensor shape_of(const Tensor& x) const = 0;
};

/// 3x3 convolution, zero padding 1, stride 1 or 2.
class Conv2d : public Layer {
public:
    Conv2d(int in_channels, int out_channels, int stride, Rng& rng, float init_gain);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    Tensor shape_of(const Tensor& x) const override;

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int stride() const { return stride_; }

private:
    int in_, out_, stride_;
    Parameter weight_;  // (out, in * 9, 1, 1)
    Parameter bias_;    // (out, 1, 1, 1)
    Tensor input_;  // kept for backward; columns are rebuilt per chunk

    /// Items per GEMM so that a chunk of columns stays cache-resident.
    int chunk_items(int ho, int wo) const;
    void im2col(const Tensor& x, int first, int count, float* cols) const;
    void col2im(const float* cols, int first, int count, Tensor& dx) const;
};

class Linear : public Layer {
public:
    Linear(int in_features, int out_features, Rng& rng, float init_gain);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    Tensor shape_of(const Tensor& x) const override { return Tensor(x.n, out_, 1, 1); }

private:
    int in_, out_;
    Parameter weight_;  // (out, in, 1, 1)
    Parameter bias_;
    Tensor input_;
};

class LeakyRelu : public Layer {
public:
    explicit LeakyRelu(float slope = 0.1f) : slope_(slope) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    Tensor shape_of(const Tensor& x) const override { return Tensor(x.n, x.c, x.h, x.w); }

private:
    float slope_;
    std::vector<unsigned char> positive_;
};

/// log(1 + exp(x))
class Softplus : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    Tensor shape_of(const Tensor& x) const override { return Tensor(x.n, x.c, x.h, x.w); }

private:
    Tensor input_;
};

/// Scales the channel vector at every pixel to unit length.
class L2NormalizeChannels : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    Tensor shape_of(const Tensor& x) const override { return Tensor(x.n, x.c, x.h, x.w); }

private:
    Tensor output_;
    std::vector<float> norms_;
};

/// Nearest-neighbour 2x upsampling.
class Upsample2x : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    Tensor shape_of(const Tensor& x) const override { return Tensor(x.n, x.c, x.h * 2, x.w * 2); }
};

class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    template <class L, class... Args>
    L& add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);
    Tensor shape_of(const Tensor& x) const;
    /// Parameters named "<prefix>.<layer index>.weight|bias".
    std::vector<Parameter*> parameters(const std::string& prefix);
    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Appends a 3x3 conv followed by leaky ReLU (slope 0.1).
void add_conv_block(Sequential& seq, int in, int out, int stride, Rng& rng);

/// He initialization gain for a leaky ReLU of the given slope.
float leaky_gain(float slope);

// Set fusion ---------------------------------------------------------------

/// Element-wise maximum over consecutive groups of `group` items:
/// (B * group, C, H, W) -> (B, C, H, W). Ties resolve to the first item.
struct MaxFusion {
    Tensor forward(const Tensor& x, int group, bool train);
    /// Gradient w.r.t. the fused input, routed to the arg-max items.
    Tensor backward(const Tensor& dy);

    int group = 1;
    Tensor input_shape;
    std::vector<int> argmax;
};

/// Concatenates each item of `local` (B * group, C1, H, W) with its group's
/// `global` (B, C2, H, W) along channels.
Tensor concat_with_global(const Tensor& local, const Tensor& global, int group);
/// Splits a gradient of concat_with_global: d_local and d_global (summed
/// over each group).
void split_global_grad(const Tensor& d, int local_channels, int group, Tensor& d_local, Tensor& d_global);

Tensor add(const Tensor& a, const Tensor& b);

}  // namespace pscal::nn
