// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pscal/nn/layers.hpp"

namespace pscal::nn {

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8) and
/// bias correction.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    void step(double learning_rate);
    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<std::vector<float>> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace pscal::nn
