// SPDX-License-Identifier: Apache-2.0
#include "pscal/nn/adam.hpp"

#include <cmath>

namespace pscal::nn {

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Parameter* p : params_) {
        m_.emplace_back(p->value.size(), 0.0f);
        v_.emplace_back(p->value.size(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->grad.fill(0.0f);
}

void Adam::step(double learning_rate) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float step = static_cast<float>(learning_rate / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(eps_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& value = params_[k]->value.data;
        const auto& grad = params_[k]->grad.data;
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const float g = grad[i];
            m[i] = b1 * m[i] + (1.0f - b1) * g;
            v[i] = b2 * v[i] + (1.0f - b2) * g * g;
            value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
        }
    }
}

}  // namespace pscal::nn
