// SPDX-License-Identifier: Apache-2.0
#include "pscal/losses.hpp"

#include <algorithm>
#include <cmath>

#include "pscal/error.hpp"

namespace pscal::losses {

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) throw DomainError("softmax of an empty vector");
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double s = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) s += p[i] = std::exp(scores[i] - mx);
    for (double& v : p) v /= s;
    return p;
}

double cross_entropy(std::span<const double> scores, int target, std::span<double> grad) {
    if (target < 0 || target >= static_cast<int>(scores.size())) throw DomainError("class index out of range");
    const double mx = *std::max_element(scores.begin(), scores.end());
    double s = 0.0;
    for (double v : scores) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    if (!grad.empty()) {
        if (grad.size() != scores.size()) throw DomainError("gradient buffer has the wrong size");
        for (std::size_t i = 0; i < scores.size(); ++i) grad[i] = std::exp(scores[i] - lse);
        grad[target] -= 1.0;
    }
    return lse - scores[target];
}

ClassificationLoss light_classification_loss(std::span<const LightingScores> scores,
                                             std::span<const lightspace::LightingClass> targets,
                                             const LossWeights& weights) {
    if (scores.empty() || scores.size() != targets.size())
        throw DomainError("need one target per prediction and at least one prediction");
    ClassificationLoss out;
    out.grad.resize(scores.size());
    const double inv_q = 1.0 / static_cast<double>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const LightingScores& s = scores[i];
        LightingScores& g = out.grad[i];
        g.azimuth.resize(s.azimuth.size());
        g.elevation.resize(s.elevation.size());
        g.intensity.resize(s.intensity.size());
        const double ca = cross_entropy(s.azimuth, targets[i].azimuth, g.azimuth);
        const double ce = cross_entropy(s.elevation, targets[i].elevation, g.elevation);
        const double ci = cross_entropy(s.intensity, targets[i].intensity, g.intensity);
        out.azimuth_ce += ca * inv_q;
        out.elevation_ce += ce * inv_q;
        out.intensity_ce += ci * inv_q;
        for (double& v : g.azimuth) v *= weights.azimuth * inv_q;
        for (double& v : g.elevation) v *= weights.elevation * inv_q;
        for (double& v : g.intensity) v *= weights.intensity * inv_q;
    }
    out.value = weights.azimuth * out.azimuth_ce + weights.elevation * out.elevation_ce +
                weights.intensity * out.intensity_ce;
    return out;
}

NormalLoss normal_cosine_loss(std::span<const double> pred, std::span<const double> gt,
                              std::span<const std::uint8_t> mask) {
    const std::size_t P = mask.size();
    if (pred.size() != 3 * P || gt.size() != 3 * P) throw DomainError("normal arrays do not match the mask size");
    std::size_t count = 0;
    for (auto m : mask) count += m != 0;
    if (count == 0) throw DomainError("normal loss over an empty mask");
    NormalLoss out;
    out.grad.assign(pred.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t p = 0; p < P; ++p) {
        if (!mask[p]) continue;
        double dot = 0.0;
        for (int c = 0; c < 3; ++c) dot += pred[c * P + p] * gt[c * P + p];
        out.value += (1.0 - dot) * inv;
        for (int c = 0; c < 3; ++c) out.grad[c * P + p] = -gt[c * P + p] * inv;
    }
    return out;
}

double normal_cosine_loss(const NormalMap& pred, const NormalMap& gt, const Mask& mask) {
    if (pred.height() != mask.height() || pred.width() != mask.width() || gt.height() != mask.height() ||
        gt.width() != mask.width())
        throw DomainError("normal maps and mask differ in shape");
    if (mask.count() == 0) throw DomainError("normal loss over an empty mask");
    double sum = 0.0;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask(y, x)) sum += 1.0 - pred.at(y, x).dot(gt.at(y, x));
    return sum / mask.count();
}

RegressionLoss regression_light_loss(std::span<const Eigen::Vector3d> directions, std::span<const double> intensities,
                                     std::span<const lightspace::LightSample> targets) {
    if (directions.empty() || directions.size() != targets.size() || intensities.size() != targets.size())
        throw DomainError("need one target per prediction and at least one prediction");
    RegressionLoss out;
    const double inv = 1.0 / static_cast<double>(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const Eigen::Vector3d& t = targets[i].direction.vec();
        const double de = intensities[i] - targets[i].intensity;
        out.value += ((1.0 - directions[i].dot(t)) + de * de) * inv;
        out.grad_direction.push_back(-t * inv);
        out.grad_intensity.push_back(2.0 * de * inv);
    }
    return out;
}

}  // namespace pscal::losses
