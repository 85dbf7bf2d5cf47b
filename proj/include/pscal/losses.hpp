// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. Everything is computed in double precision from raw
// scores so the analytic gradients can be checked against finite
// differences.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "pscal/image.hpp"
#include "pscal/lightspace.hpp"

namespace pscal::losses {

struct LossWeights {
    double azimuth = 1.0;
    double elevation = 1.0;
    double intensity = 1.0;
};

/// Raw (pre-softmax) scores of the three lighting heads for one image.
struct LightingScores {
    std::vector<double> azimuth;
    std::vector<double> elevation;
    std::vector<double> intensity;
};

std::vector<double> softmax(std::span<const double> scores);

/// -log softmax(scores)[target] via log-sum-exp. When grad is non-empty it
/// receives d/dscores = softmax - onehot.
double cross_entropy(std::span<const double> scores, int target, std::span<double> grad = {});

struct ClassificationLoss {
    double value = 0.0;
    double azimuth_ce = 0.0;  // mean over images, unweighted
    double elevation_ce = 0.0;
    double intensity_ce = 0.0;
    std::vector<LightingScores> grad;
};

/// Weighted sum of the three cross-entropies, averaged over the images.
/// Throws DomainError on size mismatches or class indices out of range.
ClassificationLoss light_classification_loss(std::span<const LightingScores> scores,
                                             std::span<const lightspace::LightingClass> targets,
                                             const LossWeights& weights = {});

struct NormalLoss {
    double value = 0.0;
    std::vector<double> grad;  // same layout as pred
};

/// Mean over masked pixels of (1 - pred . gt). Vectors are stored planar:
/// component c of pixel p at index c * pixels + p. Throws DomainError on an
/// empty mask.
NormalLoss normal_cosine_loss(std::span<const double> pred, std::span<const double> gt,
                              std::span<const std::uint8_t> mask);

double normal_cosine_loss(const NormalMap& pred, const NormalMap& gt, const Mask& mask);

struct RegressionLoss {
    double value = 0.0;
    std::vector<Eigen::Vector3d> grad_direction;
    std::vector<double> grad_intensity;
};

/// Baseline objective for direct regression, averaged over the images:
/// (1 - d . d_gt) + (e - e_gt)^2.
RegressionLoss regression_light_loss(std::span<const Eigen::Vector3d> directions, std::span<const double> intensities,
                                     std::span<const lightspace::LightSample> targets);

}  // namespace pscal::losses
