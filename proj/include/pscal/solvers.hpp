// SPDX-License-Identifier: Apache-2.0
//
// Calibrated least-squares photometric stereo. Observations are summed in
// a canonical light order, so jointly permuting images and lights leaves
// the output bit-identical.
#pragma once

#include <functional>
#include <vector>

#include "pscal/image.hpp"
#include "pscal/lightspace.hpp"

namespace pscal::models {
class LcNet;
}

namespace pscal::solvers {

struct CalibratedProblem {
    std::vector<Image> observations;  // single channel
    Mask mask;
    std::vector<lightspace::LightSample> lights;

    int count() const { return static_cast<int>(observations.size()); }
};

/// Reduces every image to its channel mean. Throws DomainError when the
/// light count does not match or fewer than three images are given.
CalibratedProblem make_problem(const ImageStack& stack, const std::vector<lightspace::LightSample>& lights);

struct SolverResult {
    NormalMap normals;
    Image albedo;  // single channel, 0 at background and degenerate pixels
    Mask degenerate;  // masked pixels without a trustworthy solution
};

using Solver = std::function<SolverResult(const CalibratedProblem&)>;

/// Per pixel min |L b - m| with rows e_j l_j; normal = b / |b|, albedo = |b|.
/// Observations that are exactly zero are attached shadows and are left
/// out of that pixel's system. Pixels with fewer than three lit
/// observations, a rank-deficient lit subset or |b| < 1e-8 are flagged
/// degenerate with normal (0, 0, 1).
/// Throws IllPosedError when the lights do not span three dimensions.
SolverResult woodham_l2(const CalibratedProblem& problem);

/// As woodham_l2 after dropping, per pixel, the floor(trim_fraction * q)
/// darkest and brightest intensity-normalized observations. Pixels left
/// with fewer than three usable observations are flagged degenerate.
SolverResult shadow_trimmed_l2(const CalibratedProblem& problem, double trim_fraction);

/// Runs the solver with the given lights.
SolverResult compose_with_lights(const ImageStack& stack, const std::vector<lightspace::LightSample>& lights,
                                 const Solver& solver);

/// Lights estimated by the network (arg-max bin centres) fed to a
/// calibrated solver.
SolverResult compose_with_lcnet(const ImageStack& stack, models::LcNet& lcnet, const Solver& solver);

}  // namespace pscal::solvers
