// SPDX-License-Identifier: Apache-2.0
#include "pscal/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pscal/error.hpp"
#include "pscal/models.hpp"

namespace pscal::solvers {

using lightspace::LightSample;

namespace {

constexpr double kDegenerateNorm = 1e-8;

// Index order independent of the order in which lights were supplied.
std::vector<int> canonical_order(const std::vector<LightSample>& lights) {
    std::vector<int> idx(lights.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key = [&](int i) {
        const auto& d = lights[i].direction.vec();
        return std::array<double, 4>{d.x(), d.y(), d.z(), lights[i].intensity};
    };
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return key(a) < key(b); });
    return idx;
}

void check_problem(const CalibratedProblem& p) {
    if (p.count() < 3) throw DomainError("calibrated photometric stereo needs at least 3 images");
    if (static_cast<int>(p.lights.size()) != p.count()) throw DomainError("light count does not match image count");
    for (const Image& img : p.observations)
        if (img.channels() != 1 || img.height() != p.mask.height() || img.width() != p.mask.width())
            throw DomainError("observations must be single-channel images matching the mask");
}

bool rank_deficient(const Eigen::Matrix3d& a) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a, Eigen::EigenvaluesOnly);
    const auto ev = es.eigenvalues();
    return !(ev.maxCoeff() > 0.0) || ev.minCoeff() <= 1e-12 * ev.maxCoeff();
}

SolverResult empty_result(const CalibratedProblem& p) {
    SolverResult r;
    r.normals = NormalMap(p.mask.height(), p.mask.width());
    r.albedo = Image(p.mask.height(), p.mask.width(), 1);
    r.degenerate = Mask(p.mask.height(), p.mask.width());
    return r;
}

void store(SolverResult& r, int y, int x, const Eigen::Vector3d& b) {
    const double len = b.norm();
    if (!(len >= kDegenerateNorm) || !std::isfinite(len)) {
        r.normals.set(y, x, Eigen::Vector3d::UnitZ());
        r.degenerate.set(y, x, true);
        return;
    }
    r.normals.set(y, x, b / len);
    r.albedo.at(y, x, 0) = static_cast<float>(len);
}

}  // namespace

CalibratedProblem make_problem(const ImageStack& stack, const std::vector<LightSample>& lights) {
    stack.validate();
    if (static_cast<int>(lights.size()) != stack.count()) throw DomainError("light count does not match image count");
    CalibratedProblem p;
    p.mask = stack.mask;
    p.lights = lights;
    p.observations.reserve(stack.images.size());
    for (const Image& img : stack.images) p.observations.push_back(img.channels() == 1 ? img : to_grayscale(img));
    check_problem(p);
    return p;
}

SolverResult woodham_l2(const CalibratedProblem& problem) {
    return shadow_trimmed_l2(problem, 0.0);
}

SolverResult shadow_trimmed_l2(const CalibratedProblem& problem, double trim_fraction) {
    check_problem(problem);
    if (!(trim_fraction >= 0.0 && trim_fraction <= 0.4)) throw DomainError("trim fraction must lie in [0, 0.4]");
    const int q = problem.count();
    const int drop = static_cast<int>(std::floor(trim_fraction * q));
    const std::vector<int> order = canonical_order(problem.lights);

    std::vector<Eigen::Vector3d> rows(q);
    for (int j = 0; j < q; ++j) rows[j] = problem.lights[j].intensity * problem.lights[j].direction.vec();

    auto gram = [&](const std::vector<int>& use) {
        Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
        for (int j : use) a.noalias() += rows[j] * rows[j].transpose();
        return a;
    };

    SolverResult r = empty_result(problem);
    const Mask& mask = problem.mask;
    const Eigen::Matrix3d full = gram(order);
    if (rank_deficient(full)) throw IllPosedError("light directions do not span 3 dimensions");
    const Eigen::LDLT<Eigen::Matrix3d> full_solver(full);

    // Solves over `use`; exact zeros are attached shadows and carry no
    // equation, so they are left out.
    std::vector<int> lit;
    auto solve = [&](int y, int x, const std::vector<int>& use) {
        lit.clear();
        for (int j : use)
            if (problem.observations[j].at(y, x, 0) > 0.0f) lit.push_back(j);
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (int j : lit) rhs += static_cast<double>(problem.observations[j].at(y, x, 0)) * rows[j];
        if (lit.size() == static_cast<std::size_t>(q)) return store(r, y, x, full_solver.solve(rhs));
        if (lit.size() < 3) return store(r, y, x, Eigen::Vector3d::Zero());
        const Eigen::Matrix3d a = gram(lit);
        if (rank_deficient(a)) return store(r, y, x, Eigen::Vector3d::Zero());
        store(r, y, x, Eigen::LDLT<Eigen::Matrix3d>(a).solve(rhs));
    };

    if (drop == 0) {
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                if (mask(y, x)) solve(y, x, order);
        return r;
    }

    std::vector<int> ranked(q), kept;
    std::vector<double> ratio(q);
    std::vector<int> rank_of(q);
    for (int k = 0; k < q; ++k) rank_of[order[k]] = k;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(y, x)) continue;
            for (int j = 0; j < q; ++j) ratio[j] = problem.observations[j].at(y, x, 0) / problem.lights[j].intensity;
            ranked = order;
            std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
                return ratio[a] != ratio[b] ? ratio[a] < ratio[b] : rank_of[a] < rank_of[b];
            });
            kept.assign(ranked.begin() + drop, ranked.end() - drop);
            std::sort(kept.begin(), kept.end(), [&](int a, int b) { return rank_of[a] < rank_of[b]; });
            solve(y, x, kept);
        }
    return r;
}

SolverResult compose_with_lights(const ImageStack& stack, const std::vector<LightSample>& lights, const Solver& solver) {
    return solver(make_problem(stack, lights));
}

SolverResult compose_with_lcnet(const ImageStack& stack, models::LcNet& lcnet, const Solver& solver) {
    stack.validate();
    const auto preds = models::lcnet_forward(stack, lcnet);
    const auto lights = models::decode_predictions(preds, lcnet.config().bins);
    return compose_with_lights(stack, lights, solver);
}

}  // namespace pscal::solvers
