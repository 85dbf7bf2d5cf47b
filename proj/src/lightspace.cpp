// SPDX-License-Identifier: Apache-2.0
#include "pscal/lightspace.hpp"

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pscal/error.hpp"

namespace pscal::lightspace {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

SphericalCoords::SphericalCoords(double azimuth, double elevation)
    : azimuth_deg(azimuth), elevation_deg(elevation) {
    if (!(azimuth >= 0.0 && azimuth <= 180.0))
        throw DomainError("azimuth " + std::to_string(azimuth) + " outside [0, 180]");
    if (!(elevation >= -90.0 && elevation <= 90.0))
        throw DomainError("elevation " + std::to_string(elevation) + " outside [-90, 90]");
}

LightDirection::LightDirection(const Eigen::Vector3d& v) : v_(v) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-6)
        throw DomainError("light direction is not unit length");
    if (v.z() < -1e-6) throw DomainError("light direction below the horizon (z < 0)");
}

LightDirection LightDirection::normalized(const Eigen::Vector3d& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero direction");
    return LightDirection(Eigen::Vector3d(v / n));
}

LightSample::LightSample(LightDirection d, double e) : direction(d), intensity(e) {
    if (!(e > 0.0) || !std::isfinite(e)) throw DomainError("light intensity must be positive");
}

LightingBins::LightingBins(int kd, int ke, double intensity_min, double intensity_max)
    : kd_(kd), ke_(ke), imin_(intensity_min), imax_(intensity_max) {
    if (kd < 1 || ke < 1) throw DomainError("bin counts must be positive");
    if (!(intensity_min > 0.0 && intensity_min < intensity_max))
        throw DomainError("intensity range must satisfy 0 < min < max");
}

LightDirection spherical_to_dir(const SphericalCoords& c) {
    const double phi = c.azimuth_deg * kDeg;
    const double theta = c.elevation_deg * kDeg;
    Eigen::Vector3d v(std::cos(theta) * std::cos(phi), std::sin(theta), std::cos(theta) * std::sin(phi));
    // sin(pi) and cos(pi/2) are not exactly zero in floating point.
    v.z() = std::max(v.z(), 0.0);
    return LightDirection(Eigen::Vector3d(v / v.norm()));
}

SphericalCoords dir_to_spherical(const LightDirection& d) {
    const Eigen::Vector3d& v = d.vec();
    const double elevation = std::asin(std::clamp(v.y(), -1.0, 1.0)) / kDeg;
    const double horiz = std::hypot(v.x(), v.z());
    double azimuth = 90.0;
    if (horiz > 1e-12) {
        azimuth = std::atan2(std::max(v.z(), 0.0), v.x()) / kDeg;
        azimuth = std::clamp(azimuth, 0.0, 180.0);
    }
    return {azimuth, std::clamp(elevation, -90.0, 90.0)};
}

DirectionClass encode_direction(const SphericalCoords& c, const LightingBins& bins) {
    const double w = bins.direction_bin_width();
    const int last = bins.kd() - 1;
    const int az = std::min(static_cast<int>(std::floor(c.azimuth_deg / w)), last);
    const int el = std::min(static_cast<int>(std::floor((c.elevation_deg + 90.0) / w)), last);
    return {std::max(az, 0), std::max(el, 0)};
}

SphericalCoords decode_direction_angles(DirectionClass idx, const LightingBins& bins) {
    if (idx.azimuth < 0 || idx.azimuth >= bins.kd() || idx.elevation < 0 || idx.elevation >= bins.kd())
        throw DomainError("direction class index out of range");
    const double w = bins.direction_bin_width();
    return {(idx.azimuth + 0.5) * w, (idx.elevation + 0.5) * w - 90.0};
}

LightDirection decode_direction(DirectionClass idx, const LightingBins& bins) {
    return spherical_to_dir(decode_direction_angles(idx, bins));
}

int encode_intensity(double e, const LightingBins& bins) {
    if (!(e > 0.0) || !std::isfinite(e)) throw DomainError("light intensity must be positive");
    if (e < bins.intensity_min() || e > bins.intensity_max())
        spdlog::warn("intensity {} outside [{}, {}], clamped", e, bins.intensity_min(), bins.intensity_max());
    const double pos = (e - bins.intensity_min()) / bins.intensity_bin_width();
    const int idx = static_cast<int>(std::floor(std::max(pos, 0.0)));
    return std::min(idx, bins.ke() - 1);
}

double decode_intensity(int idx, const LightingBins& bins) {
    if (idx < 0 || idx >= bins.ke()) throw DomainError("intensity class index out of range");
    return bins.intensity_min() + (idx + 0.5) * bins.intensity_bin_width();
}

LightingClass encode(const LightSample& s, const LightingBins& bins) {
    const DirectionClass d = encode_direction(dir_to_spherical(s.direction), bins);
    return {d.azimuth, d.elevation, encode_intensity(s.intensity, bins)};
}

LightSample decode(const LightingClass& c, const LightingBins& bins) {
    return {decode_direction({c.azimuth, c.elevation}, bins), decode_intensity(c.intensity, bins)};
}

double max_deviation_angle(int kd) {
    if (kd < 1) throw DomainError("K_d must be positive");
    return 180.0 / (2.0 * kd);
}

std::array<LightDirection, 4> corner_perturbations(const SphericalCoords& c, int kd) {
    const double delta = max_deviation_angle(kd);
    std::array<LightDirection, 4> out;
    int k = 0;
    for (double sa : {-1.0, 1.0}) {
        for (double se : {-1.0, 1.0}) {
            const double az = std::clamp(c.azimuth_deg + sa * delta, 0.0, 180.0);
            const double el = std::clamp(c.elevation_deg + se * delta, -90.0, 90.0);
            out[k++] = spherical_to_dir({az, el});
        }
    }
    return out;
}

std::vector<LightDirection> sample_upper_hemisphere(Rng& rng, int q, const std::optional<Cone>& cone) {
    if (q < 1) throw DomainError("need at least one light direction");
    std::vector<LightDirection> out;
    out.reserve(q);
    if (!cone) {
        for (int i = 0; i < q; ++i) {
            const double z = uniform01(rng);
            const double a = 2.0 * std::numbers::pi * uniform01(rng);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            out.push_back(LightDirection::normalized({r * std::cos(a), r * std::sin(a), z}));
        }
        return out;
    }

    if (!(cone->half_angle_deg >= 0.0 && cone->half_angle_deg <= 180.0))
        throw DomainError("cone half-angle outside [0, 180]");
    const Eigen::Vector3d axis = cone->axis.vec();
    // Orthonormal frame around the axis.
    const Eigen::Vector3d helper = std::abs(axis.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d u = axis.cross(helper).normalized();
    const Eigen::Vector3d v = axis.cross(u);
    const double cos_max = std::cos(cone->half_angle_deg * kDeg);
    while (static_cast<int>(out.size()) < q) {
        const double ct = uniform(rng, cos_max, 1.0);
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        const double a = 2.0 * std::numbers::pi * uniform01(rng);
        const Eigen::Vector3d d = axis * ct + (u * std::cos(a) + v * std::sin(a)) * st;
        if (d.z() < 0.0) continue;
        out.push_back(st == 0.0 ? cone->axis : LightDirection::normalized(d));
    }
    return out;
}

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) / kDeg;
}

}  // namespace pscal::lightspace
