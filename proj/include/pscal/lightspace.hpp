// SPDX-License-Identifier: Apache-2.0
//
// Light direction conventions and the discrete lighting codec.
//
// Directions live on the upper hemisphere (z toward the viewer) and are
// parameterized by azimuth phi in [0, 180] and elevation theta in [-90, 90]
// degrees:
//
//     l = (cos(theta) cos(phi), sin(theta), cos(theta) sin(phi))
//
// so phi in [0, 180] maps exactly onto z >= 0. Azimuth and elevation are
// each split into K_d uniform bins, intensity into K_e uniform bins.
#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <vector>

#include "pscal/random.hpp"

namespace pscal::lightspace {

struct SphericalCoords {
    double azimuth_deg = 90.0;
    double elevation_deg = 0.0;

    SphericalCoords() = default;
    /// Throws DomainError when azimuth is outside [0, 180] or elevation
    /// outside [-90, 90].
    SphericalCoords(double azimuth, double elevation);
};

/// Unit vector with z >= 0.
class LightDirection {
public:
    LightDirection() : v_(0.0, 0.0, 1.0) {}
    /// Throws DomainError unless |v| = 1 within 1e-6 and z >= -1e-6.
    explicit LightDirection(const Eigen::Vector3d& v);
    LightDirection(double x, double y, double z) : LightDirection(Eigen::Vector3d(x, y, z)) {}

    /// Normalizes v first; throws DomainError on a zero vector or z < -1e-6.
    static LightDirection normalized(const Eigen::Vector3d& v);

    const Eigen::Vector3d& vec() const { return v_; }
    double x() const { return v_.x(); }
    double y() const { return v_.y(); }
    double z() const { return v_.z(); }

private:
    Eigen::Vector3d v_;
};

struct LightSample {
    LightDirection direction;
    double intensity = 1.0;

    LightSample() = default;
    LightSample(LightDirection d, double e);
};

class LightingBins {
public:
    LightingBins() = default;
    LightingBins(int kd, int ke, double intensity_min = 0.2, double intensity_max = 2.0);

    int kd() const { return kd_; }
    int ke() const { return ke_; }
    double intensity_min() const { return imin_; }
    double intensity_max() const { return imax_; }
    double direction_bin_width() const { return 180.0 / kd_; }
    double intensity_bin_width() const { return (imax_ - imin_) / ke_; }

    bool operator==(const LightingBins&) const = default;

private:
    int kd_ = 36;
    int ke_ = 20;
    double imin_ = 0.2;
    double imax_ = 2.0;
};

struct DirectionClass {
    int azimuth = 0;
    int elevation = 0;
    bool operator==(const DirectionClass&) const = default;
};

struct LightingClass {
    int azimuth = 0;
    int elevation = 0;
    int intensity = 0;
    bool operator==(const LightingClass&) const = default;
};

LightDirection spherical_to_dir(const SphericalCoords& c);

/// At the poles (theta = +-90) the azimuth is reported as 90.
SphericalCoords dir_to_spherical(const LightDirection& d);

DirectionClass encode_direction(const SphericalCoords& c, const LightingBins& bins);
LightDirection decode_direction(DirectionClass idx, const LightingBins& bins);
/// Bin-center angles of a direction class.
SphericalCoords decode_direction_angles(DirectionClass idx, const LightingBins& bins);

/// Values outside [intensity_min, intensity_max] are clamped into the
/// first/last bin and a warning is logged. Non-positive e throws.
int encode_intensity(double e, const LightingBins& bins);
double decode_intensity(int idx, const LightingBins& bins);

LightingClass encode(const LightSample& s, const LightingBins& bins);
LightSample decode(const LightingClass& c, const LightingBins& bins);

/// Half a bin width: 180 / (2 K_d) degrees.
double max_deviation_angle(int kd);

/// The four directions at (phi +- delta, theta +- delta), angles clamped to
/// their valid ranges. Order: (-,-), (-,+), (+,-), (+,+) in (phi, theta).
std::array<LightDirection, 4> corner_perturbations(const SphericalCoords& c, int kd);

struct Cone {
    LightDirection axis;
    double half_angle_deg = 90.0;
};

/// q directions uniform on the upper hemisphere, or uniform within `cone`
/// (intersected with the upper hemisphere) when given.
std::vector<LightDirection> sample_upper_hemisphere(Rng& rng, int q,
                                                    const std::optional<Cone>& cone = std::nullopt);

/// Angle between two unit vectors in degrees, with the dot product clamped.
double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace pscal::lightspace
