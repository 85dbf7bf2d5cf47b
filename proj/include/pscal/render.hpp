// SPDX-License-Identifier: Apache-2.0
//
// Synthetic photometric stereo data: analytic convex shapes shaded with
// isotropic analytic BRDFs under distant white lights, orthographic camera
// looking down -z (view vector (0, 0, 1)).
//
//     m_j = e_j * rho(n, l_j) * max(n . l_j, 0) + noise
//
// Lambertian rho is the albedo itself (no 1/pi factor).
#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "pscal/image.hpp"
#include "pscal/lightspace.hpp"
#include "pscal/random.hpp"

namespace pscal::render {

enum class BrdfKind { lambertian, blinn_phong };

/// Material families; the Blinn-Phong presets stand in for measured
/// fabric / plastic / phenolic reflectance.
enum class MaterialCategory { lambertian, fabric, plastic, phenolic };

std::string to_string(MaterialCategory c);
MaterialCategory parse_material_category(const std::string& s);

struct BrdfSpec {
    BrdfKind kind = BrdfKind::lambertian;
    Eigen::Array3d albedo = Eigen::Array3d::Ones();
    double specular_strength = 0.0;
    double shininess = 1.0;

    /// Throws DomainError on albedo outside (0, 1], negative specular
    /// strength or non-positive shininess.
    void validate() const;
    bool operator==(const BrdfSpec&) const = default;
};

BrdfSpec lambertian(const Eigen::Array3d& albedo);
BrdfSpec blinn_phong(const Eigen::Array3d& albedo, double specular_strength, double shininess);

/// One of three parameter presets (variant 0..2) of a material category.
BrdfSpec brdf_preset(MaterialCategory category, int variant, const Eigen::Array3d& albedo);
/// Random preset variant with a random mildly tinted albedo.
BrdfSpec random_brdf(Rng& rng, MaterialCategory category);

inline constexpr double kGrazingGuard = 1e-6;

/// Reflected radiance for one surface point; view defaults to the camera
/// axis. Attached shadows (n . l <= 0) give exactly zero.
Eigen::Array3d shade(const Eigen::Vector3d& n, const BrdfSpec& brdf, const lightspace::LightSample& light,
                     const Eigen::Vector3d& view = Eigen::Vector3d::UnitZ());

struct Scene {
    NormalMap normals;
    Mask mask;
};

/// Orthographic unit sphere filling the frame; resolution >= 8.
Scene sphere_scene(int resolution);

struct GaussianBump {
    double amplitude = 0.0;
    double center_x = 0.0;
    double center_y = 0.0;
    double sigma = 0.3;
};

/// Sum-of-Gaussians height field over [-1, 1]^2.
struct HeightField {
    std::vector<GaussianBump> bumps;
    /// Foreground is height > threshold; the whole frame when unset.
    std::optional<double> mask_threshold;

    double height(double x, double y) const;
    /// (dh/dx, dh/dy)
    Eigen::Vector2d gradient(double x, double y) const;
};

/// Normals from the analytic height gradient, n ~ (-h_x, -h_y, 1).
Scene heightmap_scene(const HeightField& field, int resolution);

/// Random blob: 1-4 bumps, thresholded mask.
HeightField random_blob(Rng& rng);

/// Pixel centre in normalized coordinates: x to the right, y up, both in
/// (-1, 1) and exactly antisymmetric about the image centre.
Eigen::Vector2d pixel_coords(int row, int col, int resolution);

/// Shades every masked pixel under every light, adds uniform noise in
/// [-noise_amplitude, noise_amplitude] and clips to [0, 1]. Background stays
/// 0. Ground-truth lights and normals are attached.
ImageStack render_stack(const Scene& scene, const BrdfSpec& brdf, const std::vector<lightspace::LightSample>& lights,
                        double noise_amplitude, Rng& rng, int channels = 3);

/// Intensities drawn uniformly from [lo, hi].
std::vector<lightspace::LightSample> random_lights(Rng& rng, int q, double lo, double hi,
                                                   const std::optional<lightspace::Cone>& cone = std::nullopt);

}  // namespace pscal::render
