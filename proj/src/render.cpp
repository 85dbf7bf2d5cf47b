// SPDX-License-Identifier: Apache-2.0
#include "pscal/render.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "pscal/error.hpp"

namespace pscal::render {

using lightspace::LightSample;

std::string to_string(MaterialCategory c) {
    switch (c) {
        case MaterialCategory::lambertian: return "lambertian";
        case MaterialCategory::fabric: return "fabric";
        case MaterialCategory::plastic: return "plastic";
        case MaterialCategory::phenolic: return "phenolic";
    }
    return "unknown";
}

MaterialCategory parse_material_category(const std::string& s) {
    if (s == "lambertian") return MaterialCategory::lambertian;
    if (s == "fabric") return MaterialCategory::fabric;
    if (s == "plastic") return MaterialCategory::plastic;
    if (s == "phenolic") return MaterialCategory::phenolic;
    throw ConfigError("unknown material category '" + s + "'");
}

void BrdfSpec::validate() const {
    if (!((albedo > 0.0).all() && (albedo <= 1.0).all())) throw DomainError("albedo must lie in (0, 1]");
    if (kind == BrdfKind::blinn_phong) {
        if (!(specular_strength >= 0.0)) throw DomainError("specular strength must be >= 0");
        if (!(shininess > 0.0)) throw DomainError("shininess must be > 0");
    }
}

BrdfSpec lambertian(const Eigen::Array3d& albedo) {
    BrdfSpec b{BrdfKind::lambertian, albedo, 0.0, 1.0};
    b.validate();
    return b;
}

BrdfSpec blinn_phong(const Eigen::Array3d& albedo, double specular_strength, double shininess) {
    BrdfSpec b{BrdfKind::blinn_phong, albedo, specular_strength, shininess};
    b.validate();
    return b;
}

BrdfSpec brdf_preset(MaterialCategory category, int variant, const Eigen::Array3d& albedo) {
    if (variant < 0 || variant > 2) throw DomainError("preset variant must be 0, 1 or 2");
    // (specular strength, shininess) per variant
    static constexpr double fabric[3][2] = {{0.05, 2.0}, {0.10, 4.0}, {0.15, 8.0}};
    static constexpr double plastic[3][2] = {{0.30, 20.0}, {0.45, 35.0}, {0.60, 60.0}};
    static constexpr double phenolic[3][2] = {{0.80, 100.0}, {1.10, 180.0}, {1.50, 300.0}};
    switch (category) {
        case MaterialCategory::lambertian: return lambertian(albedo);
        case MaterialCategory::fabric: return blinn_phong(albedo, fabric[variant][0], fabric[variant][1]);
        case MaterialCategory::plastic: return blinn_phong(albedo, plastic[variant][0], plastic[variant][1]);
        case MaterialCategory::phenolic: return blinn_phong(albedo, phenolic[variant][0], phenolic[variant][1]);
    }
    throw DomainError("unknown material category");
}

BrdfSpec random_brdf(Rng& rng, MaterialCategory category) {
    const double base = uniform(rng, 0.2, 0.5);
    Eigen::Array3d albedo;
    for (int c = 0; c < 3; ++c) albedo[c] = base * uniform(rng, 0.8, 1.2);
    const int variant = static_cast<int>(uniform_index(rng, 3));
    return brdf_preset(category, variant, albedo);
}

Eigen::Array3d shade(const Eigen::Vector3d& n, const BrdfSpec& brdf, const LightSample& light,
                     const Eigen::Vector3d& view) {
    const Eigen::Vector3d& l = light.direction.vec();
    const double ndotl = n.dot(l);
    if (ndotl <= 0.0) return Eigen::Array3d::Zero();
    Eigen::Array3d rho = brdf.albedo;
    if (brdf.kind == BrdfKind::blinn_phong) {
        const Eigen::Vector3d h = (l + view).normalized();
        const double spec = std::pow(std::max(n.dot(h), 0.0), brdf.shininess);
        rho += brdf.specular_strength * spec / std::max(ndotl, kGrazingGuard);
    }
    return light.intensity * rho * ndotl;
}

Eigen::Vector2d pixel_coords(int row, int col, int resolution) {
    const double r = resolution;
    return {(2.0 * col + 1.0 - r) / r, (r - 1.0 - 2.0 * row) / r};
}

Scene sphere_scene(int resolution) {
    if (resolution < 8) throw ConfigError("sphere resolution must be at least 8");
    Scene s{NormalMap(resolution, resolution), Mask(resolution, resolution)};
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            const Eigen::Vector2d p = pixel_coords(y, x, resolution);
            const double r2 = p.squaredNorm();
            if (r2 >= 1.0) continue;
            const Eigen::Vector3d n(p.x(), p.y(), std::sqrt(1.0 - r2));
            s.normals.set(y, x, n.normalized());
            s.mask.set(y, x, true);
        }
    }
    return s;
}

double HeightField::height(double x, double y) const {
    double h = 0.0;
    for (const GaussianBump& b : bumps) {
        const double dx = x - b.center_x, dy = y - b.center_y;
        h += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    return h;
}

Eigen::Vector2d HeightField::gradient(double x, double y) const {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (const GaussianBump& b : bumps) {
        const double dx = x - b.center_x, dy = y - b.center_y;
        const double s2 = b.sigma * b.sigma;
        const double v = b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
        g.x() += -v * dx / s2;
        g.y() += -v * dy / s2;
    }
    return g;
}

Scene heightmap_scene(const HeightField& field, int resolution) {
    if (resolution < 8) throw ConfigError("heightmap resolution must be at least 8");
    for (const GaussianBump& b : field.bumps)
        if (!(b.sigma > 0.0)) throw DomainError("gaussian bump sigma must be positive");
    Scene s{NormalMap(resolution, resolution), Mask(resolution, resolution)};
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            const Eigen::Vector2d p = pixel_coords(y, x, resolution);
            if (field.mask_threshold && !(field.height(p.x(), p.y()) > *field.mask_threshold)) continue;
            const Eigen::Vector2d g = field.gradient(p.x(), p.y());
            s.normals.set(y, x, Eigen::Vector3d(-g.x(), -g.y(), 1.0).normalized());
            s.mask.set(y, x, true);
        }
    }
    return s;
}

HeightField random_blob(Rng& rng) {
    HeightField f;
    const int n = 1 + static_cast<int>(uniform_index(rng, 4));
    for (int i = 0; i < n; ++i) {
        GaussianBump b;
        b.amplitude = uniform(rng, 0.3, 1.0);
        b.center_x = uniform(rng, -0.4, 0.4);
        b.center_y = uniform(rng, -0.4, 0.4);
        b.sigma = uniform(rng, 0.2, 0.45);
        f.bumps.push_back(b);
    }
    f.mask_threshold = 0.08;
    return f;
}

ImageStack render_stack(const Scene& scene, const BrdfSpec& brdf, const std::vector<LightSample>& lights,
                        double noise_amplitude, Rng& rng, int channels) {
    if (lights.empty()) throw DomainError("render_stack needs at least one light");
    if (!(noise_amplitude >= 0.0)) throw DomainError("noise amplitude must be >= 0");
    if (channels != 1 && channels != 3) throw DomainError("channels must be 1 or 3");
    brdf.validate();
    const int h = scene.mask.height(), w = scene.mask.width();

    ImageStack stack;
    stack.mask = scene.mask;
    stack.normals = scene.normals;
    stack.lights = lights;
    stack.images.reserve(lights.size());
    for (const LightSample& light : lights) {
        Image img(h, w, channels);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!scene.mask(y, x)) continue;
                const Eigen::Array3d rgb = shade(scene.normals.at(y, x), brdf, light);
                if (channels == 1) {
                    const double v = rgb.mean() + uniform(rng, -noise_amplitude, noise_amplitude);
                    img.at(y, x, 0) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                } else {
                    for (int c = 0; c < 3; ++c) {
                        const double v = rgb[c] + uniform(rng, -noise_amplitude, noise_amplitude);
                        img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                    }
                }
            }
        }
        stack.images.push_back(std::move(img));
    }
    return stack;
}

std::vector<LightSample> random_lights(Rng& rng, int q, double lo, double hi,
                                       const std::optional<lightspace::Cone>& cone) {
    if (!(lo > 0.0 && lo <= hi)) throw DomainError("intensity range must satisfy 0 < lo <= hi");
    const auto dirs = lightspace::sample_upper_hemisphere(rng, q, cone);
    std::vector<LightSample> out;
    out.reserve(q);
    for (const auto& d : dirs) out.emplace_back(d, uniform(rng, lo, hi));
    return out;
}

}  // namespace pscal::render
