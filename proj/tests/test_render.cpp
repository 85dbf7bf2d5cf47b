// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pscal/error.hpp"
#include "pscal/render.hpp"

using namespace pscal;
using namespace pscal::render;
using lightspace::LightDirection;
using lightspace::LightSample;

namespace {

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

LightSample light(double x, double y, double z, double e = 1.0) {
    return LightSample(LightDirection::normalized({x, y, z}), e);
}

}  // namespace

TEST(Sphere, CentreNormalMaskAreaAndUnitNormals) {
    const Scene s = sphere_scene(128);
    const auto c = s.normals.at(64, 64);
    EXPECT_NEAR(c.z(), 1.0, 1e-3);
    EXPECT_NEAR(static_cast<double>(s.mask.count()) / (128 * 128), std::numbers::pi / 4, 0.02 * std::numbers::pi / 4);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            if (!s.mask(y, x)) continue;
            const auto n = s.normals.at(y, x);
            EXPECT_NEAR(n.norm(), 1.0, 1e-6);
            EXPECT_GT(n.z(), 0.0);
            // n = (u, v, sqrt(1 - u^2 - v^2)) at the pixel centre
            const auto uv = pixel_coords(y, x, 128);
            EXPECT_NEAR(n.x(), uv.x(), 1e-6);
            EXPECT_NEAR(n.y(), uv.y(), 1e-6);
        }
    EXPECT_THROW(sphere_scene(7), ConfigError);
}

TEST(Sphere, OddResolutionHasExactCentreNormal) {
    const Scene s = sphere_scene(9);
    EXPECT_NEAR((s.normals.at(4, 4) - Eigen::Vector3d::UnitZ()).norm(), 0.0, 1e-7);
}

TEST(PixelCoords, Antisymmetric) {
    for (int r : {8, 9, 32}) {
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                const auto a = pixel_coords(y, x, r), b = pixel_coords(r - 1 - y, r - 1 - x, r);
                EXPECT_EQ(a.x(), -b.x());
                EXPECT_EQ(a.y(), -b.y());
            }
        EXPECT_GT(pixel_coords(0, 0, r).y(), 0.0);  // top row is +y
        EXPECT_LT(pixel_coords(0, 0, r).x(), 0.0);
    }
}

TEST(Heightmap, FlatFieldGivesViewNormals) {
    HeightField f;
    const Scene s = heightmap_scene(f, 32);
    EXPECT_EQ(s.mask.count(), 32 * 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) EXPECT_EQ(s.normals.at(y, x), Eigen::Vector3d(0, 0, 1));
}

TEST(Heightmap, CentredBumpIsSymmetricUnderQuarterTurn) {
    HeightField f;
    f.bumps.push_back({0.8, 0.0, 0.0, 0.3});
    const int r = 64;
    const Scene s = heightmap_scene(f, r);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) {
            // Rotating the image by 90 degrees rotates the normal's xy part.
            const auto n = s.normals.at(y, x);
            const auto m = s.normals.at(x, r - 1 - y);
            EXPECT_NEAR(m.x(), n.y(), 1e-6);
            EXPECT_NEAR(m.y(), -n.x(), 1e-6);
            EXPECT_NEAR(m.z(), n.z(), 1e-6);
        }
}

TEST(Heightmap, NormalsMatchFiniteDifferencesOfHeight) {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const HeightField f = random_blob(rng);
        const int r = 128;
        const Scene s = heightmap_scene(f, r);
        const double h = 1e-5;
        double sum = 0.0;
        int n = 0;
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                if (!s.mask(y, x)) continue;
                const auto uv = pixel_coords(y, x, r);
                const double hx = (f.height(uv.x() + h, uv.y()) - f.height(uv.x() - h, uv.y())) / (2 * h);
                const double hy = (f.height(uv.x(), uv.y() + h) - f.height(uv.x(), uv.y() - h)) / (2 * h);
                sum += angle_deg(s.normals.at(y, x), Eigen::Vector3d(-hx, -hy, 1.0).normalized());
                ++n;
                EXPECT_GT(s.normals.at(y, x).z(), 0.0);
            }
        ASSERT_GT(n, 0);
        EXPECT_LT(sum / n, 1.0);
    }
}

TEST(Shade, WorkedExamples) {
    const auto white = lambertian(Eigen::Array3d::Ones());
    EXPECT_NEAR(shade({0, 0, 1}, white, light(0, 0, 1))[0], 1.0, 1e-15);
    EXPECT_EQ(shade({1, 0, 0}, white, light(-1, 0, 0.0001)).matrix().norm(), 0.0);
    const auto bp = blinn_phong(Eigen::Array3d::Constant(0.5), 0.6, 40);
    const Eigen::Vector3d n = Eigen::Vector3d(0.3, -0.2, 1).normalized();
    const auto a = shade(n, bp, light(0.2, 0.5, 1, 0.7));
    const auto b = shade(n, bp, light(0.2, 0.5, 1, 1.4));
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(b[c], 2 * a[c], 1e-12);
}

TEST(Shade, BlinnPhongMatchesClosedForm) {
    const auto bp = blinn_phong(Eigen::Array3d(0.3, 0.4, 0.5), 0.8, 25);
    Rng rng(2);
    for (const auto& l : lightspace::sample_upper_hemisphere(rng, 50)) {
        const Eigen::Vector3d n = Eigen::Vector3d(0.1, 0.2, 0.9).normalized();
        const double nl = n.dot(l.vec());
        const Eigen::Vector3d hv = (l.vec() + Eigen::Vector3d::UnitZ()).normalized();
        const auto m = shade(n, bp, LightSample(l, 1.3));
        for (int c = 0; c < 3; ++c) {
            const double expect =
                nl <= 0 ? 0.0 : 1.3 * (bp.albedo[c] + 0.8 * std::pow(std::max(n.dot(hv), 0.0), 25) / std::max(nl, 1e-6)) * nl;
            EXPECT_NEAR(m[c], expect, 1e-12);
            EXPECT_GE(m[c], 0.0);
        }
    }
}

TEST(Shade, IsotropicUnderRotationAboutView) {
    const auto bp = blinn_phong(Eigen::Array3d::Constant(0.4), 0.5, 30);
    Rng rng(8);
    const auto ls = lightspace::sample_upper_hemisphere(rng, 30);
    for (const auto& l : ls) {
        const Eigen::Vector3d n = Eigen::Vector3d(0.4, -0.1, 0.8).normalized();
        const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        const auto a = shade(n, bp, LightSample(l, 1.0));
        const auto b = shade(rot * n, bp, LightSample(LightDirection::normalized(rot * l.vec()), 1.0));
        EXPECT_NEAR(a[0], b[0], 1e-12);
    }
}

TEST(Brdf, ValidationAndPresets) {
    EXPECT_THROW(lambertian(Eigen::Array3d(0, 0.5, 0.5)).validate(), DomainError);
    EXPECT_THROW(lambertian(Eigen::Array3d(1.1, 0.5, 0.5)).validate(), DomainError);
    EXPECT_THROW(blinn_phong(Eigen::Array3d::Constant(0.5), -0.1, 10).validate(), DomainError);
    EXPECT_THROW(blinn_phong(Eigen::Array3d::Constant(0.5), 0.1, 0).validate(), DomainError);
    double last_ks = 0.0;
    for (auto cat : {MaterialCategory::fabric, MaterialCategory::plastic, MaterialCategory::phenolic}) {
        EXPECT_EQ(parse_material_category(to_string(cat)), cat);
        for (int v = 0; v < 3; ++v) {
            const auto b = brdf_preset(cat, v, Eigen::Array3d::Constant(0.5));
            EXPECT_NO_THROW(b.validate());
            EXPECT_GT(b.specular_strength, last_ks);
            last_ks = b.specular_strength;
        }
    }
    EXPECT_THROW(parse_material_category("velvet"), ConfigError);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) EXPECT_NO_THROW(random_brdf(rng, MaterialCategory::plastic).validate());
}

TEST(RenderStack, LambertianSphereUnderFrontalLight) {
    const Scene s = sphere_scene(32);
    const auto brdf = lambertian(Eigen::Array3d(0.3, 0.5, 0.7));
    Rng rng(0);
    const auto st = render_stack(s, brdf, {light(0, 0, 1, 1.5)}, 0.0, rng);
    ASSERT_TRUE(st.lights && st.normals);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) {
                const double expect = s.mask(y, x) ? std::min(1.0, std::max(s.normals.at(y, x).z(), 0.0) * brdf.albedo[c] * 1.5) : 0.0;
                EXPECT_NEAR(st.images[0].at(y, x, c), expect, 1e-6);
            }
}

TEST(RenderStack, LinearInIntensityBelowSaturation) {
    const Scene s = sphere_scene(32);
    const auto brdf = blinn_phong(Eigen::Array3d::Constant(0.4), 0.3, 20);
    Rng r1(0), r2(0);
    const auto a = render_stack(s, brdf, {light(0.3, 0.2, 1, 0.6)}, 0.0, r1);
    const auto b = render_stack(s, brdf, {light(0.3, 0.2, 1, 1.2)}, 0.0, r2);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c)
                if (a.images[0].at(y, x, c) <= 0.5) EXPECT_NEAR(b.images[0].at(y, x, c), 2 * a.images[0].at(y, x, c), 1e-6);
}

TEST(RenderStack, NoiseBoundsClippingAndDeterminism) {
    const Scene s = sphere_scene(32);
    const auto brdf = lambertian(Eigen::Array3d::Constant(0.5));
    Rng rng(3);
    const auto lights = random_lights(rng, 4, 0.2, 2.0);
    Rng a(5), b(5), c(5);
    const auto clean = render_stack(s, brdf, lights, 0.0, a);
    const auto noisy = render_stack(s, brdf, lights, 0.025, b);
    const auto again = render_stack(s, brdf, lights, 0.025, c);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(noisy.images[i], again.images[i]);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                for (int ch = 0; ch < 3; ++ch) {
                    const float v = noisy.images[i].at(y, x, ch);
                    EXPECT_GE(v, 0.0f);
                    EXPECT_LE(v, 1.0f);
                    EXPECT_LE(std::abs(v - clean.images[i].at(y, x, ch)), 0.025 + 1e-6);
                    if (!s.mask(y, x)) EXPECT_EQ(v, 0.0f);
                }
    }
    EXPECT_THROW(render_stack(s, brdf, {}, 0.0, a), DomainError);
    EXPECT_THROW(render_stack(s, brdf, lights, -1.0, a), DomainError);
}

TEST(RenderStack, BrightestPixelFacesTheLight) {
    const Scene s = sphere_scene(128);
    const auto brdf = lambertian(Eigen::Array3d::Constant(0.5));
    Rng rng(12);
    for (const auto& l : lightspace::sample_upper_hemisphere(rng, 10)) {
        if (l.z() < 0.2) continue;  // the facing point must be inside the disc
        Rng r(0);
        const auto st = render_stack(s, brdf, {LightSample(l, 1.0)}, 0.0, r, 1);
        int by = 0, bx = 0;
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x)
                if (st.images[0].at(y, x, 0) > st.images[0].at(by, bx, 0)) by = y, bx = x;
        EXPECT_LT(angle_deg(s.normals.at(by, bx), l.vec()), 2.0);
    }
}

TEST(RandomLights, IntensityRange) {
    Rng rng(6);
    const auto ls = random_lights(rng, 1000, 0.2, 2.0);
    double lo = 10, hi = 0;
    for (const auto& l : ls) {
        lo = std::min(lo, l.intensity);
        hi = std::max(hi, l.intensity);
        EXPECT_GE(l.direction.z(), 0.0);
    }
    EXPECT_GE(lo, 0.2);
    EXPECT_LE(hi, 2.0);
    EXPECT_LE(hi / lo, 10.0);
}
