// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pscal/error.hpp"
#include "pscal/lightspace.hpp"

using namespace pscal;
using namespace pscal::lightspace;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Direction from angles, written out independently of the library.
Eigen::Vector3d oracle_dir(double az, double el) {
    return {std::cos(el * kDeg) * std::cos(az * kDeg), std::sin(el * kDeg), std::cos(el * kDeg) * std::sin(az * kDeg)};
}

double angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b)) / kDeg;
}

}  // namespace

TEST(SphericalCoords, RejectsOutOfRange) {
    EXPECT_THROW(SphericalCoords(-0.1, 0), DomainError);
    EXPECT_THROW(SphericalCoords(180.1, 0), DomainError);
    EXPECT_THROW(SphericalCoords(90, 90.5), DomainError);
    EXPECT_NO_THROW(SphericalCoords(180, -90));
}

TEST(LightDirection, Invariants) {
    EXPECT_THROW(LightDirection(1.0, 1.0, 0.0), DomainError);
    EXPECT_THROW(LightDirection(0.0, 0.6, -0.8), DomainError);
    EXPECT_THROW(LightDirection::normalized(Eigen::Vector3d::Zero()), DomainError);
    const auto d = LightDirection::normalized({0.0, 3.0, 4.0});
    EXPECT_NEAR(d.y(), 0.6, 1e-15);
    EXPECT_THROW(LightSample(d, 0.0), DomainError);
}

TEST(SphericalToDir, WorkedExamples) {
    EXPECT_NEAR((spherical_to_dir({90, 0}).vec() - Eigen::Vector3d(0, 0, 1)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((spherical_to_dir({0, 0}).vec() - Eigen::Vector3d(1, 0, 0)).norm(), 0.0, 1e-12);
    const auto d = spherical_to_dir({45, 45}).vec();
    EXPECT_NEAR(d.x(), 0.5, 1e-12);
    EXPECT_NEAR(d.y(), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(d.z(), 0.5, 1e-12);
}

TEST(SphericalToDir, MatchesOracleOnGridAndIsUnit) {
    for (double az = 0; az <= 180; az += 3)
        for (double el = -90; el <= 90; el += 3) {
            const auto d = spherical_to_dir({az, el}).vec();
            EXPECT_NEAR((d - oracle_dir(az, el)).norm(), 0.0, 1e-12);
            EXPECT_NEAR(d.norm(), 1.0, 1e-9);
            EXPECT_GE(d.z(), -1e-12);
        }
}

TEST(DirToSpherical, WorkedExamplesAndPoles) {
    auto c = dir_to_spherical(LightDirection(0, 0, 1));
    EXPECT_NEAR(c.azimuth_deg, 90, 1e-12);
    EXPECT_NEAR(c.elevation_deg, 0, 1e-12);
    c = dir_to_spherical(LightDirection(0, 1, 0));
    EXPECT_EQ(c.azimuth_deg, 90);
    EXPECT_NEAR(c.elevation_deg, 90, 1e-12);
    c = dir_to_spherical(LightDirection(0, -1, 0));
    EXPECT_EQ(c.azimuth_deg, 90);
    EXPECT_NEAR(c.elevation_deg, -90, 1e-12);
    c = dir_to_spherical(LightDirection::normalized({0.5, std::sqrt(0.5), 0.5}));
    EXPECT_NEAR(c.azimuth_deg, 45, 1e-9);
    EXPECT_NEAR(c.elevation_deg, 45, 1e-9);
}

TEST(DirToSpherical, RoundtripWithin1e5Degrees) {
    Rng rng(3);
    for (const auto& d : sample_upper_hemisphere(rng, 2000))
        EXPECT_LT(angle(spherical_to_dir(dir_to_spherical(d)).vec(), d.vec()), 1e-5);
}

TEST(EncodeDirection, WorkedExamples) {
    const LightingBins b36;
    EXPECT_EQ(encode_direction({91, -5}, b36), (DirectionClass{18, 17}));
    EXPECT_EQ(encode_direction({180, 90}, b36), (DirectionClass{35, 35}));
    EXPECT_EQ(encode_direction({0, -90}, LightingBins(18, 20)), (DirectionClass{0, 0}));
}

TEST(DecodeDirection, BinCentres) {
    const LightingBins b36;
    const auto a = decode_direction_angles({18, 17}, b36);
    EXPECT_DOUBLE_EQ(a.azimuth_deg, 92.5);
    EXPECT_DOUBLE_EQ(a.elevation_deg, -2.5);
    EXPECT_LT(angle(decode_direction({18, 17}, b36).vec(), oracle_dir(92.5, -2.5)), 1e-9);
    EXPECT_LT(angle(decode_direction({0, 0}, LightingBins(2, 20)).vec(), oracle_dir(45, -45)), 1e-9);
    EXPECT_THROW(decode_direction({36, 0}, b36), DomainError);
    EXPECT_THROW(decode_direction({0, -1}, b36), DomainError);
}

TEST(Codec, IndexRoundtripIsExactForSeveralBinCounts) {
    for (int kd : {1, 2, 5, 18, 36, 90, 180}) {
        const LightingBins b(kd, 20);
        for (int i = 0; i < kd; ++i)
            for (int j = 0; j < kd; ++j) {
                const DirectionClass c{i, j};
                EXPECT_EQ(encode_direction(decode_direction_angles(c, b), b), c);
                EXPECT_EQ(encode_direction(dir_to_spherical(decode_direction(c, b)), b), c) << kd << " " << i << " " << j;
            }
    }
}

TEST(Codec, DirectionRoundtripErrorBoundOnHalfDegreeGrid) {
    for (int kd : {36, 18, 90}) {
        const LightingBins b(kd, 20);
        const double bound = std::sqrt(2.0) * max_deviation_angle(kd) + 0.1;
        double worst = 0.0;
        for (double az = 0; az <= 180; az += 0.5)
            for (double el = -90; el <= 90; el += 0.5) {
                const Eigen::Vector3d d = oracle_dir(az, el);
                const auto back = decode_direction(encode_direction(dir_to_spherical(LightDirection::normalized(d)), b), b);
                worst = std::max(worst, angle(back.vec(), d));
            }
        EXPECT_LE(worst, bound) << "kd " << kd;
    }
}

TEST(IntensityCodec, WorkedExamples) {
    const LightingBins b;
    EXPECT_EQ(encode_intensity(0.2, b), 0);
    EXPECT_NEAR(decode_intensity(0, b), 0.245, 1e-12);
    EXPECT_EQ(encode_intensity(2.0, b), 19);
    EXPECT_EQ(encode_intensity(5.0, b), 19);
    EXPECT_EQ(encode_intensity(0.1, b), 0);
    EXPECT_THROW(encode_intensity(0.0, b), DomainError);
    EXPECT_THROW(encode_intensity(-1.0, b), DomainError);
    for (int k = 0; k < 20; ++k) EXPECT_EQ(encode_intensity(decode_intensity(k, b), b), k);
    EXPECT_THROW(decode_intensity(20, b), DomainError);
}

TEST(IntensityCodec, DecodeIsWithinHalfBin) {
    const LightingBins b;
    for (double e = 0.2; e <= 2.0; e += 0.001) EXPECT_LE(std::abs(decode_intensity(encode_intensity(e, b), b) - e), 0.045 + 1e-12);
}

TEST(LightingBins, DefaultsAndValidation) {
    const LightingBins b;
    EXPECT_EQ(b.kd(), 36);
    EXPECT_EQ(b.ke(), 20);
    EXPECT_EQ(b.intensity_min(), 0.2);
    EXPECT_EQ(b.intensity_max(), 2.0);
    EXPECT_THROW(LightingBins(0, 20), DomainError);
    EXPECT_THROW(LightingBins(36, 20, 2.0, 0.2), DomainError);
}

TEST(MaxDeviation, ValuesAndMonotonicity) {
    EXPECT_EQ(max_deviation_angle(36), 2.5);
    EXPECT_EQ(max_deviation_angle(180), 0.5);
    EXPECT_EQ(max_deviation_angle(2), 45.0);
    for (int k = 1; k < 400; ++k) EXPECT_GT(max_deviation_angle(k), max_deviation_angle(k + 1));
}

TEST(CornerPerturbations, WorkedExamples) {
    auto cs = corner_perturbations({90, 0}, 36);
    const double expect[4][2] = {{87.5, -2.5}, {87.5, 2.5}, {92.5, -2.5}, {92.5, 2.5}};
    for (int k = 0; k < 4; ++k) EXPECT_LT(angle(cs[k].vec(), oracle_dir(expect[k][0], expect[k][1])), 1e-9);

    cs = corner_perturbations({0, -90}, 36);
    for (const auto& c : cs) {
        const auto s = dir_to_spherical(c);
        EXPECT_GE(s.elevation_deg, -90.0);
        EXPECT_LE(s.elevation_deg, -87.5 + 1e-9);
    }
    EXPECT_LT(angle(cs[0].vec(), oracle_dir(0, -90)), 1e-9);
    EXPECT_LT(angle(cs[3].vec(), oracle_dir(2.5, -87.5)), 1e-9);
}

TEST(CornerPerturbations, DistanceBoundOnOneDegreeGrid) {
    for (int kd : {36, 90, 180}) {
        const double bound = std::sqrt(2.0) * max_deviation_angle(kd) + 1e-6;
        for (double az = 0; az <= 180; az += 1)
            for (double el = -90; el <= 90; el += 1)
                for (const auto& c : corner_perturbations({az, el}, kd)) ASSERT_LE(angle(c.vec(), oracle_dir(az, el)), bound);
    }
}

TEST(Sampling, UniformHemisphereMeanZ) {
    Rng rng(11);
    const auto ds = sample_upper_hemisphere(rng, 1000);
    ASSERT_EQ(ds.size(), 1000u);
    double z = 0.0;
    for (const auto& d : ds) {
        EXPECT_GE(d.z(), 0.0);
        EXPECT_NEAR(d.vec().norm(), 1.0, 1e-12);
        z += d.z();
    }
    EXPECT_NEAR(z / 1000.0, 0.5, 0.05);
}

TEST(Sampling, SingleAndErrors) {
    Rng rng(1);
    EXPECT_EQ(sample_upper_hemisphere(rng, 1).size(), 1u);
    EXPECT_THROW(sample_upper_hemisphere(rng, 0), DomainError);
}

TEST(Sampling, ConeRestriction) {
    Rng rng(5);
    const auto axis = LightDirection::normalized({0.3, 0.2, 1.0});
    for (const auto& d : sample_upper_hemisphere(rng, 50, Cone{axis, 0.0})) EXPECT_LT(angle(d.vec(), axis.vec()), 1e-9);
    const auto ds = sample_upper_hemisphere(rng, 500, Cone{axis, 20.0});
    for (const auto& d : ds) {
        EXPECT_LE(angle(d.vec(), axis.vec()), 20.0 + 1e-9);
        EXPECT_GE(d.z(), 0.0);
    }
    // Uniform in the cap: the mean cosine to the axis is (1 + cos a) / 2.
    double c = 0.0;
    for (const auto& d : ds) c += d.vec().dot(axis.vec());
    EXPECT_NEAR(c / ds.size(), (1.0 + std::cos(20 * kDeg)) / 2.0, 0.005);
}

TEST(Sampling, DeterministicBySeed) {
    Rng a(9), b(9);
    const auto x = sample_upper_hemisphere(a, 20), y = sample_upper_hemisphere(b, 20);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(x[i].vec(), y[i].vec());
}
