// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pscal/image.hpp"

namespace pscal::metrics {

/// Mean angle in degrees between paired unit vectors (dot clamped to
/// [-1, 1]). Throws DomainError on empty or mismatched input.
double angular_mae_deg(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt);

/// Over the masked pixels, or all pixels when mask is null.
double angular_mae_deg(const NormalMap& pred, const NormalMap& gt, const Mask* mask);

/// Least-squares s minimizing sum (s e_i - gt_i)^2.
double intensity_scale_factor(std::span<const double> est, std::span<const double> gt);

/// Scale-invariant relative error: mean_i |s e_i - gt_i| / gt_i with the
/// least-squares s. Throws DomainError on non-positive values.
double intensity_relative_error(std::span<const double> est, std::span<const double> gt);

/// Per-channel ground truth: the scalar estimates are repeated to three
/// channels and the error is averaged over all 3q entries with one shared
/// scale factor.
double intensity_relative_error(std::span<const double> est, std::span<const Eigen::Vector3d> gt_rgb);

struct PerImage {
    double direction_err_deg = 0.0;
    double azimuth_err_deg = 0.0;
    double elevation_err_deg = 0.0;
    double est_intensity = 0.0;
    double gt_intensity = 0.0;
};

struct MetricReport {
    std::string object;
    std::optional<double> direction_mae_deg;
    std::optional<double> azimuth_mae_deg;
    std::optional<double> elevation_mae_deg;
    std::optional<double> intensity_rel_err;
    std::optional<double> normal_mae_deg;
    std::vector<PerImage> per_image;

    /// `key = value` lines; absent metrics are omitted.
    std::string to_key_value() const;
    static std::string csv_header();
    /// One CSV row matching csv_header(); absent metrics are empty fields.
    std::string csv_row() const;
};

void write_reports_csv(const std::filesystem::path& path, std::span<const MetricReport> reports);

/// Per-image lighting errors (direction, azimuth/elevation breakdown and
/// intensities) plus the aggregate MAE / relative error.
MetricReport lighting_report(std::span<const Eigen::Vector3d> est_dirs, std::span<const double> est_intensities,
                             std::span<const Eigen::Vector3d> gt_dirs, std::span<const double> gt_intensities);

}  // namespace pscal::metrics
