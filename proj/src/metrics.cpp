// SPDX-License-Identifier: Apache-2.0
#include "pscal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pscal/error.hpp"
#include "pscal/lightspace.hpp"

namespace pscal::metrics {

double angular_mae_deg(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
    if (pred.empty() || pred.size() != gt.size()) throw DomainError("angular MAE needs paired, non-empty inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += lightspace::angle_between_deg(pred[i], gt[i]);
    return s / static_cast<double>(pred.size());
}

double angular_mae_deg(const NormalMap& pred, const NormalMap& gt, const Mask* mask) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) throw DomainError("normal maps differ in shape");
    if (mask && (mask->height() != pred.height() || mask->width() != pred.width()))
        throw DomainError("mask does not match the normal maps");
    double s = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            if (mask && !(*mask)(y, x)) continue;
            s += lightspace::angle_between_deg(pred.at(y, x), gt.at(y, x));
            ++n;
        }
    if (n == 0) throw DomainError("angular MAE over an empty mask");
    return s / static_cast<double>(n);
}

namespace {

void check_positive(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + " intensities must be positive");
}

}  // namespace

double intensity_scale_factor(std::span<const double> est, std::span<const double> gt) {
    if (est.empty() || est.size() != gt.size()) throw DomainError("intensity error needs paired, non-empty inputs");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        num += est[i] * gt[i];
        den += est[i] * est[i];
    }
    return num / den;
}

double intensity_relative_error(std::span<const double> est, std::span<const double> gt) {
    if (est.empty() || est.size() != gt.size()) throw DomainError("intensity error needs paired, non-empty inputs");
    check_positive(est, "estimated");
    check_positive(gt, "ground-truth");
    const double s = intensity_scale_factor(est, gt);
    double err = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) err += std::abs(s * est[i] - gt[i]) / gt[i];
    return err / static_cast<double>(est.size());
}

double intensity_relative_error(std::span<const double> est, std::span<const Eigen::Vector3d> gt_rgb) {
    if (est.size() != gt_rgb.size()) throw DomainError("intensity error needs paired inputs");
    std::vector<double> e3, g3;
    for (std::size_t i = 0; i < est.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            e3.push_back(est[i]);
            g3.push_back(gt_rgb[i][c]);
        }
    return intensity_relative_error(e3, g3);
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string MetricReport::to_key_value() const {
    std::string out = "object = " + object + "\n";
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) out += std::string(key) + " = " + fmt(*v) + "\n";
    };
    put("direction_mae_deg", direction_mae_deg);
    put("azimuth_mae_deg", azimuth_mae_deg);
    put("elevation_mae_deg", elevation_mae_deg);
    put("intensity_rel_err", intensity_rel_err);
    put("normal_mae_deg", normal_mae_deg);
    if (!per_image.empty()) out += "images = " + std::to_string(per_image.size()) + "\n";
    return out;
}

std::string MetricReport::csv_header() {
    return "object,direction_mae_deg,azimuth_mae_deg,elevation_mae_deg,intensity_rel_err,normal_mae_deg,images";
}

std::string MetricReport::csv_row() const {
    return object + "," + opt(direction_mae_deg) + "," + opt(azimuth_mae_deg) + "," + opt(elevation_mae_deg) + "," +
           opt(intensity_rel_err) + "," + opt(normal_mae_deg) + "," + std::to_string(per_image.size());
}

void write_reports_csv(const std::filesystem::path& path, std::span<const MetricReport> reports) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << MetricReport::csv_header() << "\n";
    for (const auto& r : reports) out << r.csv_row() << "\n";
}

MetricReport lighting_report(std::span<const Eigen::Vector3d> est_dirs, std::span<const double> est_intensities,
                             std::span<const Eigen::Vector3d> gt_dirs, std::span<const double> gt_intensities) {
    if (est_dirs.size() != gt_dirs.size() || est_intensities.size() != gt_intensities.size() ||
        est_dirs.size() != est_intensities.size())
        throw DomainError("lighting report needs paired inputs");
    MetricReport r;
    r.direction_mae_deg = angular_mae_deg(est_dirs, gt_dirs);
    r.intensity_rel_err = intensity_relative_error(est_intensities, gt_intensities);
    double az = 0.0, el = 0.0;
    for (std::size_t i = 0; i < est_dirs.size(); ++i) {
        PerImage p;
        p.direction_err_deg = lightspace::angle_between_deg(est_dirs[i], gt_dirs[i]);
        const auto se = lightspace::dir_to_spherical(lightspace::LightDirection::normalized(est_dirs[i]));
        const auto sg = lightspace::dir_to_spherical(lightspace::LightDirection::normalized(gt_dirs[i]));
        p.azimuth_err_deg = std::abs(se.azimuth_deg - sg.azimuth_deg);
        p.elevation_err_deg = std::abs(se.elevation_deg - sg.elevation_deg);
        p.est_intensity = est_intensities[i];
        p.gt_intensity = gt_intensities[i];
        az += p.azimuth_err_deg;
        el += p.elevation_err_deg;
        r.per_image.push_back(p);
    }
    r.azimuth_mae_deg = az / static_cast<double>(est_dirs.size());
    r.elevation_mae_deg = el / static_cast<double>(est_dirs.size());
    return r;
}

}  // namespace pscal::metrics
