// SPDX-License-Identifier: Apache-2.0
//
// ps-selfcal <render|train|eval|study> [--config PATH] [--seed N] [--out DIR]
//            [--ckpt PATH ...] [--dataset DIR]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pscal/dataset.hpp"
#include "pscal/lightspace.hpp"

namespace pscal::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct Options {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    fs::path out = ".";
    std::vector<fs::path> ckpts;
    std::optional<fs::path> dataset;
};

int cmd_render(const Options& opt);
int cmd_train(const Options& opt);
int cmd_eval(const Options& opt);
/// name: discretization, image_count, ablation_table1 or ablation_table2.
int cmd_study(const std::string& name, const Options& opt);

/// Parses arguments, dispatches, and maps exceptions to exit codes.
int run(int argc, char** argv);

/// A manifest root, or a single scene directory in the DiLiGenT layout.
Dataset load_any_dataset(const fs::path& path, const io::ReadOptions& options = {});

// Plots ---------------------------------------------------------------------

struct Series {
    std::string label;
    std::vector<double> x, y;
};

/// Line plot with markers; one colour per series.
void write_curve_svg(const fs::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<Series>& series);

/// Light directions drawn at (x, y) on the unit disk, colour = intensity
/// normalized by the maximum. A second set, when given, is drawn as rings.
void write_light_svg(const fs::path& path, const std::string& title, const std::vector<lightspace::LightSample>& lights,
                     const std::vector<lightspace::LightSample>& reference = {});

}  // namespace pscal::cli
