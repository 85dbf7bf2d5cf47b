// SPDX-License-Identifier: Apache-2.0
//
// Image files and the on-disk scene layout.
//
// A scene directory follows the DiLiGenT convention:
//
//     filenames.txt          one image file name per line
//     light_directions.txt   "x y z" per line
//     light_intensities.txt  scalar or "r g b" per line
//     mask.png               nonzero = foreground
//     normal.pfm             optional ground-truth normals in [-1, 1]
//     scene.txt              optional key = value metadata (synthetic scenes)
//
// A dataset is a directory of scene directories plus manifest.txt.
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pscal/config.hpp"
#include "pscal/image.hpp"

namespace pscal::io {

namespace fs = std::filesystem;

enum class ImageFormat { png16, pfm };

ImageFormat parse_image_format(const std::string& s);
std::string to_string(ImageFormat f);

/// The float a value decodes to after a 16-bit PNG roundtrip.
float quantize16(float v);

/// 8- or 16-bit gray/RGB(A) PNG scaled to [0, 1]; alpha is dropped.
/// With srgb set, values are linearized with the sRGB transfer curve.
Image read_png(const fs::path& path, bool srgb = false);
/// 16-bit PNG, values clamped to [0, 1].
void write_png16(const fs::path& path, const Image& img);

/// Portable float map (1 or 3 channels), bit-exact roundtrip.
Image read_pfm(const fs::path& path);
void write_pfm(const fs::path& path, const Image& img);

/// Dispatches on the extension (.png / .pfm).
Image read_image(const fs::path& path, bool srgb = false);

Mask read_mask(const fs::path& path);
void write_mask(const fs::path& path, const Mask& mask);

/// Whitespace-separated numbers, `per_line` values per non-empty line.
/// Throws FormatError naming the file on malformed lines.
std::vector<std::vector<double>> read_table(const fs::path& path);

struct ReadOptions {
    bool srgb = false;
    /// File with 0-based image indices (one per line) selecting a subset.
    std::optional<fs::path> index_list;
};

struct LoadedScene {
    std::string name;
    ImageStack stack;
    /// Ground-truth intensities as given (scalars repeated to 3 channels).
    std::vector<Eigen::Vector3d> intensities_rgb;
    std::optional<KeyValueConfig> meta;
};

/// Throws FormatError on count mismatches (naming the offending file) and
/// IoError on a missing mask or unreadable files.
LoadedScene read_diligent_layout(const fs::path& dir, const ReadOptions& options = {});

/// Writes a stack (lights required) in the scene layout. With png16 the
/// stored values are quantize16(v).
void write_scene(const fs::path& dir, const ImageStack& stack, ImageFormat format,
                 const std::optional<KeyValueConfig>& meta = std::nullopt);

/// Content hash over every file of a scene directory, in name order.
std::string hash_scene(const fs::path& dir);

struct DatasetManifest {
    fs::path root;
    std::vector<std::string> scenes;
    std::string hash;

    /// Reads root/manifest.txt and checks that every scene directory exists.
    static DatasetManifest load(const fs::path& root);
    void save() const;
    /// Hash over all scenes in manifest order.
    std::string compute_hash() const;
    /// Throws FormatError if a scene is missing a file or has mismatched counts.
    void validate() const;
};

inline constexpr const char* kManifestHeader = "ps-selfcal-dataset-v1";

}  // namespace pscal::io
