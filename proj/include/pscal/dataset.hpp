// SPDX-License-Identifier: Apache-2.0
//
// Synthetic training corpus: generation to disk and loading into memory.
//
// Every generated scene stores its BRDF and shape parameters in scene.txt,
// so evaluation can re-render it under fresh intensities and noise.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pscal/config.hpp"
#include "pscal/image.hpp"
#include "pscal/io.hpp"
#include "pscal/render.hpp"

namespace pscal {

/// Worker count: PS_SELFCAL_THREADS when set, else the hardware count.
int thread_count();
/// Runs fn(0..n-1) on up to thread_count() threads. The first exception
/// thrown by any task is rethrown after all workers stop.
void parallel_for(int n, const std::function<void(int)>& fn);

namespace render {

struct DatasetConfig {
    int scenes = 2000;
    int resolution = 32;
    int lights_per_scene = 16;
    double intensity_min = 0.2;
    double intensity_max = 2.0;
    /// Noise baked into the stored images; training adds its own on top.
    double noise_amplitude = 0.0;
    /// Fraction of spheres; the rest are Gaussian-bump blobs.
    double sphere_fraction = 0.25;
    std::vector<MaterialCategory> materials{MaterialCategory::lambertian, MaterialCategory::fabric,
                                            MaterialCategory::plastic, MaterialCategory::phenolic};
    io::ImageFormat format = io::ImageFormat::png16;
    std::uint64_t seed = 1;
    /// Restricts directions to a cone around the view axis when set.
    std::optional<double> cone_half_angle_deg;

    void validate() const;
    void write(KeyValueConfig& kv) const;
    static DatasetConfig read(const KeyValueConfig& kv);
};

/// Writes root/scene_NNNNN directories and root/manifest.txt. Throws IoError
/// when root cannot be created.
io::DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& root);

/// The scene of index i exactly as generate_dataset renders it.
struct SceneSpec {
    std::string kind;  // "sphere" or "blob"
    Scene scene;
    BrdfSpec brdf;
    MaterialCategory material = MaterialCategory::lambertian;
    std::vector<lightspace::LightSample> lights;
};
SceneSpec make_scene(const DatasetConfig& config, int index);

KeyValueConfig brdf_to_meta(const BrdfSpec& brdf, MaterialCategory material);
BrdfSpec brdf_from_meta(const KeyValueConfig& meta);

}  // namespace render

struct SceneRecord {
    std::string name;
    ImageStack stack;
    std::optional<render::BrdfSpec> brdf;
};

struct Dataset {
    io::DatasetManifest manifest;
    std::vector<SceneRecord> scenes;
};

/// Loads every scene of a manifest (the first `limit` when nonzero).
Dataset load_dataset(const std::filesystem::path& root, std::size_t limit = 0);

/// Deterministic split by name hash: true for roughly `fraction` of names.
bool is_validation_scene(const std::string& name, double fraction = 0.1);

}  // namespace pscal
