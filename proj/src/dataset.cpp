// SPDX-License-Identifier: Apache-2.0
#include "pscal/dataset.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "pscal/error.hpp"
#include "pscal/random.hpp"

namespace pscal {

namespace fs = std::filesystem;

int thread_count() {
    if (const char* env = std::getenv("PS_SELFCAL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
        spdlog::warn("ignoring PS_SELFCAL_THREADS='{}'", env);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace render {

void DatasetConfig::validate() const {
    if (scenes < 1) throw ConfigError("scenes must be >= 1");
    if (resolution < 8) throw ConfigError("resolution must be >= 8");
    if (lights_per_scene < 1 || lights_per_scene > 1024) throw ConfigError("lights_per_scene must lie in [1, 1024]");
    if (!(intensity_min > 0.0 && intensity_max >= intensity_min)) throw ConfigError("bad intensity range");
    if (!(noise_amplitude >= 0.0)) throw ConfigError("noise_amplitude must be >= 0");
    if (!(sphere_fraction >= 0.0 && sphere_fraction <= 1.0)) throw ConfigError("sphere_fraction must lie in [0, 1]");
    if (materials.empty()) throw ConfigError("materials must not be empty");
    if (cone_half_angle_deg && !(*cone_half_angle_deg >= 0.0 && *cone_half_angle_deg <= 90.0))
        throw ConfigError("cone_half_angle must lie in [0, 90]");
}

void DatasetConfig::write(KeyValueConfig& kv) const {
    kv.set("scenes", scenes);
    kv.set("resolution", resolution);
    kv.set("lights_per_scene", lights_per_scene);
    kv.set("intensity_min", intensity_min);
    kv.set("intensity_max", intensity_max);
    kv.set("noise_amplitude", noise_amplitude);
    kv.set("sphere_fraction", sphere_fraction);
    std::string mats;
    for (auto m : materials) mats += (mats.empty() ? "" : ",") + to_string(m);
    kv.set("materials", mats);
    kv.set("format", io::to_string(format));
    kv.set("seed", std::to_string(seed));
    if (cone_half_angle_deg) kv.set("cone_half_angle", *cone_half_angle_deg);
}

DatasetConfig DatasetConfig::read(const KeyValueConfig& kv) {
    DatasetConfig c;
    c.scenes = static_cast<int>(kv.get_int("scenes", c.scenes));
    c.resolution = static_cast<int>(kv.get_int("resolution", c.resolution));
    c.lights_per_scene = static_cast<int>(kv.get_int("lights_per_scene", c.lights_per_scene));
    c.intensity_min = kv.get_double("intensity_min", c.intensity_min);
    c.intensity_max = kv.get_double("intensity_max", c.intensity_max);
    c.noise_amplitude = kv.get_double("noise_amplitude", c.noise_amplitude);
    c.sphere_fraction = kv.get_double("sphere_fraction", c.sphere_fraction);
    if (kv.has("materials")) {
        c.materials.clear();
        for (const auto& m : kv.get_list("materials", {})) c.materials.push_back(parse_material_category(m));
    }
    if (kv.has("format")) c.format = io::parse_image_format(kv.require_string("format"));
    c.seed = kv.get_uint("seed", c.seed);
    if (kv.has("cone_half_angle")) c.cone_half_angle_deg = kv.get_double("cone_half_angle", 90.0);
    c.validate();
    return c;
}

KeyValueConfig brdf_to_meta(const BrdfSpec& brdf, MaterialCategory material) {
    KeyValueConfig kv;
    kv.set("brdf", std::string(brdf.kind == BrdfKind::lambertian ? "lambertian" : "blinn_phong"));
    kv.set("material", to_string(material));
    kv.set("albedo_r", brdf.albedo[0]);
    kv.set("albedo_g", brdf.albedo[1]);
    kv.set("albedo_b", brdf.albedo[2]);
    kv.set("specular_strength", brdf.specular_strength);
    kv.set("shininess", brdf.shininess);
    return kv;
}

BrdfSpec brdf_from_meta(const KeyValueConfig& meta) {
    const Eigen::Array3d albedo(meta.get_double("albedo_r", 1.0), meta.get_double("albedo_g", 1.0),
                                meta.get_double("albedo_b", 1.0));
    const std::string kind = meta.require_string("brdf");
    BrdfSpec b;
    if (kind == "lambertian") b = lambertian(albedo);
    else if (kind == "blinn_phong")
        b = blinn_phong(albedo, meta.get_double("specular_strength", 0.0), meta.get_double("shininess", 1.0));
    else throw FormatError("unknown brdf '" + kind + "' in scene metadata");
    b.validate();
    return b;
}

SceneSpec make_scene(const DatasetConfig& config, int index) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(index)));
    SceneSpec s;
    if (uniform01(rng) < config.sphere_fraction) {
        s.kind = "sphere";
        s.scene = sphere_scene(config.resolution);
    } else {
        s.kind = "blob";
        const int min_pixels = std::max(16, config.resolution * config.resolution / 16);
        do {
            s.scene = heightmap_scene(random_blob(rng), config.resolution);
        } while (s.scene.mask.count() < min_pixels);
    }
    s.material = config.materials[uniform_index(rng, config.materials.size())];
    s.brdf = random_brdf(rng, s.material);
    std::optional<lightspace::Cone> cone;
    if (config.cone_half_angle_deg)
        cone = lightspace::Cone{lightspace::LightDirection::normalized(Eigen::Vector3d::UnitZ()), *config.cone_half_angle_deg};
    s.lights = random_lights(rng, config.lights_per_scene, config.intensity_min, config.intensity_max, cone);
    return s;
}

io::DatasetManifest generate_dataset(const DatasetConfig& config, const fs::path& root) {
    config.validate();
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) throw IoError("cannot create dataset directory " + root.string());

    io::DatasetManifest manifest;
    manifest.root = root;
    manifest.scenes.resize(config.scenes);
    parallel_for(config.scenes, [&](int i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%05d", i);
        const SceneSpec s = make_scene(config, i);
        Rng noise(derive_seed(config.seed ^ 0x6e6f697365ULL, static_cast<std::uint64_t>(i)));
        const ImageStack stack = render_stack(s.scene, s.brdf, s.lights, config.noise_amplitude, noise);
        KeyValueConfig meta = brdf_to_meta(s.brdf, s.material);
        meta.set("shape", s.kind);
        meta.set("index", i);
        io::write_scene(root / name, stack, config.format, meta);
        manifest.scenes[i] = name;
    });
    KeyValueConfig frozen;
    config.write(frozen);
    frozen.save(root / "dataset_config.txt");
    manifest.hash = manifest.compute_hash();
    manifest.save();
    spdlog::info("wrote {} scenes to {} (hash {})", config.scenes, root.string(), manifest.hash);
    return manifest;
}

}  // namespace render

Dataset load_dataset(const fs::path& root, std::size_t limit) {
    Dataset ds;
    ds.manifest = io::DatasetManifest::load(root);
    std::size_t n = ds.manifest.scenes.size();
    if (limit > 0) n = std::min(n, limit);
    ds.scenes.resize(n);
    parallel_for(static_cast<int>(n), [&](int i) {
        io::LoadedScene s = io::read_diligent_layout(root / ds.manifest.scenes[i]);
        SceneRecord& r = ds.scenes[i];
        r.name = ds.manifest.scenes[i];
        r.stack = std::move(s.stack);
        if (s.meta && s.meta->has("brdf")) r.brdf = render::brdf_from_meta(*s.meta);
    });
    return ds;
}

bool is_validation_scene(const std::string& name, double fraction) {
    Fnv1a h;
    h.update(name);
    return static_cast<double>(h.digest() % 10000) < fraction * 10000.0;
}

}  // namespace pscal
