// SPDX-License-Identifier: Apache-2.0
#include "pscal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "pscal/error.hpp"
#include "pscal/losses.hpp"
#include "pscal/nn/adam.hpp"
#include "pscal/random.hpp"

namespace pscal::pipeline {

using lightspace::LightSample;
using models::LcNet;
using models::NeNet;
using models::UpsFcn;
using nn::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string to_string(Phase p) {
    switch (p) {
        case Phase::lcnet: return "lcnet";
        case Phase::nenet: return "nenet";
        case Phase::lcnet_reg: return "lcnet_reg";
        case Phase::ups_fcn: return "ups_fcn";
    }
    return "?";
}

Phase parse_phase(const std::string& s) {
    if (s == "lcnet") return Phase::lcnet;
    if (s == "nenet") return Phase::nenet;
    if (s == "lcnet_reg") return Phase::lcnet_reg;
    if (s == "ups_fcn") return Phase::ups_fcn;
    throw ConfigError("unknown phase '" + s + "' (expected lcnet, nenet, lcnet_reg or ups_fcn)");
}

// TrainConfig ---------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr_halving_period_epochs < 1) throw ConfigError("lr_halving_period_epochs must be >= 1");
    if (q_per_sample < 1) throw ConfigError("q_per_sample must be >= 1");
    if (!(noise_amplitude >= 0.0)) throw ConfigError("noise_amplitude must be >= 0");
    if (!(intensity_min > 0.0 && intensity_max >= intensity_min)) throw ConfigError("bad intensity range");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation_fraction must lie in [0, 1)");
    if (max_scenes < 0) throw ConfigError("max_scenes must be >= 0");
    if (kd < 1 || ke < 1) throw ConfigError("kd and ke must be >= 1");
    lcnet_config().validate();
    nenet_config().validate();
    ups_fcn_config().validate();
}

void TrainConfig::write(KeyValueConfig& kv) const {
    kv.set("phase", to_string(phase));
    kv.set("variant", variant);
    kv.set("epochs", epochs);
    kv.set("batch_size", batch_size);
    kv.set("learning_rate", learning_rate);
    kv.set("lr_halving_period_epochs", lr_halving_period_epochs);
    kv.set("seed", std::to_string(seed));
    kv.set("q_per_sample", q_per_sample);
    kv.set("noise_amplitude", noise_amplitude);
    kv.set("intensity_min", intensity_min);
    kv.set("intensity_max", intensity_max);
    kv.set("dataset", dataset.string());
    kv.set("validation_fraction", validation_fraction);
    kv.set("max_scenes", max_scenes);
    kv.set("base_channels", base_channels);
    kv.set("kd", kd);
    kv.set("ke", ke);
    kv.set("input_resolution", input_resolution);
    kv.set("use_mask", use_mask);
    kv.set("use_global", use_global);
    kv.set("deep_layers", deep_layers);
    kv.set("gt_lights", gt_lights);
}

TrainConfig TrainConfig::defaults(Phase phase) {
    TrainConfig c;
    c.phase = phase;
    c.variant = to_string(phase);
    switch (phase) {
        case Phase::lcnet:
        case Phase::lcnet_reg:
            c.epochs = 20;
            c.batch_size = 32;
            c.lr_halving_period_epochs = 5;
            break;
        case Phase::nenet:
        case Phase::ups_fcn:
            c.epochs = 10;
            c.batch_size = 16;
            c.lr_halving_period_epochs = 2;
            break;
    }
    return c;
}

TrainConfig TrainConfig::read(const KeyValueConfig& kv) {
    TrainConfig c = defaults(parse_phase(kv.get_string("phase", "lcnet")));
    c.variant = kv.get_string("variant", c.variant);
    c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
    c.lr_halving_period_epochs = static_cast<int>(kv.get_int("lr_halving_period_epochs", c.lr_halving_period_epochs));
    c.seed = kv.get_uint("seed", c.seed);
    c.q_per_sample = static_cast<int>(kv.get_int("q_per_sample", c.q_per_sample));
    c.noise_amplitude = kv.get_double("noise_amplitude", c.noise_amplitude);
    c.intensity_min = kv.get_double("intensity_min", c.intensity_min);
    c.intensity_max = kv.get_double("intensity_max", c.intensity_max);
    c.dataset = kv.get_string("dataset", c.dataset.string());
    c.validation_fraction = kv.get_double("validation_fraction", c.validation_fraction);
    c.max_scenes = static_cast<int>(kv.get_int("max_scenes", c.max_scenes));
    c.base_channels = static_cast<int>(kv.get_int("base_channels", c.base_channels));
    c.kd = static_cast<int>(kv.get_int("kd", c.kd));
    c.ke = static_cast<int>(kv.get_int("ke", c.ke));
    c.input_resolution = static_cast<int>(kv.get_int("input_resolution", c.input_resolution));
    c.use_mask = kv.get_bool("use_mask", c.use_mask);
    c.use_global = kv.get_bool("use_global", c.use_global);
    c.deep_layers = static_cast<int>(kv.get_int("deep_layers", c.deep_layers));
    c.gt_lights = kv.get_bool("gt_lights", c.gt_lights);
    c.validate();
    return c;
}

models::LcNetConfig TrainConfig::lcnet_config() const {
    models::LcNetConfig c;
    c.bins = lightspace::LightingBins(kd, ke, intensity_min, intensity_max);
    c.base_channels = base_channels;
    c.use_mask = use_mask;
    c.use_global = use_global;
    c.head = phase == Phase::lcnet_reg ? models::LightingHead::regression : models::LightingHead::classification;
    c.input_resolution = input_resolution;
    return c;
}

models::NeNetConfig TrainConfig::nenet_config() const {
    models::NeNetConfig c;
    c.base_channels = base_channels;
    return c;
}

models::UpsFcnConfig TrainConfig::ups_fcn_config() const {
    models::UpsFcnConfig c;
    c.base_channels = base_channels;
    c.use_mask = use_mask;
    c.deep_layers = deep_layers;
    return c;
}

double learning_rate_at(const TrainConfig& config, int epoch) {
    return config.learning_rate * std::pow(0.5, std::floor(static_cast<double>(epoch) / config.lr_halving_period_epochs));
}

namespace {

// Parameter names and shapes of the model a config builds, so a changed
// architecture never matches an old checkpoint.
std::string parameter_layout(const TrainConfig& config) {
    auto describe = [](std::vector<nn::Parameter*> ps) {
        std::string out;
        for (const auto* p : ps)
            out += p->name + ":" + std::to_string(p->value.n) + "x" + std::to_string(p->value.c) + "x" +
                   std::to_string(p->value.h) + "x" + std::to_string(p->value.w) + ";";
        return out;
    };
    switch (config.phase) {
        case Phase::lcnet:
        case Phase::lcnet_reg: {
            models::LcNet m(config.lcnet_config(), 0);
            return describe(m.parameters());
        }
        case Phase::nenet: {
            models::NeNet m(config.nenet_config(), 0);
            return describe(m.parameters());
        }
        case Phase::ups_fcn: {
            models::UpsFcn m(config.ups_fcn_config(), 0);
            return describe(m.parameters());
        }
    }
    return {};
}

}  // namespace

std::string train_signature(const TrainConfig& config, const std::string& dataset_hash, const std::string& upstream_hash) {
    TrainConfig c = config;
    c.dataset.clear();
    KeyValueConfig kv;
    c.write(kv);
    Fnv1a h;
    h.update(kv.to_string());
    h.update(parameter_layout(config));
    h.update(dataset_hash);
    h.update(upstream_hash);
    return h.hex();
}

bool checkpoint_matches(const fs::path& checkpoint, const std::string& signature) {
    if (!fs::exists(checkpoint)) return false;
    try {
        return models::Checkpoint::load(checkpoint).header.get_string("signature", "") == signature;
    } catch (const std::exception&) {
        return false;
    }
}

// Training ------------------------------------------------------------------

namespace {

/// q images of one scene with fresh noise on the foreground.
ImageStack draw_sample(const SceneRecord& scene, int q, double noise, Rng& rng) {
    const ImageStack& src = scene.stack;
    const int total = src.count();
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < std::min(q, total); ++i) std::swap(order[i], order[i + uniform_index(rng, total - i)]);
    ImageStack s;
    s.mask = src.mask;
    s.normals = src.normals;
    s.lights.emplace();
    for (int k = 0; k < q; ++k) {
        const int idx = k < total ? order[k] : static_cast<int>(uniform_index(rng, total));
        Image img = src.images[idx];
        if (noise > 0.0)
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x) {
                    if (!s.mask(y, x)) continue;
                    for (int c = 0; c < img.channels(); ++c)
                        img.at(y, x, c) = static_cast<float>(std::clamp(img.at(y, x, c) + uniform(rng, -noise, noise), 0.0, 1.0));
                }
        s.images.push_back(std::move(img));
        s.lights->push_back((*src.lights)[idx]);
    }
    return s;
}

void append_items(Tensor& dst, int& offset, const Tensor& src) {
    std::memcpy(dst.data.data() + static_cast<std::size_t>(offset) * dst.item_size(), src.data.data(),
                src.size() * sizeof(float));
    offset += src.n;
}

struct Split {
    std::vector<int> train, validation;
};

Split split_scenes(const Dataset& data, const TrainConfig& config) {
    Split s;
    const int n = config.max_scenes > 0 ? std::min<int>(config.max_scenes, data.scenes.size()) : data.scenes.size();
    for (int i = 0; i < n; ++i) {
        const auto& sc = data.scenes[i];
        if (!sc.stack.lights) throw ConfigError("scene " + sc.name + " has no ground-truth lights");
        (is_validation_scene(sc.name, config.validation_fraction) ? s.validation : s.train).push_back(i);
    }
    if (s.train.empty()) throw ConfigError("no training scenes");
    if (s.validation.empty()) s.validation.push_back(s.train.back());
    return s;
}

void require_normals(const Dataset& data, const Split& split) {
    for (const auto* v : {&split.train, &split.validation})
        for (int i : *v)
            if (!data.scenes[i].stack.normals) throw ConfigError("scene " + data.scenes[i].name + " has no normals");
}

void check_finite(double loss, int epoch, long step) {
    if (!std::isfinite(loss))
        throw NumericError("training diverged: loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step) + " (try a lower learning rate)");
}

std::vector<double> row(const Tensor& t, int i) {
    const std::size_t k = t.item_size();
    return {t.data.begin() + i * k, t.data.begin() + (i + 1) * k};
}

int argmax(const std::vector<double>& v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); }

/// Loss, per-item direction errors and gradients of one lighting batch.
struct LightingBatch {
    double loss = 0.0;
    double direction_err_sum = 0.0;
    LcNet::Gradient grad;
};

LightingBatch lighting_loss(const LcNet& model, const LcNet::Output& out, const std::vector<LightSample>& gt) {
    const auto& cfg = model.config();
    const int n = static_cast<int>(gt.size());
    LightingBatch b;
    if (cfg.head == models::LightingHead::classification) {
        std::vector<losses::LightingScores> scores(n);
        std::vector<lightspace::LightingClass> targets(n);
        for (int i = 0; i < n; ++i) {
            scores[i] = {row(out.azimuth, i), row(out.elevation, i), row(out.intensity, i)};
            targets[i] = lightspace::encode(gt[i], cfg.bins);
            const auto est = lightspace::decode_direction({argmax(scores[i].azimuth), argmax(scores[i].elevation)}, cfg.bins);
            b.direction_err_sum += lightspace::angle_between_deg(est.vec(), gt[i].direction.vec());
        }
        const auto l = losses::light_classification_loss(scores, targets);
        b.loss = l.value;
        b.grad.azimuth = Tensor(n, cfg.bins.kd(), 1, 1);
        b.grad.elevation = Tensor(n, cfg.bins.kd(), 1, 1);
        b.grad.intensity = Tensor(n, cfg.bins.ke(), 1, 1);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < cfg.bins.kd(); ++k) {
                b.grad.azimuth.data[i * cfg.bins.kd() + k] = static_cast<float>(l.grad[i].azimuth[k]);
                b.grad.elevation.data[i * cfg.bins.kd() + k] = static_cast<float>(l.grad[i].elevation[k]);
            }
            for (int k = 0; k < cfg.bins.ke(); ++k)
                b.grad.intensity.data[i * cfg.bins.ke() + k] = static_cast<float>(l.grad[i].intensity[k]);
        }
    } else {
        std::vector<Eigen::Vector3d> dirs(n);
        std::vector<double> values(n);
        for (int i = 0; i < n; ++i) {
            dirs[i] = {out.direction.data[3 * i], out.direction.data[3 * i + 1], out.direction.data[3 * i + 2]};
            values[i] = out.intensity_value.data[i];
            b.direction_err_sum += lightspace::angle_between_deg(dirs[i], gt[i].direction.vec());
        }
        const auto l = losses::regression_light_loss(dirs, values, gt);
        b.loss = l.value;
        b.grad.direction = Tensor(n, 3, 1, 1);
        b.grad.intensity_value = Tensor(n, 1, 1, 1);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) b.grad.direction.data[3 * i + k] = static_cast<float>(l.grad_direction[i][k]);
            b.grad.intensity_value.data[i] = static_cast<float>(l.grad_intensity[i]);
        }
    }
    return b;
}

struct LightingInputs {
    Tensor input;
    std::vector<LightSample> lights;
};

LightingInputs lighting_batch(const std::vector<ImageStack>& samples, const models::LcNetConfig& cfg) {
    int total = 0;
    for (const auto& s : samples) total += s.count();
    const int r = cfg.input_resolution;
    LightingInputs b{Tensor(total, cfg.input_channels(), r, r), {}};
    int offset = 0;
    for (const auto& s : samples) {
        append_items(b.input, offset, models::lcnet_input(s, cfg));
        b.lights.insert(b.lights.end(), s.lights->begin(), s.lights->end());
    }
    return b;
}

/// Planar double copy of item i of a (B, 3, H, W) tensor.
std::vector<double> planar(const Tensor& t, int i) {
    const auto s = t.item(i);
    return {s.begin(), s.end()};
}

std::vector<double> planar(const NormalMap& m) {
    const std::size_t p = m.normals.pixel_count();
    std::vector<double> v(3 * p);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            for (int c = 0; c < 3; ++c) v[c * p + static_cast<std::size_t>(y) * m.width() + x] = m.normals.at(y, x, c);
    return v;
}

std::vector<std::uint8_t> mask_bits(const Mask& m) { return {m.bits().begin(), m.bits().end()}; }

void save_checkpoint(models::Checkpoint ck, const TrainConfig& config, const std::string& signature,
                     const std::string& dataset_hash, int epoch, double val_loss, double val_mae,
                     const fs::path& path) {
    KeyValueConfig train;
    config.write(train);
    for (const auto& [k, v] : train.entries()) ck.header.set("train." + k, v);
    ck.header.set("variant", config.variant);
    ck.header.set("signature", signature);
    ck.header.set("dataset_hash", dataset_hash);
    ck.header.set("epoch", epoch);
    ck.header.set("validation_loss", val_loss);
    ck.header.set("validation_mae_deg", val_mae);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    ck.save(path);
}

/// Deterministic validation samples: first q lights, fixed noise.
std::vector<ImageStack> validation_samples(const Dataset& data, const std::vector<int>& idx, const TrainConfig& config) {
    std::vector<ImageStack> out;
    Rng rng(derive_seed(config.seed, 0x76616c));
    for (int i : idx) out.push_back(draw_sample(data.scenes[i], config.q_per_sample, config.noise_amplitude, rng));
    return out;
}

void log_epoch(const std::string& what, const EpochLog& e) {
    spdlog::info("{} epoch {} lr {:.2e} train {:.4f} val {:.4f} val_mae {:.2f} deg ({:.1f} s)", what, e.epoch,
                 e.learning_rate, e.train_loss, e.validation_loss, e.validation_mae_deg, e.seconds);
}

}  // namespace

TrainResult train_lcnet(const TrainConfig& config, const Dataset& data, const fs::path& checkpoint) {
    config.validate();
    if (config.phase != Phase::lcnet && config.phase != Phase::lcnet_reg)
        throw ConfigError("train_lcnet needs phase lcnet or lcnet_reg");
    const Split split = split_scenes(data, config);
    const std::string signature = train_signature(config, data.manifest.hash);
    LcNet model(config.lcnet_config(), derive_seed(config.seed, 1));
    nn::Adam adam(model.parameters());
    Rng rng(derive_seed(config.seed, 2));
    const auto val = validation_samples(data, split.validation, config);
    const int q = config.q_per_sample;

    TrainResult result;
    result.checkpoint = checkpoint;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> order = split.train;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = Clock::now();
        EpochLog log;
        log.epoch = epoch;
        log.learning_rate = learning_rate_at(config, epoch);
        pscal::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<ImageStack> samples;
            for (std::size_t k = start; k < end; ++k)
                samples.push_back(draw_sample(data.scenes[order[k]], q, config.noise_amplitude, rng));
            const auto batch = lighting_batch(samples, model.config());
            adam.zero_grad();
            const auto out = model.forward(batch.input, q, true);
            const auto l = lighting_loss(model, out, batch.lights);
            check_finite(l.loss, epoch, adam.steps());
            model.backward(l.grad);
            adam.step(log.learning_rate);
            loss_sum += l.loss;
            ++batches;
        }
        log.train_loss = loss_sum / batches;

        double vloss = 0.0, verr = 0.0;
        int vcount = 0;
        for (std::size_t start = 0; start < val.size(); start += config.batch_size) {
            const std::vector<ImageStack> chunk(val.begin() + start, val.begin() + std::min(val.size(), start + config.batch_size));
            const auto batch = lighting_batch(chunk, model.config());
            const auto l = lighting_loss(model, model.forward(batch.input, q, false), batch.lights);
            vloss += l.loss * batch.lights.size();
            verr += l.direction_err_sum;
            vcount += static_cast<int>(batch.lights.size());
        }
        log.validation_loss = vloss / vcount;
        log.validation_mae_deg = verr / vcount;
        log.seconds = seconds_since(t0);
        log_epoch(config.variant, log);
        result.log.push_back(log);
        if (log.validation_loss < best) {
            best = log.validation_loss;
            result.best_epoch = epoch;
            save_checkpoint(models::save_lcnet(model), config, signature, data.manifest.hash, epoch,
                            log.validation_loss, log.validation_mae_deg, checkpoint);
        }
    }
    result.final_train_loss = result.log.back().train_loss;
    result.checkpoint_hash = hash_file(checkpoint);
    return result;
}

TrainResult train_lcnet(const TrainConfig& config, const fs::path& checkpoint) {
    return train_lcnet(config, load_dataset(config.dataset), checkpoint);
}

namespace {

/// Shared loop of the two normal-map phases. `estimate` fills the lights
/// each sample is fed with; `net` runs forward/backward on a batch.
template <class Net, class MakeInput>
TrainResult train_normals(const TrainConfig& config, const Dataset& data, Net& model, const std::string& signature,
                          const std::function<std::vector<std::vector<LightSample>>(const std::vector<ImageStack>&)>& lights_for,
                          MakeInput make_input, const std::function<models::Checkpoint()>& snapshot,
                          const fs::path& checkpoint) {
    const Split split = split_scenes(data, config);
    require_normals(data, split);
    for (const auto& s : data.scenes)
        if (s.stack.height() % 4 != 0 || s.stack.width() % 4 != 0)
            throw ConfigError("normal networks train on scenes whose size is a multiple of 4 (" + s.name + ")");
    nn::Adam adam(model.parameters());
    Rng rng(derive_seed(config.seed, 2));
    const auto val = validation_samples(data, split.validation, config);
    const auto val_lights = lights_for(val);
    const int q = config.q_per_sample;

    auto batch_input = [&](const std::vector<ImageStack>& samples, const std::vector<std::vector<LightSample>>& lights) {
        Tensor first = make_input(samples[0], lights[0]);
        Tensor in(static_cast<int>(samples.size()) * q, first.c, first.h, first.w);
        int offset = 0;
        append_items(in, offset, first);
        for (std::size_t k = 1; k < samples.size(); ++k) append_items(in, offset, make_input(samples[k], lights[k]));
        return in;
    };
    // Mean cosine loss over the batch; fills the gradient tensor.
    auto batch_loss = [&](const std::vector<ImageStack>& samples, const Tensor& pred, Tensor* grad, double* mae_sum) {
        double total = 0.0;
        const double inv = 1.0 / samples.size();
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const auto& s = samples[k];
            const auto gt = planar(*s.normals);
            const auto bits = mask_bits(s.mask);
            const auto p = planar(pred, static_cast<int>(k));
            const auto l = losses::normal_cosine_loss(p, gt, bits);
            total += l.value * inv;
            if (grad)
                for (std::size_t j = 0; j < l.grad.size(); ++j)
                    grad->data[k * grad->item_size() + j] = static_cast<float>(l.grad[j] * inv);
            if (mae_sum)
                *mae_sum += metrics::angular_mae_deg(models::to_normal_map(pred, static_cast<int>(k), s.height(), s.width()),
                                                     *s.normals, &s.mask);
        }
        return total;
    };

    TrainResult result;
    result.checkpoint = checkpoint;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> order = split.train;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = Clock::now();
        EpochLog log;
        log.epoch = epoch;
        log.learning_rate = learning_rate_at(config, epoch);
        pscal::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<ImageStack> samples;
            for (std::size_t k = start; k < end; ++k)
                samples.push_back(draw_sample(data.scenes[order[k]], q, config.noise_amplitude, rng));
            const Tensor in = batch_input(samples, lights_for(samples));
            adam.zero_grad();
            const Tensor pred = model.forward(in, q, true);
            Tensor grad(pred.n, pred.c, pred.h, pred.w);
            const double loss = batch_loss(samples, pred, &grad, nullptr);
            check_finite(loss, epoch, adam.steps());
            model.backward(grad);
            adam.step(log.learning_rate);
            loss_sum += loss;
            ++batches;
        }
        log.train_loss = loss_sum / batches;

        double vloss = 0.0, vmae = 0.0;
        for (std::size_t start = 0; start < val.size(); start += config.batch_size) {
            const std::size_t end = std::min(val.size(), start + config.batch_size);
            const std::vector<ImageStack> chunk(val.begin() + start, val.begin() + end);
            const std::vector<std::vector<LightSample>> lights(val_lights.begin() + start, val_lights.begin() + end);
            const Tensor pred = model.forward(batch_input(chunk, lights), q, false);
            vloss += batch_loss(chunk, pred, nullptr, &vmae) * chunk.size();
        }
        log.validation_loss = vloss / val.size();
        log.validation_mae_deg = vmae / val.size();
        log.seconds = seconds_since(t0);
        log_epoch(config.variant, log);
        result.log.push_back(log);
        if (log.validation_loss < best) {
            best = log.validation_loss;
            result.best_epoch = epoch;
            save_checkpoint(snapshot(), config, signature, data.manifest.hash, epoch, log.validation_loss,
                            log.validation_mae_deg, checkpoint);
        }
    }
    result.final_train_loss = result.log.back().train_loss;
    result.checkpoint_hash = hash_file(checkpoint);
    return result;
}

}  // namespace

TrainResult train_nenet(const TrainConfig& config, const Dataset& data, const fs::path& lcnet_checkpoint,
                        const fs::path& checkpoint) {
    config.validate();
    if (config.phase != Phase::nenet) throw ConfigError("train_nenet needs phase nenet");
    std::optional<LcNet> lcnet;
    std::string upstream;
    if (!config.gt_lights) {
        if (lcnet_checkpoint.empty()) throw ConfigError("NeNet training needs an LcNet checkpoint");
        lcnet.emplace(models::load_lcnet(models::Checkpoint::load(lcnet_checkpoint)));
        if (lcnet->config().head != models::LightingHead::classification)
            throw ConfigError("NeNet is trained on a classification LcNet");
        upstream = hash_file(lcnet_checkpoint);
    }
    const std::string signature = train_signature(config, data.manifest.hash, upstream);
    NeNet model(config.nenet_config(), derive_seed(config.seed, 1));

    // Estimated lights only; ground truth is never an input here unless the
    // calibrated variant is requested.
    auto lights_for = [&](const std::vector<ImageStack>& samples) {
        std::vector<std::vector<LightSample>> out;
        if (!lcnet) {
            for (const auto& s : samples) out.push_back(*s.lights);
            return out;
        }
        const int q = samples.front().count();
        const auto batch = lighting_batch(samples, lcnet->config());
        const auto pred = lcnet->forward(batch.input, q, false);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            std::vector<LightSample> ls;
            for (int j = 0; j < q; ++j) {
                const int i = static_cast<int>(k) * q + j;
                ls.push_back(lightspace::decode({argmax(row(pred.azimuth, i)), argmax(row(pred.elevation, i)),
                                                 argmax(row(pred.intensity, i))},
                                                lcnet->config().bins));
            }
            out.push_back(std::move(ls));
        }
        return out;
    };
    auto make_input = [&](const ImageStack& s, const std::vector<LightSample>& l) {
        return models::nenet_input(s, l, model.config());
    };
    auto snapshot = [&] {
        KeyValueConfig extra;
        extra.set("lcnet_hash", upstream);
        if (lcnet) {
            extra.set("lcnet.kd", lcnet->config().bins.kd());
            extra.set("lcnet.ke", lcnet->config().bins.ke());
        }
        return models::save_nenet(model, extra);
    };
    return train_normals(config, data, model, signature, lights_for, make_input, snapshot, checkpoint);
}

TrainResult train_nenet(const TrainConfig& config, const fs::path& lcnet_checkpoint, const fs::path& checkpoint) {
    return train_nenet(config, load_dataset(config.dataset), lcnet_checkpoint, checkpoint);
}

TrainResult train_baseline(const TrainConfig& config, const Dataset& data, const fs::path& checkpoint) {
    config.validate();
    switch (config.phase) {
        case Phase::lcnet:
        case Phase::lcnet_reg:
            return train_lcnet(config, data, checkpoint);
        case Phase::nenet:
            if (!config.gt_lights) throw ConfigError("the NeNet baseline is the ground-truth-light variant");
            return train_nenet(config, data, {}, checkpoint);
        case Phase::ups_fcn: {
            if (config.input_resolution % 4 != 0) throw ConfigError("ups_fcn training needs a multiple-of-4 resolution");
            const std::string signature = train_signature(config, data.manifest.hash);
            UpsFcn model(config.ups_fcn_config(), derive_seed(config.seed, 1));
            auto lights_for = [](const std::vector<ImageStack>& samples) {
                return std::vector<std::vector<LightSample>>(samples.size());
            };
            auto make_input = [&](const ImageStack& s, const std::vector<LightSample>&) {
                return models::ups_fcn_input(s, model.config());
            };
            auto snapshot = [&] { return models::save_ups_fcn(model); };
            return train_normals(config, data, model, signature, lights_for, make_input, snapshot, checkpoint);
        }
    }
    throw ConfigError("unknown phase");
}

TrainResult train_baseline(const TrainConfig& config, const fs::path& checkpoint) {
    return train_baseline(config, load_dataset(config.dataset), checkpoint);
}

// Evaluation ----------------------------------------------------------------

ModelSet ModelSet::load(const std::vector<fs::path>& checkpoints) {
    ModelSet set;
    std::optional<std::pair<int, int>> nenet_bins;
    for (const auto& path : checkpoints) {
        const auto ck = models::Checkpoint::load(path);
        const std::string kind = ck.header.get_string("model", "");
        if (kind == "lcnet") set.lcnet.emplace(models::load_lcnet(ck));
        else if (kind == "nenet") {
            set.nenet.emplace(models::load_nenet(ck));
            if (ck.header.has("lcnet.kd"))
                nenet_bins = {static_cast<int>(ck.header.get_int("lcnet.kd", 0)), static_cast<int>(ck.header.get_int("lcnet.ke", 0))};
        } else if (kind == "ups_fcn") set.ups_fcn.emplace(models::load_ups_fcn(ck));
        else throw FormatError(path.string() + ": unknown model kind '" + kind + "'");
        set.checkpoint_hashes[kind] = hash_file(path);
    }
    if (set.lcnet && nenet_bins) {
        const auto& b = set.lcnet->config().bins;
        if (b.kd() != nenet_bins->first || b.ke() != nenet_bins->second)
            throw ConfigError("NeNet was trained on lights with different bins than the given LcNet");
    }
    return set;
}

namespace {

metrics::MetricReport mean_report(const std::vector<metrics::MetricReport>& reports, const std::string& name) {
    metrics::MetricReport m;
    m.object = name;
    auto avg = [&](auto field) -> std::optional<double> {
        double s = 0.0;
        int n = 0;
        for (const auto& r : reports)
            if (r.*field) {
                s += *(r.*field);
                ++n;
            }
        if (n == 0) return std::nullopt;
        return s / n;
    };
    m.direction_mae_deg = avg(&metrics::MetricReport::direction_mae_deg);
    m.azimuth_mae_deg = avg(&metrics::MetricReport::azimuth_mae_deg);
    m.elevation_mae_deg = avg(&metrics::MetricReport::elevation_mae_deg);
    m.intensity_rel_err = avg(&metrics::MetricReport::intensity_rel_err);
    m.normal_mae_deg = avg(&metrics::MetricReport::normal_mae_deg);
    return m;
}

NormalSource resolve_source(const ModelSet& models, const EvalConfig& config) {
    if (config.normal_source) return *config.normal_source;
    if (models.nenet) return NormalSource::nenet;
    if (models.ups_fcn) return NormalSource::ups_fcn;
    return NormalSource::none;
}

/// Metrics of one object under the given models.
metrics::MetricReport evaluate_stack(ModelSet& models, const ImageStack& stack, const std::string& name,
                                     NormalSource source, bool gt_for_normals) {
    metrics::MetricReport r;
    std::optional<std::vector<LightSample>> est;
    if (models.lcnet) {
        est = models::estimate_lights(stack, *models.lcnet);
        if (stack.lights) {
            std::vector<Eigen::Vector3d> ed, gd;
            std::vector<double> ee, ge;
            for (std::size_t i = 0; i < est->size(); ++i) {
                ed.push_back((*est)[i].direction.vec());
                ee.push_back((*est)[i].intensity);
                gd.push_back((*stack.lights)[i].direction.vec());
                ge.push_back((*stack.lights)[i].intensity);
            }
            r = metrics::lighting_report(ed, ee, gd, ge);
        }
    }
    r.object = name;

    const std::vector<LightSample>* lights = nullptr;
    if (gt_for_normals || !est) {
        if (stack.lights) lights = &*stack.lights;
    } else {
        lights = &*est;
    }
    std::optional<NormalMap> normals;
    switch (source) {
        case NormalSource::nenet:
            if (!models.nenet) throw ConfigError("normal source nenet needs a NeNet checkpoint");
            if (!lights) throw ConfigError("NeNet needs lights (an LcNet or ground truth)");
            normals = models::nenet_forward(stack, *lights, *models.nenet);
            break;
        case NormalSource::ups_fcn:
            if (!models.ups_fcn) throw ConfigError("normal source ups_fcn needs an UpsFcn checkpoint");
            normals = models::ups_fcn_forward(stack, *models.ups_fcn);
            break;
        case NormalSource::woodham:
            if (!lights) throw ConfigError("the solver needs lights (an LcNet or ground truth)");
            if (stack.count() >= 3)
                normals = solvers::compose_with_lights(stack, *lights, solvers::woodham_l2).normals;
            break;
        case NormalSource::none:
            break;
    }
    if (normals && stack.normals) r.normal_mae_deg = metrics::angular_mae_deg(*normals, *stack.normals, &stack.mask);
    return r;
}

/// Re-renders a synthetic scene with the given lights.
ImageStack rerender(const SceneRecord& scene, const std::vector<LightSample>& lights, double noise, Rng& rng) {
    render::Scene sc{*scene.stack.normals, scene.stack.mask};
    return render::render_stack(sc, *scene.brdf, lights, noise, rng, scene.stack.channels());
}

bool renderable(const SceneRecord& s) { return s.brdf && s.stack.normals && s.stack.lights; }

}  // namespace

void ExperimentResult::save(const fs::path& dir) const {
    fs::create_directories(dir);
    metrics::write_reports_csv(dir / "objects.csv", objects);
    metrics::write_reports_csv(dir / "repeats.csv", repeats);
    KeyValueConfig summary = KeyValueConfig::parse(mean.to_key_value());
    summary.set("intensity_err_variance", intensity_err_variance);
    summary.set("seconds", seconds);
    summary.set("seed", std::to_string(seed));
    for (const auto& [k, v] : hashes) summary.set("hash." + k, v);
    summary.save(dir / "summary.txt");
    config.save(dir / "config.txt");
}

ExperimentResult evaluate(ModelSet& models, const Dataset& data, const EvalConfig& config) {
    if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
    if (config.q < 0) throw ConfigError("q must be >= 0");
    const auto t0 = Clock::now();
    const NormalSource source = resolve_source(models, config);
    const int n = static_cast<int>(data.scenes.size());
    if (n == 0) throw ConfigError("dataset has no scenes");

    bool warned = false;
    for (const auto& s : data.scenes)
        if (!s.stack.normals && !warned && source != NormalSource::none) {
            spdlog::warn("scene {} has no ground-truth normals; reporting lighting metrics only", s.name);
            warned = true;
        }

    ExperimentResult res;
    res.seed = config.seed;
    std::vector<std::vector<metrics::MetricReport>> per_object(n);
    for (int rep = 0; rep < config.repeats; ++rep) {
        std::vector<std::optional<ImageStack>> stacks(n);
        parallel_for(n, [&](int i) {
            const SceneRecord& s = data.scenes[i];
            if (renderable(s)) {
                Rng rng(derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(rep)), static_cast<std::uint64_t>(i)));
                const int total = static_cast<int>(s.stack.lights->size());
                const int q = config.q > 0 ? std::min(config.q, total) : total;
                std::vector<LightSample> lights;
                for (int j = 0; j < q; ++j)
                    lights.emplace_back((*s.stack.lights)[j].direction, uniform(rng, config.intensity_min, config.intensity_max));
                stacks[i] = rerender(s, lights, config.noise_amplitude, rng);
            } else if (rep == 0) {
                stacks[i] = s.stack;
            }
        });
        std::vector<metrics::MetricReport> reports;
        for (int i = 0; i < n; ++i) {
            if (!stacks[i]) continue;
            auto r = evaluate_stack(models, *stacks[i], data.scenes[i].name, source, config.gt_lights_for_normals);
            per_object[i].push_back(r);
            reports.push_back(std::move(r));
        }
        res.repeats.push_back(mean_report(reports, "repeat_" + std::to_string(rep)));
    }
    for (int i = 0; i < n; ++i) res.objects.push_back(mean_report(per_object[i], data.scenes[i].name));
    res.mean = mean_report(res.repeats, "mean");
    if (res.mean.intensity_rel_err) {
        double v = 0.0;
        for (const auto& r : res.repeats) v += std::pow(*r.intensity_rel_err - *res.mean.intensity_rel_err, 2);
        res.intensity_err_variance = v / res.repeats.size();
    }
    res.hashes = models.checkpoint_hashes;
    res.hashes["dataset"] = data.manifest.hash;
    res.config.set("repeats", config.repeats);
    res.config.set("seed", std::to_string(config.seed));
    res.config.set("q", config.q);
    res.config.set("noise_amplitude", config.noise_amplitude);
    res.config.set("intensity_min", config.intensity_min);
    res.config.set("intensity_max", config.intensity_max);
    res.config.set("gt_lights_for_normals", config.gt_lights_for_normals);
    res.config.set("dataset", data.manifest.root.string());
    res.seconds = seconds_since(t0);
    return res;
}

ExperimentResult evaluate(const std::vector<fs::path>& checkpoints, const fs::path& dataset, const EvalConfig& config) {
    ModelSet models = ModelSet::load(checkpoints);
    return evaluate(models, load_dataset(dataset), config);
}

// Studies -------------------------------------------------------------------

NormalEstimator solver_estimator(const solvers::Solver& solver) {
    return [solver](const ImageStack& stack, const std::vector<LightSample>& lights) {
        return solvers::compose_with_lights(stack, lights, solver).normals;
    };
}

NormalEstimator nenet_estimator(NeNet& model) {
    return [&model](const ImageStack& stack, const std::vector<LightSample>& lights) {
        return models::nenet_forward(stack, lights, model);
    };
}

std::vector<int> default_kd_list() { return {2, 4, 6, 9, 12, 18, 30, 36, 60, 90, 180}; }

std::vector<DiscretizationRow> discretization_study(const std::vector<int>& kd_list, const ImageStack& scene,
                                                    const NormalEstimator& estimator) {
    if (!scene.lights || !scene.normals) throw DomainError("the study needs ground-truth lights and normals");
    std::vector<DiscretizationRow> rows;
    for (int kd : kd_list) {
        if (kd < 1) throw DomainError("K_d must be >= 1");
        double worst = 0.0;
        for (int corner = 0; corner < 4; ++corner) {
            std::vector<LightSample> lights;
            for (const auto& l : *scene.lights) {
                const auto corners = lightspace::corner_perturbations(lightspace::dir_to_spherical(l.direction), kd);
                lights.emplace_back(corners[corner], l.intensity);
            }
            worst = std::max(worst, metrics::angular_mae_deg(estimator(scene, lights), *scene.normals, &scene.mask));
        }
        rows.push_back({kd, worst});
    }
    rows.push_back({std::nullopt, metrics::angular_mae_deg(estimator(scene, *scene.lights), *scene.normals, &scene.mask)});
    return rows;
}

std::vector<SweepRow> image_count_sweep(ModelSet& models, const Dataset& data, const std::vector<int>& q_list,
                                        const std::vector<std::uint64_t>& seeds, const EvalConfig& base) {
    const NormalSource source = resolve_source(models, base);
    std::vector<int> scenes;
    for (int i = 0; i < static_cast<int>(data.scenes.size()); ++i)
        if (renderable(data.scenes[i])) scenes.push_back(i);
    if (scenes.empty()) throw ConfigError("the sweep needs synthetic scenes with BRDF metadata");
    std::vector<SweepRow> rows;
    for (int q : q_list) {
        if (q < 1 || q > 64) throw ConfigError("q must lie in [1, 64]");
        for (std::uint64_t seed : seeds) {
            std::vector<ImageStack> stacks(scenes.size());
            parallel_for(static_cast<int>(scenes.size()), [&](int k) {
                Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(q)), static_cast<std::uint64_t>(scenes[k])));
                const auto lights = render::random_lights(rng, q, base.intensity_min, base.intensity_max);
                stacks[k] = rerender(data.scenes[scenes[k]], lights, base.noise_amplitude, rng);
            });
            std::vector<metrics::MetricReport> reports;
            for (std::size_t k = 0; k < scenes.size(); ++k)
                reports.push_back(evaluate_stack(models, stacks[k], data.scenes[scenes[k]].name, source, base.gt_lights_for_normals));
            rows.push_back({q, seed, mean_report(reports, "q" + std::to_string(q))});
        }
    }
    return rows;
}

// Harness -------------------------------------------------------------------

ProtocolConfig ProtocolConfig::defaults() {
    ProtocolConfig c;
    c.train_data.scenes = 2000;
    c.train_data.seed = 1;
    c.test_data.scenes = 100;
    c.test_data.seed = 1000001;
    return c;
}

ProtocolConfig ProtocolConfig::ablation() {
    // Same training scale as the defaults: with fewer scenes or epochs the
    // variants are still improving when training stops.
    ProtocolConfig c = defaults();
    c.eval.repeats = 2;
    return c;
}

void ProtocolConfig::write(KeyValueConfig& kv) const {
    auto put = [&](const std::string& prefix, const KeyValueConfig& part) {
        for (const auto& [k, v] : part.entries()) kv.set(prefix + k, v);
    };
    KeyValueConfig a, b, l, n;
    train_data.write(a);
    test_data.write(b);
    lcnet.write(l);
    nenet.write(n);
    put("train_data.", a);
    put("test_data.", b);
    put("lcnet.", l);
    put("nenet.", n);
    kv.set("eval.repeats", eval.repeats);
    kv.set("eval.seed", std::to_string(eval.seed));
    kv.set("eval.q", eval.q);
    kv.set("eval.noise_amplitude", eval.noise_amplitude);
}

ProtocolConfig ProtocolConfig::read(const KeyValueConfig& kv) {
    ProtocolConfig c = defaults();
    auto part = [&](const std::string& prefix, KeyValueConfig base) {
        for (const auto& [k, v] : kv.entries())
            if (k.rfind(prefix, 0) == 0) base.set(k.substr(prefix.size()), v);
        return base;
    };
    KeyValueConfig a, b, l, n;
    c.train_data.write(a);
    c.test_data.write(b);
    c.lcnet.write(l);
    c.nenet.write(n);
    c.train_data = render::DatasetConfig::read(part("train_data.", a));
    c.test_data = render::DatasetConfig::read(part("test_data.", b));
    c.lcnet = TrainConfig::read(part("lcnet.", l));
    c.nenet = TrainConfig::read(part("nenet.", n));
    c.eval.repeats = static_cast<int>(kv.get_int("eval.repeats", c.eval.repeats));
    c.eval.seed = kv.get_uint("eval.seed", c.eval.seed);
    c.eval.q = static_cast<int>(kv.get_int("eval.q", c.eval.q));
    c.eval.noise_amplitude = kv.get_double("eval.noise_amplitude", c.eval.noise_amplitude);
    if (c.lcnet.phase != Phase::lcnet) throw ConfigError("protocol lcnet.phase must be lcnet");
    if (c.nenet.phase != Phase::nenet) throw ConfigError("protocol nenet.phase must be nenet");
    return c;
}

ProtocolConfig ProtocolConfig::with_seed(std::uint64_t seed) const {
    ProtocolConfig c = *this;
    c.train_data.seed = derive_seed(seed, 11);
    c.test_data.seed = derive_seed(seed, 12);
    c.lcnet.seed = derive_seed(seed, 13);
    c.nenet.seed = derive_seed(seed, 14);
    c.eval.seed = derive_seed(seed, 15);
    return c;
}

io::DatasetManifest ensure_dataset(const render::DatasetConfig& config, const fs::path& root) {
    KeyValueConfig want;
    config.write(want);
    if (fs::exists(root / "manifest.txt") && fs::exists(root / "dataset_config.txt")) {
        if (KeyValueConfig::load(root / "dataset_config.txt").to_string() == want.to_string()) {
            auto m = io::DatasetManifest::load(root);
            spdlog::info("reusing dataset {} ({} scenes)", root.string(), m.scenes.size());
            return m;
        }
        spdlog::info("dataset config changed; regenerating {}", root.string());
        fs::remove_all(root);
    } else if (fs::exists(root) && !fs::is_empty(root)) {
        throw IoError(root.string() + " exists and does not hold a generated dataset");
    }
    return render::generate_dataset(config, root);
}

namespace {

TrainResult ensure_trained(const TrainConfig& config, const Dataset& data, const fs::path& upstream,
                           const fs::path& checkpoint) {
    const std::string up = upstream.empty() ? std::string() : hash_file(upstream);
    const std::string sig = train_signature(config, data.manifest.hash, up);
    if (checkpoint_matches(checkpoint, sig)) {
        spdlog::info("reusing checkpoint {}", checkpoint.string());
        TrainResult r;
        r.checkpoint = checkpoint;
        r.checkpoint_hash = hash_file(checkpoint);
        return r;
    }
    if (config.phase == Phase::nenet && !config.gt_lights) return train_nenet(config, data, upstream, checkpoint);
    return train_baseline(config, data, checkpoint);
}

}  // namespace

ProtocolRun run_protocol(const ProtocolConfig& config, const fs::path& workdir) {
    fs::create_directories(workdir);
    KeyValueConfig frozen;
    config.write(frozen);
    frozen.save(workdir / "protocol.txt");
    ProtocolRun run;
    run.train_dataset = workdir / "train_data";
    run.test_dataset = workdir / "test_data";
    ensure_dataset(config.train_data, run.train_dataset);
    ensure_dataset(config.test_data, run.test_dataset);
    const Dataset train = load_dataset(run.train_dataset);
    run.lcnet_checkpoint = workdir / "lcnet.ckpt";
    run.nenet_checkpoint = workdir / "nenet.ckpt";
    ensure_trained(config.lcnet, train, {}, run.lcnet_checkpoint);
    ensure_trained(config.nenet, train, run.lcnet_checkpoint, run.nenet_checkpoint);
    run.result = evaluate({run.lcnet_checkpoint, run.nenet_checkpoint}, run.test_dataset, config.eval);
    run.result.save(workdir / "eval");
    return run;
}

namespace {

struct SeedContext {
    fs::path dir;
    ProtocolConfig config;
    Dataset train;
    Dataset test;
};

SeedContext prepare_seed(const ProtocolConfig& base, std::uint64_t seed, const fs::path& workdir) {
    SeedContext ctx;
    ctx.dir = workdir / ("seed_" + std::to_string(seed));
    ctx.config = base.with_seed(seed);
    ensure_dataset(ctx.config.train_data, ctx.dir / "train_data");
    ensure_dataset(ctx.config.test_data, ctx.dir / "test_data");
    ctx.train = load_dataset(ctx.dir / "train_data");
    ctx.test = load_dataset(ctx.dir / "test_data");
    return ctx;
}

TrainConfig variant(TrainConfig c, const std::string& tag) {
    c.variant = tag;
    return c;
}

AblationRow eval_row(const std::string& id, const std::string& description, std::uint64_t seed,
                     const std::vector<fs::path>& ckpts, const Dataset& test, EvalConfig eval) {
    ModelSet models = ModelSet::load(ckpts);
    AblationRow r{id, description, seed, evaluate(models, test, eval).mean};
    r.metrics.object = id;
    spdlog::info("{} seed {}: {}", id, seed, metrics::MetricReport::csv_header());
    spdlog::info("{} seed {}: {}", id, seed, r.metrics.csv_row());
    return r;
}

}  // namespace

std::vector<AblationRow> ablation_table1(const ProtocolConfig& config, const std::vector<std::uint64_t>& seeds,
                                         const fs::path& workdir) {
    std::vector<AblationRow> rows;
    for (auto seed : seeds) {
        SeedContext ctx = prepare_seed(config, seed, workdir);
        EvalConfig eval = ctx.config.eval;
        eval.normal_source = NormalSource::none;
        const TrainConfig a0 = variant(ctx.config.lcnet, "lcnet");
        TrainConfig a1 = variant(ctx.config.lcnet, "lcnet_reg");
        a1.phase = Phase::lcnet_reg;
        TrainConfig a2 = variant(ctx.config.lcnet, "lcnet_nomask");
        a2.use_mask = false;
        TrainConfig a3 = variant(ctx.config.lcnet, "lcnet_local");
        a3.use_global = false;
        const std::vector<std::tuple<std::string, std::string, TrainConfig>> runs{
            {"A0", "LCNet (classification, mask, local-global)", a0},
            {"A1", "LCNet_reg (direct regression)", a1},
            {"A2", "LCNet w/o mask", a2},
            {"A3", "LCNet_local (no global feature)", a3}};
        for (const auto& [id, desc, tc] : runs) {
            const fs::path ck = ctx.dir / (tc.variant + ".ckpt");
            ensure_trained(tc, ctx.train, {}, ck);
            rows.push_back(eval_row(id, desc, seed, {ck}, ctx.test, eval));
        }
    }
    return rows;
}

std::vector<AblationRow> ablation_table2(const ProtocolConfig& config, const std::vector<std::uint64_t>& seeds,
                                         const fs::path& workdir) {
    std::vector<AblationRow> rows;
    for (auto seed : seeds) {
        SeedContext ctx = prepare_seed(config, seed, workdir);
        const fs::path lc = ctx.dir / "lcnet.ckpt";
        ensure_trained(variant(ctx.config.lcnet, "lcnet"), ctx.train, {}, lc);

        const fs::path ne = ctx.dir / "nenet.ckpt";
        ensure_trained(variant(ctx.config.nenet, "nenet"), ctx.train, lc, ne);
        TrainConfig gt = variant(ctx.config.nenet, "nenet_gt");
        gt.gt_lights = true;
        const fs::path ne_gt = ctx.dir / "nenet_gt.ckpt";
        ensure_trained(gt, ctx.train, {}, ne_gt);
        TrainConfig ups = variant(ctx.config.nenet, "ups_fcn");
        ups.phase = Phase::ups_fcn;
        const fs::path up = ctx.dir / "ups_fcn.ckpt";
        ensure_trained(ups, ctx.train, {}, up);

        EvalConfig eval = ctx.config.eval;
        EvalConfig calibrated = eval;
        calibrated.gt_lights_for_normals = true;
        rows.push_back(eval_row("B0", "NENet trained and tested with ground-truth lights", seed, {ne_gt}, ctx.test, calibrated));
        rows.push_back(eval_row("B1", "SDPS-Net: LCNet + NENet trained on LCNet lights", seed, {lc, ne}, ctx.test, eval));
        rows.push_back(eval_row("B2", "NENet trained on ground-truth lights, tested on LCNet lights", seed, {lc, ne_gt},
                                ctx.test, eval));
        EvalConfig single = eval;
        single.normal_source = NormalSource::ups_fcn;
        rows.push_back(eval_row("B5", "UPS-FCN single stage (deep, mask)", seed, {up}, ctx.test, single));
    }
    return rows;
}

std::vector<AblationRow> average_rows(const std::vector<AblationRow>& rows) {
    std::vector<AblationRow> out;
    for (const auto& r : rows) {
        if (std::any_of(out.begin(), out.end(), [&](const AblationRow& o) { return o.id == r.id; })) continue;
        std::vector<metrics::MetricReport> same;
        for (const auto& s : rows)
            if (s.id == r.id) same.push_back(s.metrics);
        out.push_back({r.id, r.description, 0, mean_report(same, r.id)});
    }
    return out;
}

}  // namespace pscal::pipeline
