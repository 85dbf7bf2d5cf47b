// SPDX-License-Identifier: Apache-2.0
#include "pscal/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pscal/error.hpp"

namespace pscal::models {

using lightspace::LightSample;
using nn::Tensor;

namespace {

void append(std::vector<nn::Parameter*>& out, std::vector<nn::Parameter*> more) {
    out.insert(out.end(), more.begin(), more.end());
}

std::size_t count_params(const std::vector<nn::Parameter*>& ps) {
    std::size_t n = 0;
    for (const auto* p : ps) n += p->value.size();
    return n;
}

Tensor shape_only(int n, int c, int h, int w) {
    Tensor t;
    t.n = n;
    t.c = c;
    t.h = h;
    t.w = w;
    return t;
}

// Copies image channels into a tensor item, converting 1 <-> 3 channels.
void put_image(Tensor& t, int item, int first_channel, int channels, const Image& img, float scale) {
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                float v;
                if (img.channels() == channels) v = img.at(y, x, c);
                else if (img.channels() == 1) v = img.at(y, x, 0);
                else v = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0f;
                t.at(item, first_channel + c, y, x) = v * scale;
            }
}

std::vector<double> softmax_row(const Tensor& scores, int i) {
    const int k = scores.c;
    std::vector<double> p(k);
    double mx = -1e300;
    for (int j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(scores.data[i * k + j]));
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += p[j] = std::exp(scores.data[i * k + j] - mx);
    for (double& v : p) v /= s;
    return p;
}

int argmax_lowest(const std::vector<double>& p) {
    for (double v : p)
        if (std::isnan(v)) throw NumericError("NaN in lighting probabilities");
    if (p.empty()) throw DomainError("empty probability vector");
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

// Configs -------------------------------------------------------------------

void LcNetConfig::validate() const {
    if (base_channels < 1) throw ConfigError("base_channels must be positive");
    if (input_resolution < 8 || input_resolution > 512) throw ConfigError("input_resolution must lie in [8, 512]");
    if (image_channels != 1 && image_channels != 3) throw ConfigError("image_channels must be 1 or 3");
}

void LcNetConfig::write(KeyValueConfig& kv) const {
    kv.set("kd", bins.kd());
    kv.set("ke", bins.ke());
    kv.set("intensity_min", bins.intensity_min());
    kv.set("intensity_max", bins.intensity_max());
    kv.set("base_channels", base_channels);
    kv.set("use_mask", use_mask);
    kv.set("use_global", use_global);
    kv.set("head", std::string(head == LightingHead::classification ? "classification" : "regression"));
    kv.set("input_resolution", input_resolution);
    kv.set("image_channels", image_channels);
}

LcNetConfig LcNetConfig::read(const KeyValueConfig& kv) {
    LcNetConfig c;
    c.bins = lightspace::LightingBins(static_cast<int>(kv.get_int("kd", 36)), static_cast<int>(kv.get_int("ke", 20)),
                                      kv.get_double("intensity_min", 0.2), kv.get_double("intensity_max", 2.0));
    c.base_channels = static_cast<int>(kv.get_int("base_channels", c.base_channels));
    c.use_mask = kv.get_bool("use_mask", c.use_mask);
    c.use_global = kv.get_bool("use_global", c.use_global);
    const std::string head = kv.get_string("head", "classification");
    if (head == "classification") c.head = LightingHead::classification;
    else if (head == "regression") c.head = LightingHead::regression;
    else throw ConfigError("unknown lighting head '" + head + "'");
    c.input_resolution = static_cast<int>(kv.get_int("input_resolution", c.input_resolution));
    c.image_channels = static_cast<int>(kv.get_int("image_channels", c.image_channels));
    c.validate();
    return c;
}

void NeNetConfig::validate() const {
    if (base_channels < 1) throw ConfigError("base_channels must be positive");
    if (image_channels != 1 && image_channels != 3) throw ConfigError("image_channels must be 1 or 3");
}

void NeNetConfig::write(KeyValueConfig& kv) const {
    kv.set("base_channels", base_channels);
    kv.set("image_channels", image_channels);
}

NeNetConfig NeNetConfig::read(const KeyValueConfig& kv) {
    NeNetConfig c;
    c.base_channels = static_cast<int>(kv.get_int("base_channels", c.base_channels));
    c.image_channels = static_cast<int>(kv.get_int("image_channels", c.image_channels));
    c.validate();
    return c;
}

void UpsFcnConfig::validate() const {
    if (base_channels < 1) throw ConfigError("base_channels must be positive");
    if (image_channels != 1 && image_channels != 3) throw ConfigError("image_channels must be 1 or 3");
    if (deep_layers < 0) throw ConfigError("deep_layers must be >= 0");
}

void UpsFcnConfig::write(KeyValueConfig& kv) const {
    kv.set("base_channels", base_channels);
    kv.set("image_channels", image_channels);
    kv.set("use_mask", use_mask);
    kv.set("deep_layers", deep_layers);
}

UpsFcnConfig UpsFcnConfig::read(const KeyValueConfig& kv) {
    UpsFcnConfig c;
    c.base_channels = static_cast<int>(kv.get_int("base_channels", c.base_channels));
    c.image_channels = static_cast<int>(kv.get_int("image_channels", c.image_channels));
    c.use_mask = kv.get_bool("use_mask", c.use_mask);
    c.deep_layers = static_cast<int>(kv.get_int("deep_layers", c.deep_layers));
    c.validate();
    return c;
}

// LcNet ---------------------------------------------------------------------

LcNet::LcNet(const LcNetConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const int c = config_.base_channels;
    nn::add_conv_block(extractor_, config_.input_channels(), c, 1, rng);
    nn::add_conv_block(extractor_, c, 2 * c, 2, rng);
    nn::add_conv_block(extractor_, 2 * c, 2 * c, 1, rng);
    nn::add_conv_block(extractor_, 2 * c, 4 * c, 2, rng);
    for (int i = 0; i < 3; ++i) nn::add_conv_block(extractor_, 4 * c, 4 * c, 1, rng);

    const int r = config_.input_resolution;
    const Tensor feat = extractor_.shape_of(shape_only(1, config_.input_channels(), r, r));
    nn::add_conv_block(trunk_, 2 * feat.c, 4 * c, 2, rng);
    nn::add_conv_block(trunk_, 4 * c, 4 * c, 1, rng);
    const Tensor flat = trunk_.shape_of(shape_only(1, 2 * feat.c, feat.h, feat.w));
    trunk_.add<nn::Linear>(static_cast<int>(flat.item_size()), config_.hidden_units(), rng, nn::leaky_gain(0.1f));
    trunk_.add<nn::LeakyRelu>(0.1f);

    const int hidden = config_.hidden_units();
    if (config_.head == LightingHead::classification) {
        azimuth_head_.add<nn::Linear>(hidden, config_.bins.kd(), rng, 1.0f);
        elevation_head_.add<nn::Linear>(hidden, config_.bins.kd(), rng, 1.0f);
        intensity_head_.add<nn::Linear>(hidden, config_.bins.ke(), rng, 1.0f);
    } else {
        direction_head_.add<nn::Linear>(hidden, 3, rng, 1.0f);
        direction_head_.add<nn::L2NormalizeChannels>();
        value_head_.add<nn::Linear>(hidden, 1, rng, 1.0f);
        value_head_.add<nn::Softplus>();
    }
}

LcNet::Output LcNet::forward(const Tensor& input, int q, bool train) {
    const int r = config_.input_resolution;
    if (q < 1 || input.n < 1 || input.n % q != 0) throw DomainError("LcNet needs q >= 1 images per object");
    if (input.c != config_.input_channels() || input.h != r || input.w != r)
        throw DomainError("LcNet input " + input.shape_string() + " does not match the configured resolution/channels");
    group_ = q;
    Output out;
    const Tensor local = extractor_.forward(input, train);
    if (config_.use_global) {
        out.global = fusion_.forward(local, q, train);
    } else {
        out.global = Tensor(input.n / q, local.c, local.h, local.w);
    }
    const Tensor hidden = trunk_.forward(nn::concat_with_global(local, out.global, q), train);
    if (config_.head == LightingHead::classification) {
        out.azimuth = azimuth_head_.forward(hidden, train);
        out.elevation = elevation_head_.forward(hidden, train);
        out.intensity = intensity_head_.forward(hidden, train);
    } else {
        out.direction = direction_head_.forward(hidden, train);
        out.intensity_value = value_head_.forward(hidden, train);
    }
    return out;
}

void LcNet::backward(const Gradient& grad) {
    Tensor dh;
    if (config_.head == LightingHead::classification) {
        dh = azimuth_head_.backward(grad.azimuth);
        dh = nn::add(dh, elevation_head_.backward(grad.elevation));
        dh = nn::add(dh, intensity_head_.backward(grad.intensity));
    } else {
        dh = nn::add(direction_head_.backward(grad.direction), value_head_.backward(grad.intensity_value));
    }
    const Tensor dcat = trunk_.backward(dh);
    Tensor d_local, d_global;
    nn::split_global_grad(dcat, dcat.c / 2, group_, d_local, d_global);
    if (config_.use_global) d_local = nn::add(d_local, fusion_.backward(d_global));
    extractor_.backward(d_local);
}

std::vector<nn::Parameter*> LcNet::parameters() {
    std::vector<nn::Parameter*> ps = extractor_.parameters("extractor");
    append(ps, trunk_.parameters("trunk"));
    append(ps, azimuth_head_.parameters("azimuth_head"));
    append(ps, elevation_head_.parameters("elevation_head"));
    append(ps, intensity_head_.parameters("intensity_head"));
    append(ps, direction_head_.parameters("direction_head"));
    append(ps, value_head_.parameters("value_head"));
    return ps;
}

std::size_t LcNet::parameter_count() { return count_params(parameters()); }

// NeNet ---------------------------------------------------------------------

NeNet::NeNet(const NeNetConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const int c = config_.base_channels;
    // Upsample + conv stands in for each transposed convolution.
    nn::add_conv_block(extractor_, config_.input_channels(), c, 1, rng);
    nn::add_conv_block(extractor_, c, 2 * c, 2, rng);
    nn::add_conv_block(extractor_, 2 * c, 2 * c, 1, rng);
    nn::add_conv_block(extractor_, 2 * c, 4 * c, 2, rng);
    nn::add_conv_block(extractor_, 4 * c, 4 * c, 1, rng);
    extractor_.add<nn::Upsample2x>();
    nn::add_conv_block(extractor_, 4 * c, 2 * c, 1, rng);
    nn::add_conv_block(extractor_, 2 * c, 2 * c, 1, rng);

    nn::add_conv_block(regressor_, 2 * c, 2 * c, 1, rng);
    nn::add_conv_block(regressor_, 2 * c, 2 * c, 1, rng);
    regressor_.add<nn::Upsample2x>();
    nn::add_conv_block(regressor_, 2 * c, c, 1, rng);
    regressor_.add<nn::Conv2d>(c, 3, 1, rng, 1.0f);
    regressor_.add<nn::L2NormalizeChannels>();
}

Tensor NeNet::forward(const Tensor& input, int q, bool train) {
    if (q < 1 || input.n < 1 || input.n % q != 0) throw DomainError("NeNet needs q >= 1 images per object");
    if (input.c != config_.input_channels()) throw DomainError("NeNet input has the wrong channel count");
    if (input.h % 4 != 0 || input.w % 4 != 0) throw DomainError("NeNet input size must be a multiple of 4");
    const Tensor local = extractor_.forward(input, train);
    return regressor_.forward(fusion_.forward(local, q, train), train);
}

void NeNet::backward(const Tensor& d_normals) { extractor_.backward(fusion_.backward(regressor_.backward(d_normals))); }

std::vector<nn::Parameter*> NeNet::parameters() {
    std::vector<nn::Parameter*> ps = extractor_.parameters("extractor");
    append(ps, regressor_.parameters("regressor"));
    return ps;
}

std::size_t NeNet::parameter_count() { return count_params(parameters()); }

// UpsFcn --------------------------------------------------------------------

UpsFcn::UpsFcn(const UpsFcnConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const int c = config_.base_channels;
    nn::add_conv_block(extractor_, config_.input_channels(), c, 1, rng);
    nn::add_conv_block(extractor_, c, 2 * c, 2, rng);
    nn::add_conv_block(extractor_, 2 * c, 2 * c, 1, rng);
    nn::add_conv_block(extractor_, 2 * c, 4 * c, 2, rng);
    for (int i = 0; i < config_.deep_layers; ++i) nn::add_conv_block(extractor_, 4 * c, 4 * c, 1, rng);
    extractor_.add<nn::Upsample2x>();
    nn::add_conv_block(extractor_, 4 * c, 2 * c, 1, rng);

    nn::add_conv_block(regressor_, 2 * c, 4 * c, 2, rng);
    for (int i = 0; i < config_.deep_layers; ++i) nn::add_conv_block(regressor_, 4 * c, 4 * c, 1, rng);
    regressor_.add<nn::Upsample2x>();
    nn::add_conv_block(regressor_, 4 * c, 2 * c, 1, rng);
    regressor_.add<nn::Upsample2x>();
    nn::add_conv_block(regressor_, 2 * c, c, 1, rng);
    regressor_.add<nn::Conv2d>(c, 3, 1, rng, 1.0f);
    regressor_.add<nn::L2NormalizeChannels>();
}

Tensor UpsFcn::forward(const Tensor& input, int q, bool train) {
    if (q < 1 || input.n < 1 || input.n % q != 0) throw DomainError("UpsFcn needs q >= 1 images per object");
    if (input.c != config_.input_channels()) throw DomainError("UpsFcn input has the wrong channel count");
    if (input.h % 4 != 0 || input.w % 4 != 0) throw DomainError("UpsFcn input size must be a multiple of 4");
    const Tensor local = extractor_.forward(input, train);
    return regressor_.forward(fusion_.forward(local, q, train), train);
}

void UpsFcn::backward(const Tensor& d_normals) { extractor_.backward(fusion_.backward(regressor_.backward(d_normals))); }

std::vector<nn::Parameter*> UpsFcn::parameters() {
    std::vector<nn::Parameter*> ps = extractor_.parameters("extractor");
    append(ps, regressor_.parameters("regressor"));
    return ps;
}

std::size_t UpsFcn::parameter_count() { return count_params(parameters()); }

// Inputs --------------------------------------------------------------------

Tensor lcnet_input(const ImageStack& stack, const LcNetConfig& config) {
    stack.validate();
    const int r = config.input_resolution;
    const ImageStack small = (stack.height() == r && stack.width() == r) ? stack : resize(stack, r, r);
    Tensor t(small.count(), config.input_channels(), r, r);
    for (int i = 0; i < small.count(); ++i) {
        put_image(t, i, 0, config.image_channels, small.images[i], 1.0f);
        if (config.use_mask)
            for (int y = 0; y < r; ++y)
                for (int x = 0; x < r; ++x) t.at(i, config.image_channels, y, x) = small.mask(y, x) ? 1.0f : 0.0f;
    }
    return t;
}

Tensor nenet_input(const ImageStack& stack, const std::vector<LightSample>& lights, const NeNetConfig& config) {
    stack.validate();
    if (static_cast<int>(lights.size()) != stack.count()) throw DomainError("need one light per image");
    const int h = (stack.height() + 3) / 4 * 4, w = (stack.width() + 3) / 4 * 4, nc = config.image_channels;
    Tensor t(stack.count(), config.input_channels(), h, w);
    for (int i = 0; i < stack.count(); ++i) {
        if (!(lights[i].intensity > 0.0)) throw DomainError("light intensity must be positive");
        put_image(t, i, 0, nc, stack.images[i], static_cast<float>(1.0 / lights[i].intensity));
        const auto& d = lights[i].direction.vec();
        for (int k = 0; k < 3; ++k) {
            float* plane = t.data.data() + (static_cast<std::size_t>(i) * t.c + nc + k) * t.plane();
            std::fill(plane, plane + t.plane(), static_cast<float>(d[k]));
        }
    }
    return t;
}

Tensor ups_fcn_input(const ImageStack& stack, const UpsFcnConfig& config) {
    stack.validate();
    const int h = (stack.height() + 3) / 4 * 4, w = (stack.width() + 3) / 4 * 4;
    Tensor t(stack.count(), config.input_channels(), h, w);
    for (int i = 0; i < stack.count(); ++i) {
        put_image(t, i, 0, config.image_channels, stack.images[i], 1.0f);
        if (config.use_mask)
            for (int y = 0; y < stack.height(); ++y)
                for (int x = 0; x < stack.width(); ++x)
                    t.at(i, config.image_channels, y, x) = stack.mask(y, x) ? 1.0f : 0.0f;
    }
    return t;
}

NormalMap to_normal_map(const Tensor& normals, int item, int height, int width) {
    NormalMap m(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            m.set(y, x, Eigen::Vector3d(normals.at(item, 0, y, x), normals.at(item, 1, y, x), normals.at(item, 2, y, x)));
    return m;
}

// Inference -----------------------------------------------------------------

std::vector<LightingPrediction> lcnet_forward(const ImageStack& stack, LcNet& model) {
    if (model.config().head != LightingHead::classification)
        throw DomainError("lcnet_forward needs a classification model");
    if (stack.images.empty()) throw DomainError("image stack is empty");
    const Tensor in = lcnet_input(stack, model.config());
    const auto out = model.forward(in, stack.count(), false);
    std::vector<LightingPrediction> preds(stack.count());
    for (int i = 0; i < stack.count(); ++i) {
        preds[i].azimuth = softmax_row(out.azimuth, i);
        preds[i].elevation = softmax_row(out.elevation, i);
        preds[i].intensity = softmax_row(out.intensity, i);
    }
    return preds;
}

std::vector<LightSample> decode_predictions(const std::vector<LightingPrediction>& preds,
                                            const lightspace::LightingBins& bins) {
    std::vector<LightSample> out;
    out.reserve(preds.size());
    for (const auto& p : preds) {
        if (static_cast<int>(p.azimuth.size()) != bins.kd() || static_cast<int>(p.elevation.size()) != bins.kd() ||
            static_cast<int>(p.intensity.size()) != bins.ke())
            throw DomainError("prediction sizes do not match the lighting bins");
        out.push_back(lightspace::decode({argmax_lowest(p.azimuth), argmax_lowest(p.elevation), argmax_lowest(p.intensity)}, bins));
    }
    return out;
}

NormalMap nenet_forward(const ImageStack& stack, const std::vector<LightSample>& lights, NeNet& model) {
    if (stack.images.empty()) throw DomainError("image stack is empty");
    const Tensor in = nenet_input(stack, lights, model.config());
    return to_normal_map(model.forward(in, stack.count(), false), 0, stack.height(), stack.width());
}

std::vector<std::pair<Eigen::Vector3d, double>> lcnet_reg_forward(const ImageStack& stack, LcNet& model) {
    if (model.config().head != LightingHead::regression)
        throw DomainError("lcnet_reg_forward needs a regression model");
    if (stack.images.empty()) throw DomainError("image stack is empty");
    const auto out = model.forward(lcnet_input(stack, model.config()), stack.count(), false);
    std::vector<std::pair<Eigen::Vector3d, double>> res;
    for (int i = 0; i < stack.count(); ++i) {
        const Eigen::Vector3d d(out.direction.data[3 * i], out.direction.data[3 * i + 1], out.direction.data[3 * i + 2]);
        res.emplace_back(d, out.intensity_value.data[i]);
    }
    return res;
}

NormalMap ups_fcn_forward(const ImageStack& stack, UpsFcn& model) {
    if (stack.images.empty()) throw DomainError("image stack is empty");
    const Tensor in = ups_fcn_input(stack, model.config());
    return to_normal_map(model.forward(in, stack.count(), false), 0, stack.height(), stack.width());
}

std::vector<LightSample> estimate_lights(const ImageStack& stack, LcNet& model) {
    if (model.config().head == LightingHead::classification)
        return decode_predictions(lcnet_forward(stack, model), model.config().bins);
    std::vector<LightSample> out;
    for (const auto& [d, e] : lcnet_reg_forward(stack, model)) {
        Eigen::Vector3d v = d;
        v.z() = std::max(v.z(), 0.0);
        if (v.norm() < 1e-9) v = Eigen::Vector3d::UnitZ();
        out.emplace_back(lightspace::LightDirection::normalized(v), std::max(e, 1e-6));
    }
    return out;
}

// Checkpoints ---------------------------------------------------------------

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << kCheckpointHeader << "\n" << header.to_string() << "---\n" << "tensors " << tensors.size() << "\n";
    for (const auto& [name, t] : tensors) {
        out << name << " " << t.n << " " << t.c << " " << t.h << " " << t.w << "\n";
        out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
        out << "\n";
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kCheckpointHeader) throw FormatError(path.string() + ": not a " + std::string(kCheckpointHeader) + " file");
    std::string head;
    while (std::getline(in, line) && line != "---") head += line + "\n";
    if (line != "---") throw FormatError(path.string() + ": truncated header");
    Checkpoint ck;
    ck.header = KeyValueConfig::parse(head);
    std::string word;
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "tensors") throw FormatError(path.string() + ": missing tensor table");
    in.get();
    for (std::size_t i = 0; i < count; ++i) {
        std::string name;
        int n, c, h, w;
        if (!(in >> name >> n >> c >> h >> w) || n < 0 || c < 0 || h < 0 || w < 0)
            throw FormatError(path.string() + ": bad tensor record");
        in.get();
        Tensor t(n, c, h, w);
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!in) throw FormatError(path.string() + ": truncated tensor '" + name + "'");
        in.get();
        ck.tensors.emplace_back(name, std::move(t));
    }
    return ck;
}

Checkpoint make_checkpoint(const std::string& model_kind, std::vector<nn::Parameter*> params, KeyValueConfig header) {
    Checkpoint ck;
    ck.header = std::move(header);
    ck.header.set("model", model_kind);
    for (const auto* p : params) ck.tensors.emplace_back(p->name, p->value);
    return ck;
}

void load_parameters(const Checkpoint& ckpt, std::vector<nn::Parameter*> params) {
    for (nn::Parameter* p : params) {
        const auto it = std::find_if(ckpt.tensors.begin(), ckpt.tensors.end(),
                                     [&](const auto& e) { return e.first == p->name; });
        if (it == ckpt.tensors.end()) throw FormatError("checkpoint lacks parameter '" + p->name + "'");
        if (!it->second.same_shape(p->value))
            throw FormatError("checkpoint parameter '" + p->name + "' has shape " + it->second.shape_string());
        p->value.data = it->second.data;
    }
}

namespace {

void require_kind(const Checkpoint& ck, const std::string& kind) {
    const std::string got = ck.header.get_string("model", "");
    if (got != kind) throw FormatError("checkpoint holds a '" + got + "' model, expected '" + kind + "'");
}

}  // namespace

Checkpoint save_lcnet(LcNet& model, KeyValueConfig extra) {
    model.config().write(extra);
    return make_checkpoint("lcnet", model.parameters(), std::move(extra));
}

Checkpoint save_nenet(NeNet& model, KeyValueConfig extra) {
    model.config().write(extra);
    return make_checkpoint("nenet", model.parameters(), std::move(extra));
}

Checkpoint save_ups_fcn(UpsFcn& model, KeyValueConfig extra) {
    model.config().write(extra);
    return make_checkpoint("ups_fcn", model.parameters(), std::move(extra));
}

LcNet load_lcnet(const Checkpoint& ckpt) {
    require_kind(ckpt, "lcnet");
    LcNet m(LcNetConfig::read(ckpt.header), 0);
    load_parameters(ckpt, m.parameters());
    return m;
}

NeNet load_nenet(const Checkpoint& ckpt) {
    require_kind(ckpt, "nenet");
    NeNet m(NeNetConfig::read(ckpt.header), 0);
    load_parameters(ckpt, m.parameters());
    return m;
}

UpsFcn load_ups_fcn(const Checkpoint& ckpt) {
    require_kind(ckpt, "ups_fcn");
    UpsFcn m(UpsFcnConfig::read(ckpt.header), 0);
    load_parameters(ckpt, m.parameters());
    return m;
}

}  // namespace pscal::models
