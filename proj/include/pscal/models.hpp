// SPDX-License-Identifier: Apache-2.0
//
// Set networks for uncalibrated photometric stereo.
//
// LcNet: shared convolutional extractor applied to every image, element-wise
// max over the set gives a global feature, each local feature is
// concatenated with it and passed through a shared lighting head. The
// classification head emits azimuth / elevation / intensity scores; the
// regression variant emits a unit direction and a positive intensity.
//
// NeNet: every image is divided by its light intensity and stacked with its
// light direction broadcast to three constant channels; an encoder down to
// quarter resolution and back to half, max fusion and a regressor back to
// full resolution give one unit normal per pixel.
//
// UpsFcn: single-stage baseline without any lighting input (images and,
// optionally, the mask) with an encoder/decoder of comparable size.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pscal/config.hpp"
#include "pscal/image.hpp"
#include "pscal/lightspace.hpp"
#include "pscal/nn/layers.hpp"

namespace pscal::models {

enum class LightingHead { classification, regression };

struct LcNetConfig {
    lightspace::LightingBins bins;
    int base_channels = 16;
    bool use_mask = true;
    /// false: the global feature is replaced by zeros (per-image estimation).
    bool use_global = true;
    LightingHead head = LightingHead::classification;
    int input_resolution = 32;
    int image_channels = 3;

    void validate() const;
    int input_channels() const { return image_channels + (use_mask ? 1 : 0); }
    int feature_channels() const { return 4 * base_channels; }
    int hidden_units() const { return 8 * base_channels; }
    void write(KeyValueConfig& kv) const;
    static LcNetConfig read(const KeyValueConfig& kv);
};

struct NeNetConfig {
    int base_channels = 16;
    int image_channels = 3;

    void validate() const;
    int input_channels() const { return image_channels + 3; }
    void write(KeyValueConfig& kv) const;
    static NeNetConfig read(const KeyValueConfig& kv);
};

struct UpsFcnConfig {
    int base_channels = 16;
    int image_channels = 3;
    bool use_mask = true;
    /// Extra 4c->4c layers at quarter resolution in both extractor and
    /// regressor (the "deep" capacity knob).
    int deep_layers = 6;

    void validate() const;
    int input_channels() const { return image_channels + (use_mask ? 1 : 0); }
    void write(KeyValueConfig& kv) const;
    static UpsFcnConfig read(const KeyValueConfig& kv);
};

/// Softmax probabilities of one image.
struct LightingPrediction {
    std::vector<double> azimuth;
    std::vector<double> elevation;
    std::vector<double> intensity;
};

class LcNet {
public:
    LcNet(const LcNetConfig& config, std::uint64_t seed);
    LcNet(const LcNet&) = delete;
    LcNet& operator=(const LcNet&) = delete;
    LcNet(LcNet&&) = default;
    LcNet& operator=(LcNet&&) = default;

    struct Output {
        // classification: raw scores (N, K, 1, 1)
        nn::Tensor azimuth, elevation, intensity;
        // regression: (N, 3, 1, 1) unit vectors and (N, 1, 1, 1) > 0
        nn::Tensor direction, intensity_value;
        nn::Tensor global;  // fused feature (B, C, h, w)
    };
    struct Gradient {
        nn::Tensor azimuth, elevation, intensity;
        nn::Tensor direction, intensity_value;
    };

    /// input: (B * q, input_channels, R, R) with consecutive groups of q
    /// images per object.
    Output forward(const nn::Tensor& input, int q, bool train);
    void backward(const Gradient& grad);

    std::vector<nn::Parameter*> parameters();
    std::size_t parameter_count();
    const LcNetConfig& config() const { return config_; }

private:
    LcNetConfig config_;
    nn::Sequential extractor_;
    nn::MaxFusion fusion_;
    nn::Sequential trunk_;
    nn::Sequential azimuth_head_, elevation_head_, intensity_head_;
    nn::Sequential direction_head_, value_head_;
    int group_ = 1;
};

class NeNet {
public:
    NeNet(const NeNetConfig& config, std::uint64_t seed);
    NeNet(const NeNet&) = delete;
    NeNet& operator=(const NeNet&) = delete;
    NeNet(NeNet&&) = default;
    NeNet& operator=(NeNet&&) = default;

    /// input: (B * q, image_channels + 3, H, W) with H, W multiples of 4;
    /// returns unit normals (B, 3, H, W).
    nn::Tensor forward(const nn::Tensor& input, int q, bool train);
    void backward(const nn::Tensor& d_normals);

    std::vector<nn::Parameter*> parameters();
    std::size_t parameter_count();
    const NeNetConfig& config() const { return config_; }

private:
    NeNetConfig config_;
    nn::Sequential extractor_;
    nn::MaxFusion fusion_;
    nn::Sequential regressor_;
};

class UpsFcn {
public:
    UpsFcn(const UpsFcnConfig& config, std::uint64_t seed);
    UpsFcn(const UpsFcn&) = delete;
    UpsFcn& operator=(const UpsFcn&) = delete;
    UpsFcn(UpsFcn&&) = default;
    UpsFcn& operator=(UpsFcn&&) = default;

    /// input: (B * q, input_channels, H, W) with H and W multiples of 4.
    nn::Tensor forward(const nn::Tensor& input, int q, bool train);
    void backward(const nn::Tensor& d_normals);

    std::vector<nn::Parameter*> parameters();
    std::size_t parameter_count();
    const UpsFcnConfig& config() const { return config_; }

private:
    UpsFcnConfig config_;
    nn::Sequential extractor_;
    nn::MaxFusion fusion_;
    nn::Sequential regressor_;
};

// Input assembly ------------------------------------------------------------

/// Images resized to the input resolution, plus the mask channel when
/// configured: (q, input_channels, R, R).
nn::Tensor lcnet_input(const ImageStack& stack, const LcNetConfig& config);
/// Images divided by their intensity, followed by the broadcast direction:
/// (q, image_channels + 3, H', W') with H', W' rounded up to multiples of 4.
nn::Tensor nenet_input(const ImageStack& stack, const std::vector<lightspace::LightSample>& lights,
                       const NeNetConfig& config);
/// (q, input_channels, H', W') with H', W' rounded up to multiples of 4.
nn::Tensor ups_fcn_input(const ImageStack& stack, const UpsFcnConfig& config);

/// Planar (3, H, W) normals of item b into a NormalMap.
NormalMap to_normal_map(const nn::Tensor& normals, int item, int height, int width);

// Inference on a single object ---------------------------------------------

/// Throws DomainError on an empty stack.
std::vector<LightingPrediction> lcnet_forward(const ImageStack& stack, LcNet& model);

/// Arg-max of every head (lowest index wins ties) decoded to bin centres.
/// Throws NumericError on NaN probabilities.
std::vector<lightspace::LightSample> decode_predictions(const std::vector<LightingPrediction>& preds,
                                                        const lightspace::LightingBins& bins);

/// Throws DomainError on an empty stack, a light count mismatch or a
/// non-positive intensity.
NormalMap nenet_forward(const ImageStack& stack, const std::vector<lightspace::LightSample>& lights, NeNet& model);

std::vector<std::pair<Eigen::Vector3d, double>> lcnet_reg_forward(const ImageStack& stack, LcNet& model);

NormalMap ups_fcn_forward(const ImageStack& stack, UpsFcn& model);

/// Estimated lights of either LcNet head type.
std::vector<lightspace::LightSample> estimate_lights(const ImageStack& stack, LcNet& model);

// Checkpoints ---------------------------------------------------------------

inline constexpr const char* kCheckpointHeader = "ps-selfcal-ckpt-v1";

/// Header block (model kind, config, bins, seed, ...) plus named tensors.
struct Checkpoint {
    KeyValueConfig header;
    std::vector<std::pair<std::string, nn::Tensor>> tensors;

    void save(const std::filesystem::path& path) const;
    /// Throws FormatError on a wrong version header or truncated data.
    static Checkpoint load(const std::filesystem::path& path);
};

Checkpoint make_checkpoint(const std::string& model_kind, std::vector<nn::Parameter*> params, KeyValueConfig header);
/// Copies tensors into parameters by name; throws FormatError on a missing
/// name or a shape mismatch.
void load_parameters(const Checkpoint& ckpt, std::vector<nn::Parameter*> params);

Checkpoint save_lcnet(LcNet& model, KeyValueConfig extra = {});
Checkpoint save_nenet(NeNet& model, KeyValueConfig extra = {});
Checkpoint save_ups_fcn(UpsFcn& model, KeyValueConfig extra = {});
LcNet load_lcnet(const Checkpoint& ckpt);
NeNet load_nenet(const Checkpoint& ckpt);
UpsFcn load_ups_fcn(const Checkpoint& ckpt);

}  // namespace pscal::models
