// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pscal/lightspace.hpp"

namespace pscal {

/// Interleaved (HWC) float image.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, float fill = 0.0f);

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(h_) * w_; }
    bool empty() const { return data_.empty(); }

    float& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + c]; }
    float at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + c]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    bool same_shape(const Image& o) const { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }
    bool operator==(const Image&) const = default;

private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<float> data_;
};

class Mask {
public:
    Mask() = default;
    Mask(int height, int width, bool fill = false);

    int height() const { return h_; }
    int width() const { return w_; }
    bool operator()(int y, int x) const { return bits_[static_cast<std::size_t>(y) * w_ + x] != 0; }
    void set(int y, int x, bool v);
    /// Number of foreground pixels.
    int count() const { return count_; }
    std::span<const std::uint8_t> bits() const { return bits_; }

    bool operator==(const Mask&) const = default;

private:
    int h_ = 0, w_ = 0, count_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Per-pixel unit normals (camera frame, z toward the viewer).
struct NormalMap {
    Image normals;  // 3 channels

    NormalMap() = default;
    NormalMap(int height, int width) : normals(height, width, 3) {}

    int height() const { return normals.height(); }
    int width() const { return normals.width(); }
    Eigen::Vector3d at(int y, int x) const {
        return {normals.at(y, x, 0), normals.at(y, x, 1), normals.at(y, x, 2)};
    }
    void set(int y, int x, const Eigen::Vector3d& n) {
        for (int c = 0; c < 3; ++c) normals.at(y, x, c) = static_cast<float>(n[c]);
    }
    bool operator==(const NormalMap&) const = default;
};

/// q observations of one object plus its mask; ground truth is attached for
/// synthetic data.
struct ImageStack {
    std::vector<Image> images;
    Mask mask;
    std::optional<std::vector<lightspace::LightSample>> lights;
    std::optional<NormalMap> normals;

    int count() const { return static_cast<int>(images.size()); }
    int height() const { return mask.height(); }
    int width() const { return mask.width(); }
    int channels() const { return images.empty() ? 0 : images.front().channels(); }

    /// Throws DomainError on an empty stack or inconsistent shapes.
    void validate() const;
};

/// Area-averaging resize (bilinear when upsampling).
Image resize(const Image& img, int height, int width);
/// Nearest-neighbour resize of a mask.
Mask resize(const Mask& mask, int height, int width);
/// Resizes images, mask and normals; lights are carried over unchanged.
ImageStack resize(const ImageStack& stack, int height, int width);

/// Per-pixel channel mean.
Image to_grayscale(const Image& img);

}  // namespace pscal
