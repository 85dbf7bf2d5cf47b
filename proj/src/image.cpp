// SPDX-License-Identifier: Apache-2.0
#include "pscal/image.hpp"

#include <algorithm>
#include <cmath>

#include "pscal/error.hpp"

namespace pscal {

Image::Image(int height, int width, int channels, float fill)
    : h_(height), w_(width), c_(channels) {
    if (height < 0 || width < 0 || channels < 0) throw DomainError("negative image dimension");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Mask::Mask(int height, int width, bool fill) : h_(height), w_(width) {
    if (height < 0 || width < 0) throw DomainError("negative mask dimension");
    bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
    count_ = fill ? height * width : 0;
}

void Mask::set(int y, int x, bool v) {
    auto& b = bits_[static_cast<std::size_t>(y) * w_ + x];
    count_ += static_cast<int>(v) - static_cast<int>(b != 0);
    b = v ? 1 : 0;
}

void ImageStack::validate() const {
    if (images.empty()) throw DomainError("image stack is empty");
    const Image& first = images.front();
    if (first.channels() != 1 && first.channels() != 3) throw DomainError("images must have 1 or 3 channels");
    for (const Image& img : images)
        if (!img.same_shape(first)) throw DomainError("images in a stack must share their shape");
    if (mask.height() != first.height() || mask.width() != first.width())
        throw DomainError("mask shape does not match the images");
    if (lights && static_cast<int>(lights->size()) != count())
        throw DomainError("light count does not match image count");
    if (normals && (normals->height() != first.height() || normals->width() != first.width()))
        throw DomainError("normal map shape does not match the images");
}

Image resize(const Image& img, int height, int width) {
    if (height < 1 || width < 1) throw DomainError("resize target must be positive");
    if (img.height() == height && img.width() == width) return img;
    Image out(height, width, img.channels());
    const double sy = static_cast<double>(img.height()) / height;
    const double sx = static_cast<double>(img.width()) / width;
    const int nc = img.channels();
    if (sy >= 1.0 && sx >= 1.0) {
        // Box filter over the (fractional) source footprint.
        for (int y = 0; y < height; ++y) {
            const double y0 = y * sy, y1 = (y + 1) * sy;
            for (int x = 0; x < width; ++x) {
                const double x0 = x * sx, x1 = (x + 1) * sx;
                std::vector<double> acc(nc, 0.0);
                double wsum = 0.0;
                for (int iy = static_cast<int>(y0); iy < std::min(img.height(), static_cast<int>(std::ceil(y1))); ++iy) {
                    const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
                    for (int ix = static_cast<int>(x0); ix < std::min(img.width(), static_cast<int>(std::ceil(x1))); ++ix) {
                        const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
                        const double wgt = wx * wy;
                        if (wgt <= 0.0) continue;
                        for (int c = 0; c < nc; ++c) acc[c] += wgt * img.at(iy, ix, c);
                        wsum += wgt;
                    }
                }
                for (int c = 0; c < nc; ++c) out.at(y, x, c) = static_cast<float>(acc[c] / wsum);
            }
        }
        return out;
    }
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double tx = fx - x0;
            for (int c = 0; c < nc; ++c) {
                const double v = (1 - ty) * ((1 - tx) * img.at(y0, x0, c) + tx * img.at(y0, x1, c)) +
                                 ty * ((1 - tx) * img.at(y1, x0, c) + tx * img.at(y1, x1, c));
                out.at(y, x, c) = static_cast<float>(v);
            }
        }
    }
    return out;
}

Mask resize(const Mask& mask, int height, int width) {
    if (height < 1 || width < 1) throw DomainError("resize target must be positive");
    if (mask.height() == height && mask.width() == width) return mask;
    Mask out(height, width);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
            out.set(y, x, mask(sy, sx));
        }
    }
    return out;
}

ImageStack resize(const ImageStack& stack, int height, int width) {
    ImageStack out;
    out.images.reserve(stack.images.size());
    for (const Image& img : stack.images) out.images.push_back(resize(img, height, width));
    out.mask = resize(stack.mask, height, width);
    out.lights = stack.lights;
    if (stack.normals) {
        NormalMap n;
        n.normals = resize(stack.normals->normals, height, width);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const Eigen::Vector3d v = n.at(y, x);
                const double len = v.norm();
                n.set(y, x, len > 0.0 ? Eigen::Vector3d(v / len) : Eigen::Vector3d(0, 0, 1));
            }
        out.normals = std::move(n);
    }
    return out;
}

Image to_grayscale(const Image& img) {
    Image out(img.height(), img.width(), 1);
    const int nc = img.channels();
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            float s = 0.0f;
            for (int c = 0; c < nc; ++c) s += img.at(y, x, c);
            out.at(y, x, 0) = s / static_cast<float>(nc);
        }
    return out;
}

}  // namespace pscal
