#pragma once

#include "latentblur/tensor.hpp"

#include <array>
#include <span>
#include <vector>

namespace latentblur {

/// A multi-channel image with values in [0, 1]; same pixel layout as one Tensor sample.
struct Image {
  Index channels = 1;
  Index height = 0;
  Index width = 0;
  Matrix<float> data;  // channels x (height*width), pixel (y, x) at column y*width + x

  Image() = default;
  Image(Index c, Index h, Index w) : channels(c), height(h), width(w), data(Matrix<float>::Zero(c, h * w)) {}

  float& at(Index y, Index x, Index c = 0) { return data(c, y * width + x); }
  float at(Index y, Index x, Index c = 0) const { return data(c, y * width + x); }

  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  bool operator==(const Image& o) const { return same_shape(o) && data == o.data; }
};

/// Placement of one square crop inside a larger image.
struct CropWindow {
  Index top = 0;
  Index left = 0;
  bool flipped = false;

  bool operator==(const CropWindow&) const = default;
};

Image crop(const Image& image, Index top, Index left, Index size);
Image flip_horizontal(const Image& image);
Image apply_crop(const Image& image, const CropWindow& window, Index size);
Image center_crop(const Image& image, Index size);

/**
 * Ten-crop geometry: top-left, top-right, bottom-left, bottom-right, center,
 * followed by the horizontal flips of those five in the same order.
 * Throws if the image is smaller than size x size.
 */
std::array<CropWindow, 10> ten_crop_windows(Index height, Index width, Index size);
std::vector<Image> ten_crop(const Image& image, Index size = 128);

/// Separable Gaussian filter with mirrored borders; sigma <= 0 returns the input.
Image gaussian_blur(const Image& image, double sigma);

/// Variance of the 4-neighbour Laplacian over interior pixels (sharpness proxy).
double laplacian_variance(const Image& image);

/// Bilinear resize (pixel-center aligned).
Image resize_bilinear(const Image& image, Index height, Index width);

/// Packs same-shaped images into one batch tensor.
Tensor<float> stack_images(std::span<const Image> images);
Tensor<float> stack_images(std::span<const Image* const> images);
Image image_from_batch(const Tensor<float>& batch, Index n);

}  // namespace latentblur
