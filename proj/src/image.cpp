#include "latentblur/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace latentblur {

Image crop(const Image& image, Index top, Index left, Index size) {
  if (top < 0 || left < 0 || top + size > image.height || left + size > image.width) {
    throw std::out_of_range("crop: window exceeds image bounds");
  }
  Image out(image.channels, size, size);
  for (Index y = 0; y < size; ++y) {
    out.data.middleCols(y * size, size) = image.data.middleCols((top + y) * image.width + left, size);
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.channels, image.height, image.width);
  for (Index y = 0; y < image.height; ++y)
    for (Index x = 0; x < image.width; ++x)
      out.data.col(y * image.width + x) = image.data.col(y * image.width + (image.width - 1 - x));
  return out;
}

Image apply_crop(const Image& image, const CropWindow& window, Index size) {
  Image out = crop(image, window.top, window.left, size);
  return window.flipped ? flip_horizontal(out) : out;
}

Image center_crop(const Image& image, Index size) {
  if (image.height < size || image.width < size) {
    throw std::invalid_argument("center_crop: image " + std::to_string(image.height) + "x" +
                                std::to_string(image.width) + " is smaller than " + std::to_string(size));
  }
  return crop(image, (image.height - size) / 2, (image.width - size) / 2, size);
}

std::array<CropWindow, 10> ten_crop_windows(Index height, Index width, Index size) {
  if (height < size || width < size) {
    throw std::invalid_argument("ten_crop: image " + std::to_string(height) + "x" +
                                std::to_string(width) + " is smaller than the " +
                                std::to_string(size) + "x" + std::to_string(size) + " crop");
  }
  const Index bottom = height - size;
  const Index right = width - size;
  std::array<CropWindow, 10> w{};
  w[0] = {0, 0, false};
  w[1] = {0, right, false};
  w[2] = {bottom, 0, false};
  w[3] = {bottom, right, false};
  w[4] = {bottom / 2, right / 2, false};
  for (int i = 0; i < 5; ++i) w[5 + i] = {w[i].top, w[i].left, true};
  return w;
}

std::vector<Image> ten_crop(const Image& image, Index size) {
  std::vector<Image> crops;
  crops.reserve(10);
  for (const CropWindow& w : ten_crop_windows(image.height, image.width, size)) {
    crops.push_back(apply_crop(image, w, size));
  }
  return crops;
}

namespace {

Index mirror(Index i, Index n) {
  // Reflect without repeating the edge sample, period 2n-2.
  if (n == 1) return 0;
  const Index period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

Image gaussian_blur(const Image& image, double sigma) {
  if (!(sigma > 0.0)) return image;
  const std::vector<double> k = gaussian_kernel(sigma);
  const Index radius = static_cast<Index>(k.size() / 2);
  const Index h = image.height;
  const Index w = image.width;

  Image tmp(image.channels, h, w);
  Image out(image.channels, h, w);
  for (Index c = 0; c < image.channels; ++c) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        double acc = 0.0;
        for (Index t = -radius; t <= radius; ++t) acc += k[t + radius] * image.at(y, mirror(x + t, w), c);
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
    }
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        double acc = 0.0;
        for (Index t = -radius; t <= radius; ++t) acc += k[t + radius] * tmp.at(mirror(y + t, h), x, c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

double laplacian_variance(const Image& image) {
  if (image.height < 3 || image.width < 3) throw std::invalid_argument("laplacian_variance: image too small");
  double sum = 0.0;
  double sum_sq = 0.0;
  Index count = 0;
  for (Index c = 0; c < image.channels; ++c) {
    for (Index y = 1; y + 1 < image.height; ++y) {
      for (Index x = 1; x + 1 < image.width; ++x) {
        const double lap = static_cast<double>(image.at(y - 1, x, c)) + image.at(y + 1, x, c) +
                           image.at(y, x - 1, c) + image.at(y, x + 1, c) - 4.0 * image.at(y, x, c);
        sum += lap;
        sum_sq += lap * lap;
        ++count;
      }
    }
  }
  const double mean = sum / static_cast<double>(count);
  return sum_sq / static_cast<double>(count) - mean * mean;
}

Image resize_bilinear(const Image& image, Index height, Index width) {
  if (height < 1 || width < 1) throw std::invalid_argument("resize_bilinear: target must be non-empty");
  Image out(image.channels, height, width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  for (Index y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const Index y0 = static_cast<Index>(std::floor(fy));
    const Index y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Index x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const Index x0 = static_cast<Index>(std::floor(fx));
      const Index x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (Index c = 0; c < image.channels; ++c) {
        const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bot = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

namespace {

template <typename Get>
Tensor<float> stack_impl(std::size_t n, Get get) {
  if (n == 0) throw std::invalid_argument("stack_images: empty batch");
  const Image& first = get(0);
  Tensor<float> t(static_cast<Index>(n), first.channels, first.height, first.width);
  const Index pix = first.height * first.width;
  for (std::size_t i = 0; i < n; ++i) {
    const Image& im = get(i);
    if (!im.same_shape(first)) throw std::invalid_argument("stack_images: images differ in shape");
    t.data.middleCols(static_cast<Index>(i) * pix, pix) = im.data;
  }
  return t;
}

}  // namespace

Tensor<float> stack_images(std::span<const Image> images) {
  return stack_impl(images.size(), [&](std::size_t i) -> const Image& { return images[i]; });
}

Tensor<float> stack_images(std::span<const Image* const> images) {
  return stack_impl(images.size(), [&](std::size_t i) -> const Image& { return *images[i]; });
}

Image image_from_batch(const Tensor<float>& batch, Index n) {
  Image out(batch.channels, batch.height, batch.width);
  const Index pix = batch.height * batch.width;
  out.data = batch.data.middleCols(n * pix, pix);
  return out;
}

}  // namespace latentblur
