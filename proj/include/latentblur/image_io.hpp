#pragma once

#include "latentblur/image.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latentblur {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Loads a PNG or TIFF (8- or 16-bit) and normalizes to [0,1] by the dtype
 * maximum. Colour inputs are converted to luminance unless keep_channels is
 * set, in which case RGB is kept (alpha dropped).
 */
Image load_image(const std::filesystem::path& path, bool keep_channels = false);

Image decode_png(std::string_view bytes, bool keep_channels = false);

struct ImageSize {
  Index height = 0;
  Index width = 0;
};

/// Reads only the header of a PNG or TIFF file.
ImageSize probe_image_size(const std::filesystem::path& path);

/// Encodes 1- or 3-channel images as PNG; bit_depth is 8 or 16.
std::string encode_png(const Image& image, int bit_depth = 8);

void save_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

/// Quantizes exactly as encode_png does, so saved-then-loaded comparisons are exact.
Image quantize(const Image& image, int bit_depth);

}  // namespace latentblur
