#include "latentblur/image_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <vector>

namespace latentblur {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool has_png_signature(std::string_view bytes) {
  return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

bool has_tiff_signature(std::string_view bytes) {
  return bytes.size() >= 4 && (bytes.substr(0, 4) == std::string_view("II*\0", 4) ||
                               bytes.substr(0, 4) == std::string_view("MM\0*", 4));
}

/// Collapses interleaved samples into the output image (luminance or RGB).
Image from_interleaved(const std::vector<double>& samples, Index h, Index w, int spp, bool keep_channels) {
  const bool colour = spp >= 3;
  const Index out_c = (colour && keep_channels) ? 3 : 1;
  Image img(out_c, h, w);
  for (Index p = 0; p < h * w; ++p) {
    const double* s = &samples[static_cast<std::size_t>(p * spp)];
    if (!colour) {
      img.data(0, p) = static_cast<float>(s[0]);
    } else if (keep_channels) {
      for (Index c = 0; c < 3; ++c) img.data(c, p) = static_cast<float>(s[c]);
    } else {
      img.data(0, p) = static_cast<float>(0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2]);
    }
  }
  return img;
}

struct PngReadState {
  std::string_view bytes;
  std::size_t offset = 0;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + n > st->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->bytes.data() + st->offset, n);
  st->offset += n;
}

void png_error_throw(png_structp, png_const_charp msg) { throw ImageIoError(std::string("png: ") + msg); }
void png_warning_ignore(png_structp, png_const_charp) {}

Image decode_tiff(const std::filesystem::path& path, bool keep_channels) {
  TIFFSetWarningHandler(nullptr);
  std::unique_ptr<TIFF, decltype(&TIFFClose)> tif(TIFFOpen(path.string().c_str(), "r"), &TIFFClose);
  if (!tif) throw ImageIoError("cannot open TIFF " + path.string());
  std::uint32_t w = 0, h = 0;
  std::uint16_t bps = 8, spp = 1, fmt = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  if ((bps != 8 && bps != 16) || fmt != SAMPLEFORMAT_UINT) {
    throw ImageIoError("TIFF " + path.string() + ": only 8/16-bit unsigned samples are supported");
  }
  if (planar != PLANARCONFIG_CONTIG && spp > 1) {
    throw ImageIoError("TIFF " + path.string() + ": planar sample layout is not supported");
  }
  const double maxv = bps == 8 ? 255.0 : 65535.0;
  std::vector<double> samples(static_cast<std::size_t>(w) * h * spp);
  std::vector<unsigned char> line(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
  for (std::uint32_t y = 0; y < h; ++y) {
    if (TIFFReadScanline(tif.get(), line.data(), y) < 0) throw ImageIoError("TIFF read failed: " + path.string());
    for (std::uint32_t i = 0; i < w * spp; ++i) {
      double v;
      if (bps == 8) {
        v = line[i];
      } else {
        std::uint16_t s;
        std::memcpy(&s, line.data() + 2 * i, 2);
        v = s;
      }
      samples[static_cast<std::size_t>(y) * w * spp + i] = v / maxv;
    }
  }
  return from_interleaved(samples, h, w, spp, keep_channels);
}

}  // namespace

Image decode_png(std::string_view bytes, bool keep_channels) {
  if (!has_png_signature(bytes)) throw ImageIoError("not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
  if (!png) throw ImageIoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  PngReadState state{bytes, 0};
  png_set_read_fn(png, &state, png_read_from_memory);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // native little-endian 16-bit
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int spp = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());

  const double maxv = depth == 16 ? 65535.0 : 255.0;
  std::vector<double> samples(static_cast<std::size_t>(w) * h * spp);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * spp; ++i) {
      double v;
      if (depth == 16) {
        std::uint16_t s;
        std::memcpy(&s, rows[y] + 2 * i, 2);
        v = s;
      } else {
        v = rows[y][i];
      }
      samples[static_cast<std::size_t>(y) * w * spp + i] = v / maxv;
    }
  }
  return from_interleaved(samples, h, w, spp, keep_channels);
}

Image load_image(const std::filesystem::path& path, bool keep_channels) {
  const std::string bytes = read_file(path);
  if (has_png_signature(bytes)) return decode_png(bytes, keep_channels);
  if (has_tiff_signature(bytes)) return decode_tiff(path, keep_channels);
  throw ImageIoError("unsupported image format (PNG or TIFF expected): " + path.string());
}

ImageSize probe_image_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image " + path.string());
  std::string head(32, '\0');
  in.read(head.data(), 32);
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (has_png_signature(head) && head.size() >= 24) {
    auto be32 = [&](std::size_t o) {
      return (static_cast<std::uint32_t>(static_cast<unsigned char>(head[o])) << 24) |
             (static_cast<std::uint32_t>(static_cast<unsigned char>(head[o + 1])) << 16) |
             (static_cast<std::uint32_t>(static_cast<unsigned char>(head[o + 2])) << 8) |
             static_cast<std::uint32_t>(static_cast<unsigned char>(head[o + 3]));
    };
    return {static_cast<Index>(be32(20)), static_cast<Index>(be32(16))};
  }
  if (has_tiff_signature(head)) {
    TIFFSetWarningHandler(nullptr);
    std::unique_ptr<TIFF, decltype(&TIFFClose)> tif(TIFFOpen(path.string().c_str(), "r"), &TIFFClose);
    if (!tif) throw ImageIoError("cannot open TIFF " + path.string());
    std::uint32_t w = 0, h = 0;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    return {static_cast<Index>(h), static_cast<Index>(w)};
  }
  throw ImageIoError("unsupported image format (PNG or TIFF expected): " + path.string());
}

Image quantize(const Image& image, int bit_depth) {
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  Image out = image;
  out.data = (image.data.array().cast<double>().max(0.0).min(1.0) * maxv).round().cast<float>() /
             static_cast<float>(maxv);
  return out;
}

std::string encode_png(const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ImageIoError("encode_png: bit depth must be 8 or 16");
  if (image.channels != 1 && image.channels != 3) throw ImageIoError("encode_png: 1 or 3 channels required");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
  if (!png) throw ImageIoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  std::string out;
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      [](png_structp) {});
  const int color = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed compression settings keep the byte stream reproducible.
  png_set_compression_level(png, 6);
  png_write_info(png, info);

  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width * image.channels) * bytes_per_sample);
  for (Index y = 0; y < image.height; ++y) {
    std::size_t k = 0;
    for (Index x = 0; x < image.width; ++x) {
      for (Index c = 0; c < image.channels; ++c) {
        const double v = std::round(std::clamp(static_cast<double>(image.at(y, x, c)), 0.0, 1.0) * maxv);
        if (bit_depth == 16) {
          const auto s = static_cast<std::uint16_t>(v);
          row[k++] = static_cast<unsigned char>(s >> 8);  // PNG is big-endian
          row[k++] = static_cast<unsigned char>(s & 0xFF);
        } else {
          row[k++] = static_cast<unsigned char>(v);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  return out;
}

void save_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  const std::string bytes = encode_png(image, bit_depth);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace latentblur
