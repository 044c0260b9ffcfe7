#include "doctest.h"
#include "test_support.hpp"

#include "latentblur/image_io.hpp"

#include <tiffio.h>

using namespace latentblur;
namespace fs = std::filesystem;

TEST_CASE("PNG round-trips at 8 and 16 bits") {
  const fs::path dir = testing::scratch_dir("png");
  Rng rng(81);
  const Image img = testing::random_image(rng, 9, 13);
  for (int depth : {8, 16}) {
    const fs::path p = dir / ("img" + std::to_string(depth) + ".png");
    save_png(p, img, depth);
    const Image back = load_image(p);
    CHECK(back.height == 9);
    CHECK(back.width == 13);
    const float step = 1.0f / static_cast<float>((1 << depth) - 1);
    CHECK((back.data - img.data).cwiseAbs().maxCoeff() <= 0.5f * step + 1e-6f);
    CHECK(back == quantize(img, depth));
    const ImageSize size = probe_image_size(p);
    CHECK(size.height == 9);
    CHECK(size.width == 13);
  }
  const std::string bytes = encode_png(img, 8);
  CHECK(decode_png(bytes) == quantize(img, 8));
  CHECK_THROWS_AS(decode_png("not a png"), ImageIoError);
}

TEST_CASE("RGB inputs collapse to grayscale unless channels are kept") {
  Image rgb(3, 2, 2);
  rgb.data.row(0).setConstant(1.0f);
  const std::string bytes = encode_png(rgb, 8);
  CHECK(decode_png(bytes, true).channels == 3);
  const Image gray = decode_png(bytes);
  CHECK(gray.channels == 1);
  CHECK(gray.data.maxCoeff() > 0.0f);
  CHECK(gray.data.maxCoeff() < 1.0f);
}

TEST_CASE("16-bit TIFF inputs load to unit range") {
  const fs::path p = testing::scratch_dir("tiff") / "stack.tif";
  TIFF* tif = TIFFOpen(p.string().c_str(), "w");
  REQUIRE(tif != nullptr);
  const std::uint32_t w = 5, h = 3;
  TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, w);
  TIFFSetField(tif, TIFFTAG_IMAGELENGTH, h);
  TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 16);
  TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, h);
  std::vector<std::uint16_t> row(w);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) row[x] = static_cast<std::uint16_t>((y * w + x) * 4369);
    TIFFWriteScanline(tif, row.data(), y, 0);
  }
  TIFFClose(tif);

  const Image img = load_image(p);
  CHECK(img.height == 3);
  CHECK(img.width == 5);
  CHECK(img.at(0, 0) == 0.0f);
  CHECK(img.at(2, 4) == doctest::Approx(14.0 * 4369.0 / 65535.0));
  CHECK(img.at(1, 2) == doctest::Approx(7.0 * 4369.0 / 65535.0));
}

TEST_CASE("image helpers") {
  Rng rng(82);
  const Image img = testing::random_image(rng, 10, 12);
  CHECK(flip_horizontal(flip_horizontal(img)) == img);
  const Image c = center_crop(img, 6);
  CHECK(c.at(0, 0) == img.at(2, 3));
  const Image same = resize_bilinear(img, 10, 12);
  CHECK((same.data - img.data).cwiseAbs().maxCoeff() <= 1e-6f);
  CHECK(gaussian_blur(img, 0.0) == img);
  CHECK(laplacian_variance(gaussian_blur(img, 1.5)) < laplacian_variance(img));

  const Image imgs[2] = {img, flip_horizontal(img)};
  const Tensor<float> t = stack_images(std::span<const Image>(imgs, 2));
  CHECK(t.batch == 2);
  CHECK(image_from_batch(t, 1) == imgs[1]);
}
