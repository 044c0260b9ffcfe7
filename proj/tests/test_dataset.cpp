#include "doctest.h"
#include "test_support.hpp"

#include "latentblur/dataset.hpp"
#include "latentblur/image_io.hpp"

#include <fstream>
#include <set>

using namespace latentblur;
namespace fs = std::filesystem;

namespace {

ZStackSlide slide_with_levels(const std::string& id, const std::vector<int>& levels) {
  ZStackSlide s;
  s.slide_id = id;
  for (int z : levels) {
    ImageRecord r;
    r.slide_id = id;
    r.z_level = z;
    r.height = r.width = 4;
    s.images.emplace(z, r);
  }
  return s;
}

std::vector<ZStackSlide> numbered_slides(int n) {
  std::vector<ZStackSlide> out;
  for (int i = 0; i < n; ++i) out.push_back(slide_with_levels("s" + std::to_string(1000 + i), {0, 2, 4}));
  return out;
}

}  // namespace

TEST_CASE("split of 10 slides is 7/1/2") {
  const SplitAssignment split = split_slides(numbered_slides(10));
  CHECK(split.train.size() == 7);
  CHECK(split.val.size() == 1);
  CHECK(split.test.size() == 2);
}

TEST_CASE("split sizes stay within one slide of the exact ratio") {
  for (std::size_t n : {10u, 11u, 24u, 37u, 100u, 384u, 999u}) {
    const auto sizes = split_sizes(n, {7, 1, 2});
    CHECK(sizes[0] + sizes[1] + sizes[2] == n);
    const double exact[3] = {0.7 * n, 0.1 * n, 0.2 * n};
    for (int k = 0; k < 3; ++k) CHECK(std::abs(static_cast<double>(sizes[k]) - exact[k]) <= 1.0);
  }
  const auto s384 = split_sizes(384, {7, 1, 2});
  MESSAGE("384 slides -> ", s384[0], "/", s384[1], "/", s384[2]);
  CHECK(s384[1] == 38);
}

TEST_CASE("split is deterministic, slide-level and seed dependent") {
  const auto slides = numbered_slides(30);
  const SplitAssignment a = split_slides(slides, {7, 1, 2}, 5), b = split_slides(slides, {7, 1, 2}, 5);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  std::set<std::string> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == 30);
  CHECK(a.part_of(a.test.front()) == SplitAssignment::Part::test);
  CHECK_FALSE(a.part_of("missing").has_value());

  const SplitAssignment c = split_slides(slides, {7, 1, 2}, 6);
  CHECK((c.train != a.train || c.test != a.test));
  CHECK_THROWS_AS(split_slides(numbered_slides(9)), std::invalid_argument);
}

TEST_CASE("triplet enumeration matches a brute-force search") {
  const ZStackSlide full = slide_with_levels("a", {0, 2, 4, 6, 8, 10, 12, 14, 16});
  const auto triplets = enumerate_triplets(full);

  std::set<std::array<int, 3>> oracle;
  for (int a = 0; a <= 16; a += 2)
    for (int c = 0; c < a; c += 2) {
      const int sum = a + c;
      if (sum % 2 == 0 && (sum / 2) % 2 == 0) oracle.insert({a, sum / 2, c});
    }
  std::set<std::array<int, 3>> found;
  for (const Triplet& t : triplets) {
    found.insert(t.levels);
    CHECK(t.levels[0] > t.levels[1]);
    CHECK(t.levels[1] > t.levels[2]);
    CHECK(2 * t.levels[1] == t.levels[0] + t.levels[2]);
    CHECK(t.images[1]->z_level == t.levels[1]);
  }
  CHECK(triplets.size() == 16);
  CHECK(found == oracle);

  const auto small = enumerate_triplets(slide_with_levels("b", {0, 2, 4}));
  REQUIRE(small.size() == 1);
  CHECK(small[0].levels == std::array<int, 3>{4, 2, 0});
  CHECK(enumerate_triplets(slide_with_levels("c", {0, 4, 16})).empty());
}

TEST_CASE("ten-crop geometry") {
  const auto w = ten_crop_windows(256, 256, 128);
  CHECK(w[0] == CropWindow{0, 0, false});
  CHECK(w[1] == CropWindow{0, 128, false});
  CHECK(w[2] == CropWindow{128, 0, false});
  CHECK(w[3] == CropWindow{128, 128, false});
  CHECK(w[4] == CropWindow{64, 64, false});
  for (int i = 0; i < 5; ++i) {
    CHECK(w[i + 5].flipped);
    CHECK(w[i + 5].top == w[i].top);
    CHECK(w[i + 5].left == w[i].left);
  }

  Rng rng(61);
  const Image img = testing::random_image(rng, 256, 256);
  const auto crops = ten_crop(img, 128);
  REQUIRE(crops.size() == 10);
  CHECK(crops[5] == flip_horizontal(crops[0]));
  CHECK(crops[1].at(5, 7) == img.at(5, 128 + 7));
  CHECK(crops[4].at(0, 0) == img.at(64, 64));
  CHECK(crops[5].at(3, 0) == crops[0].at(3, 127));

  const auto same = ten_crop_windows(128, 128, 128);
  for (int i = 0; i < 5; ++i) CHECK(same[i] == (CropWindow{0, 0, false}));
  CHECK_THROWS_AS(ten_crop(testing::random_image(rng, 100, 200), 128), std::invalid_argument);
}

TEST_CASE("synthetic stacks are deterministic and blur grows with distance from focus") {
  SyntheticStackConfig cfg;
  cfg.n_slides = 3;
  cfg.image_size = 48;
  cfg.seed = 12;
  const auto a = generate_synthetic_stack(cfg), b = generate_synthetic_stack(cfg);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].slide_id == b[i].slide_id);
    CHECK(a[i].levels() == std::vector<int>{0, 2, 4, 6, 8, 10, 12, 14, 16});
    for (const auto& [z, rec] : a[i].images) CHECK(rec.load() == b[i].images.at(z).load());
  }
  CHECK(a[0].images.at(16).load() == synthetic_scene(cfg, 0));

  for (const auto& slide : a) {
    double prev = std::numeric_limits<double>::infinity();
    for (int z = 16; z >= 0; z -= 2) {
      const double sharpness = laplacian_variance(slide.images.at(z).load());
      CHECK(sharpness < prev);
      prev = sharpness;
    }
  }

  SyntheticStackConfig other = cfg;
  other.seed = 13;
  CHECK_FALSE(generate_synthetic_stack(other)[0].images.at(16).load() == a[0].images.at(16).load());

  SyntheticStackConfig bad = cfg;
  bad.sigma_schedule = {2.0, 1.0, 1.5, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.sigma_schedule.clear();
  bad.sigma_step = 0.3;
  CHECK(bad.sigmas().at(0) == doctest::Approx(2.4));
  CHECK(bad.sigmas().at(16) == 0.0);
}

TEST_CASE("directory ingestion keeps even levels up to the focal plane") {
  const fs::path dir = testing::scratch_dir("ingest_dir");
  Image tiny(1, 4, 4);
  tiny.data.setConstant(0.5f);
  for (const std::string slide : {"plateA", "plateB"})
    for (const std::string ch : {"w1", "w2"})
      for (int z = 0; z < 34; ++z) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_%s_z%02d.png", slide.c_str(), ch.c_str(), z);
        save_png(dir / name, tiny, 8);
      }
  const SlideIndex index = build_index(dir);
  REQUIRE(index.slides.size() == 4);
  for (const auto& s : index.slides) {
    CHECK(s.levels() == std::vector<int>{0, 2, 4, 6, 8, 10, 12, 14, 16});
    CHECK(s.height() == 4);
  }
  CHECK(filter_channel(index.slides, Channel::w2).size() == 2);

  std::ofstream(dir / "notes.png") << "x";
  CHECK_THROWS_WITH_AS(build_index(dir), doctest::Contains("notes.png"), IngestionError);
}

TEST_CASE("manifest ingestion and the minimum-level rule") {
  const fs::path dir = testing::scratch_dir("ingest_manifest");
  Image tiny(1, 4, 4);
  std::vector<ImageRecord> records;
  for (int z : {0, 2, 16}) {
    const std::string name = "one_" + std::to_string(z) + ".png";
    save_png(dir / name, tiny, 8);
    ImageRecord r;
    r.slide_id = "one";
    r.z_level = z;
    r.path = name;
    records.push_back(r);
  }
  for (int z : {0, 16}) {
    const std::string name = "two_" + std::to_string(z) + ".png";
    save_png(dir / name, tiny, 8);
    ImageRecord r;
    r.slide_id = "two";
    r.z_level = z;
    r.path = name;
    records.push_back(r);
  }
  write_manifest(dir / "manifest.csv", records);
  const SlideIndex index = build_index(dir / "manifest.csv");
  REQUIRE(index.slides.size() == 1);
  CHECK(index.slides[0].levels() == std::vector<int>{0, 2, 16});
  REQUIRE(index.warnings.size() == 1);
  CHECK(index.warnings[0].find("two") != std::string::npos);
  CHECK_THROWS_AS(build_index(dir / "absent.csv"), IngestionError);
}

TEST_CASE("materialized synthetic stacks round-trip through the manifest") {
  SyntheticStackConfig cfg;
  cfg.n_slides = 2;
  cfg.image_size = 24;
  cfg.n_levels = 3;
  const auto slides = generate_synthetic_stack(cfg);
  const fs::path dir = testing::scratch_dir("materialize");
  const fs::path manifest = materialize_slides(slides, dir);
  const SlideIndex index = build_index(manifest);
  REQUIRE(index.slides.size() == 2);
  CHECK(index.slides[0].levels() == std::vector<int>{12, 14, 16});
  const Image original = slides[0].images.at(12).load();
  const Image loaded = index.slides[0].images.at(12).load();
  CHECK((original.data - loaded.data).cwiseAbs().maxCoeff() <= 1.0f / 65535.0f);
}
