#pragma once

#include "latentblur/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentblur {

/// The two stains of the source collection: nuclei (w1) and cell structure (w2).
enum class Channel { w1, w2 };

const char* to_string(Channel c);
Channel parse_channel(const std::string& text);

/// Highest z-level kept; it is the in-focus plane (least blur).
inline constexpr int kFocusLevel = 16;

constexpr bool is_usable_level(int z) { return z >= 0 && z <= kFocusLevel && z % 2 == 0; }

class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One image of one slide at one blur level, either on disk or in memory.
struct ImageRecord {
  std::string slide_id;
  Channel channel = Channel::w1;
  int z_level = 0;
  std::filesystem::path path;
  std::shared_ptr<const Image> buffer;
  Index height = 0;
  Index width = 0;

  /// Decoded pixels in [0,1].
  Image load() const;
};

/// All usable blur levels of one slide in one channel, keyed by z-level.
struct ZStackSlide {
  std::string slide_id;
  Channel channel = Channel::w1;
  std::map<int, ImageRecord> images;

  std::vector<int> levels() const;
  Index height() const { return images.empty() ? 0 : images.begin()->second.height; }
  Index width() const { return images.empty() ? 0 : images.begin()->second.width; }
};

/// Filename parser for directory ingestion: capture groups of `regex` give slide id, channel and z-level.
struct FilenamePattern {
  std::string regex = R"(^(?:.*/)?([^/]+)_(w[12])_z(\d+)\.(?:png|tif|tiff)$)";
  int slide_group = 1;
  int channel_group = 2;
  int z_group = 3;
};

struct SlideIndex {
  std::vector<ZStackSlide> slides;
  std::vector<std::string> warnings;
};

/**
 * Indexes a manifest CSV (header path,slide_id,channel,z_level; paths
 * relative to the manifest) or a directory tree of PNG/TIFF files.
 * For directories, files listed in the optional manifest use its metadata
 * and everything else must match `pattern`.
 *
 * Odd levels and levels above the focal plane are dropped; slides left with
 * fewer than three levels are excluded with a warning.
 */
SlideIndex build_index(const std::filesystem::path& root_or_manifest,
                       const FilenamePattern& pattern = {},
                       const std::optional<std::filesystem::path>& manifest = std::nullopt);

/// Parses manifest rows without touching image files (dimensions unset).
std::vector<ImageRecord> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ImageRecord>& records);

/// Groups records into slides, applying the level filter and minimum-level rule.
SlideIndex group_records(std::vector<ImageRecord> records);

std::vector<ZStackSlide> filter_channel(const std::vector<ZStackSlide>& slides, Channel channel);

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  enum class Part { train, val, test };
  std::optional<Part> part_of(const std::string& slide_id) const;
};

using SplitRatios = std::array<int, 3>;

/// Largest-remainder split sizes for n slides; ties go to the earlier part.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Deterministic slide-level split (whole slides, never individual images).
SplitAssignment split_slides(const std::vector<ZStackSlide>& slides, const SplitRatios& ratios = {7, 1, 2},
                             std::uint64_t seed = 0);

std::vector<ZStackSlide> select_slides(const std::vector<ZStackSlide>& slides,
                                       const std::vector<std::string>& ids);

/// Three images of one slide with a > b > c and 2b = a + c; x_a is the sharpest.
struct Triplet {
  std::string slide_id;
  Channel channel = Channel::w1;
  std::array<int, 3> levels{};
  std::array<const ImageRecord*, 3> images{};
};

std::vector<Triplet> enumerate_triplets(const ZStackSlide& slide);

/// Procedural desk-scale stand-in for real z-stacks.
struct SyntheticStackConfig {
  int n_slides = 24;
  Index image_size = 40;
  int n_levels = 9;
  double sigma_step = 0.3;              // sigma(z) = sigma_step * (16 - z) / 2
  std::vector<double> sigma_schedule;   // optional explicit sigma per level, ascending z
  int blob_count_min = 4;
  int blob_count_max = 8;
  double radius_min = 2.0;
  double radius_max = 6.0;
  double intensity_min = 0.4;
  double intensity_max = 0.9;
  double background = 0.05;
  Channel channel = Channel::w1;
  std::uint64_t seed = 0;

  std::vector<int> levels() const;
  /// Gaussian sigma per level; throws std::invalid_argument if not strictly decreasing in z or sigma(16) != 0.
  std::map<int, double> sigmas() const;
  void validate() const;

  bool operator==(const SyntheticStackConfig&) const = default;
};

/// Sharp procedural scene of one synthetic slide (its level-16 image).
Image synthetic_scene(const SyntheticStackConfig& config, int slide_index);

std::vector<ZStackSlide> generate_synthetic_stack(const SyntheticStackConfig& config);

/**
 * Writes every image as 16-bit PNG under `dir` plus `dir/manifest.csv`.
 * Returns the manifest path.
 */
std::filesystem::path materialize_slides(const std::vector<ZStackSlide>& slides,
                                         const std::filesystem::path& dir);

/// Decoded images of a set of slides, loaded once; order matches the slides.
class ImageStore {
 public:
  ImageStore() = default;
  /// Decodes all images; `workers` > 1 loads in parallel without changing results.
  explicit ImageStore(const std::vector<ZStackSlide>& slides, unsigned workers = 1);

  const Image& get(const ImageRecord& record) const;

 private:
  std::map<std::pair<std::string, int>, Image> images_;
};

}  // namespace latentblur
