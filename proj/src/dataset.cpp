#include "latentblur/dataset.hpp"

#include "latentblur/image_io.hpp"
#include "latentblur/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace latentblur {

const char* to_string(Channel c) { return c == Channel::w1 ? "w1" : "w2"; }

Channel parse_channel(const std::string& text) {
  if (text == "w1") return Channel::w1;
  if (text == "w2") return Channel::w2;
  throw std::invalid_argument("unknown channel '" + text + "' (expected w1 or w2)");
}

Image ImageRecord::load() const {
  if (buffer) return *buffer;
  return load_image(path);
}

std::vector<int> ZStackSlide::levels() const {
  std::vector<int> out;
  for (const auto& [z, _] : images) out.push_back(z);
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

/// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

int parse_level(const std::string& text, const std::string& where) {
  int z = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, z);
  if (ec != std::errc() || ptr != end) throw IngestionError(where + ": z_level '" + text + "' is not an integer");
  return z;
}

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::vector<ImageRecord> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IngestionError("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("manifest " + manifest.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_csv_line(line);
  const std::vector<std::string> expected{"path", "slide_id", "channel", "z_level"};
  if (header != expected) {
    throw IngestionError("manifest " + manifest.string() + ": header must be path,slide_id,channel,z_level");
  }
  const std::filesystem::path base = manifest.parent_path();
  std::vector<ImageRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    const std::string where = manifest.string() + ":" + std::to_string(row);
    if (f.size() != 4) throw IngestionError(where + ": expected 4 fields, got " + std::to_string(f.size()));
    ImageRecord r;
    r.path = std::filesystem::path(f[0]).is_absolute() ? std::filesystem::path(f[0]) : base / f[0];
    r.slide_id = f[1];
    try {
      r.channel = parse_channel(f[2]);
    } catch (const std::invalid_argument& e) {
      throw IngestionError(where + ": " + e.what());
    }
    r.z_level = parse_level(f[3], where);
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ImageRecord>& records) {
  if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
  std::ofstream out(manifest);
  if (!out) throw IngestionError("cannot write manifest " + manifest.string());
  out << "path,slide_id,channel,z_level\n";
  const std::filesystem::path base = manifest.parent_path();
  for (const ImageRecord& r : records) {
    const std::filesystem::path rel =
        base.empty() || r.path.is_relative() ? r.path : std::filesystem::relative(r.path, base);
    out << csv_field(rel.generic_string()) << ',' << csv_field(r.slide_id) << ',' << to_string(r.channel)
        << ',' << r.z_level << '\n';
  }
}

SlideIndex group_records(std::vector<ImageRecord> records) {
  SlideIndex index;
  std::map<std::pair<Channel, std::string>, ZStackSlide> grouped;
  for (ImageRecord& r : records) {
    if (!is_usable_level(r.z_level)) continue;
    ZStackSlide& slide = grouped[{r.channel, r.slide_id}];
    slide.slide_id = r.slide_id;
    slide.channel = r.channel;
    if (slide.images.count(r.z_level)) {
      throw IngestionError("duplicate image for slide " + r.slide_id + " channel " + to_string(r.channel) +
                           " z_level " + std::to_string(r.z_level));
    }
    slide.images.emplace(r.z_level, std::move(r));
  }
  for (auto& [key, slide] : grouped) {
    if (slide.images.size() < 3) {
      index.warnings.push_back("slide " + slide.slide_id + " (" + to_string(slide.channel) + ") has only " +
                               std::to_string(slide.images.size()) + " usable levels; excluded");
      continue;
    }
    const ImageRecord& first = slide.images.begin()->second;
    for (const auto& [z, rec] : slide.images) {
      if (rec.height != first.height || rec.width != first.width) {
        throw IngestionError("slide " + slide.slide_id + ": image at z_level " + std::to_string(z) + " is " +
                             std::to_string(rec.height) + "x" + std::to_string(rec.width) + ", expected " +
                             std::to_string(first.height) + "x" + std::to_string(first.width));
      }
    }
    index.slides.push_back(std::move(slide));
  }
  return index;
}

SlideIndex build_index(const std::filesystem::path& root_or_manifest, const FilenamePattern& pattern,
                       const std::optional<std::filesystem::path>& manifest) {
  if (!std::filesystem::exists(root_or_manifest)) {
    throw IngestionError("dataset source does not exist: " + root_or_manifest.string());
  }
  std::vector<ImageRecord> records;
  if (std::filesystem::is_regular_file(root_or_manifest)) {
    records = read_manifest(root_or_manifest);
  } else {
    std::map<std::filesystem::path, ImageRecord> listed;
    if (manifest) {
      for (ImageRecord& r : read_manifest(*manifest)) {
        listed.emplace(std::filesystem::weakly_canonical(r.path), std::move(r));
      }
    }
    const std::regex re(pattern.regex, std::regex::ECMAScript | std::regex::icase);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root_or_manifest)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      if (auto it = listed.find(std::filesystem::weakly_canonical(file)); it != listed.end()) {
        records.push_back(it->second);
        continue;
      }
      const std::string rel = std::filesystem::relative(file, root_or_manifest).generic_string();
      std::smatch m;
      if (!std::regex_match(rel, m, re)) {
        throw IngestionError("cannot parse slide/channel/z_level from file name: " + file.string());
      }
      ImageRecord r;
      r.path = file;
      r.slide_id = m[pattern.slide_group].str();
      try {
        r.channel = parse_channel(m[pattern.channel_group].str());
      } catch (const std::invalid_argument& e) {
        throw IngestionError(file.string() + ": " + e.what());
      }
      r.z_level = parse_level(m[pattern.z_group].str(), file.string());
      records.push_back(std::move(r));
    }
  }
  for (ImageRecord& r : records) {
    if (!is_usable_level(r.z_level)) continue;
    const ImageSize size = probe_image_size(r.path);
    r.height = size.height;
    r.width = size.width;
  }
  return group_records(std::move(records));
}

std::vector<ZStackSlide> filter_channel(const std::vector<ZStackSlide>& slides, Channel channel) {
  std::vector<ZStackSlide> out;
  std::copy_if(slides.begin(), slides.end(), std::back_inserter(out),
               [&](const ZStackSlide& s) { return s.channel == channel; });
  return out;
}

std::optional<SplitAssignment::Part> SplitAssignment::part_of(const std::string& slide_id) const {
  const auto contains = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), slide_id) != v.end();
  };
  if (contains(train)) return Part::train;
  if (contains(val)) return Part::val;
  if (contains(test)) return Part::test;
  return std::nullopt;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  long total = 0;
  for (int r : ratios) {
    if (r < 0) throw std::invalid_argument("split ratios must be non-negative");
    total += r;
  }
  if (total == 0) throw std::invalid_argument("split ratios must not all be zero");
  std::array<std::size_t, 3> sizes{};
  std::array<long, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const long scaled = static_cast<long>(n) * ratios[i];
    sizes[i] = static_cast<std::size_t>(scaled / total);
    remainder[i] = scaled % total;
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

SplitAssignment split_slides(const std::vector<ZStackSlide>& slides, const SplitRatios& ratios, std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& s : slides) unique.insert(s.slide_id);
  if (unique.size() < 10) {
    throw std::invalid_argument("split_slides: need at least 10 slides, got " + std::to_string(unique.size()));
  }
  std::vector<std::string> ids(unique.begin(), unique.end());
  Rng rng(derive_seed(seed, 0x5117));
  rng.shuffle(ids);
  const auto sizes = split_sizes(ids.size(), ratios);
  SplitAssignment split;
  split.seed = seed;
  auto it = ids.begin();
  split.train.assign(it, it + static_cast<long>(sizes[0]));
  it += static_cast<long>(sizes[0]);
  split.val.assign(it, it + static_cast<long>(sizes[1]));
  it += static_cast<long>(sizes[1]);
  split.test.assign(it, ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<ZStackSlide> select_slides(const std::vector<ZStackSlide>& slides, const std::vector<std::string>& ids) {
  std::vector<ZStackSlide> out;
  for (const auto& s : slides) {
    if (std::find(ids.begin(), ids.end(), s.slide_id) != ids.end()) out.push_back(s);
  }
  return out;
}

std::vector<Triplet> enumerate_triplets(const ZStackSlide& slide) {
  std::vector<Triplet> out;
  const std::vector<int> levels = slide.levels();
  for (auto a = levels.rbegin(); a != levels.rend(); ++a) {
    for (auto c = std::next(a); c != levels.rend(); ++c) {
      if ((*a + *c) % 2 != 0) continue;
      const int b = (*a + *c) / 2;
      if (b == *a || b == *c || b % 2 != 0) continue;
      const auto mid = slide.images.find(b);
      if (mid == slide.images.end()) continue;
      Triplet t;
      t.slide_id = slide.slide_id;
      t.channel = slide.channel;
      t.levels = {*a, b, *c};
      t.images = {&slide.images.at(*a), &mid->second, &slide.images.at(*c)};
      out.push_back(t);
    }
  }
  return out;
}

std::vector<int> SyntheticStackConfig::levels() const {
  std::vector<int> out;
  for (int i = n_levels - 1; i >= 0; --i) out.push_back(kFocusLevel - 2 * i);
  return out;
}

std::map<int, double> SyntheticStackConfig::sigmas() const {
  const std::vector<int> lv = levels();
  std::map<int, double> out;
  if (!sigma_schedule.empty()) {
    if (sigma_schedule.size() != lv.size()) {
      throw std::invalid_argument("synthetic.sigma_schedule needs one sigma per level (" +
                                  std::to_string(lv.size()) + ")");
    }
    for (std::size_t i = 0; i < lv.size(); ++i) out[lv[i]] = sigma_schedule[i];
  } else {
    for (int z : lv) out[z] = sigma_step * (kFocusLevel - z) / 2.0;
  }
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [z, s] : out) {
    if (!(s < prev)) throw std::invalid_argument("synthetic blur schedule must be strictly decreasing in z_level");
    if (s < 0) throw std::invalid_argument("synthetic blur sigma must be non-negative");
    prev = s;
  }
  if (out.at(kFocusLevel) != 0.0) throw std::invalid_argument("synthetic blur sigma at the focal level must be 0");
  return out;
}

void SyntheticStackConfig::validate() const {
  if (n_slides < 1) throw std::invalid_argument("synthetic.n_slides must be positive");
  if (image_size < 3) throw std::invalid_argument("synthetic.image_size must be at least 3");
  if (n_levels < 3 || n_levels > kFocusLevel / 2 + 1) {
    throw std::invalid_argument("synthetic.n_levels must lie in [3, 9]");
  }
  if (blob_count_min < 1 || blob_count_max < blob_count_min) {
    throw std::invalid_argument("synthetic blob count range is invalid");
  }
  if (!(radius_min > 0 && radius_max >= radius_min)) throw std::invalid_argument("synthetic radius range is invalid");
  if (!(intensity_min >= 0 && intensity_max >= intensity_min && intensity_max <= 1)) {
    throw std::invalid_argument("synthetic intensity range must lie in [0, 1]");
  }
  if (!(background >= 0 && background <= 1)) throw std::invalid_argument("synthetic.background must lie in [0, 1]");
  sigmas();
}

Image synthetic_scene(const SyntheticStackConfig& config, int slide_index) {
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(slide_index)));
  const Index n = config.image_size;
  Image img(1, n, n);
  img.data.setConstant(static_cast<float>(config.background));

  struct Disc {
    double cy, cx, r, v;
  };
  std::vector<Disc> discs;
  const int count = config.blob_count_min +
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(config.blob_count_max - config.blob_count_min + 1)));
  for (int i = 0; i < count; ++i) {
    Disc d;
    d.cy = rng.uniform(0.0, static_cast<double>(n));
    d.cx = rng.uniform(0.0, static_cast<double>(n));
    d.r = rng.uniform(config.radius_min, config.radius_max);
    d.v = rng.uniform(config.intensity_min, config.intensity_max);
    discs.push_back(d);
    // Small bright spots inside each blob give the scene fine detail.
    const int spots = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < spots; ++s) {
      const double ang = rng.uniform(0.0, 6.283185307179586);
      const double rad = rng.uniform(0.0, 0.6 * d.r);
      discs.push_back({d.cy + rad * std::sin(ang), d.cx + rad * std::cos(ang),
                       rng.uniform(0.6, std::max(0.8, 0.35 * d.r)), rng.uniform(0.1, 0.3)});
    }
  }

  constexpr int kSuper = 4;
  for (Index y = 0; y < n; ++y) {
    for (Index x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double py = y + (sy + 0.5) / kSuper;
          const double px = x + (sx + 0.5) / kSuper;
          double v = config.background;
          for (const Disc& d : discs) {
            const double dy = py - d.cy, dx = px - d.cx;
            if (dy * dy + dx * dx <= d.r * d.r) v += d.v;
          }
          acc += std::min(v, 1.0);
        }
      }
      img.at(y, x) = static_cast<float>(acc / (kSuper * kSuper));
    }
  }
  return img;
}

std::vector<ZStackSlide> generate_synthetic_stack(const SyntheticStackConfig& config) {
  config.validate();
  const std::map<int, double> sigmas = config.sigmas();
  std::vector<ZStackSlide> slides;
  for (int i = 0; i < config.n_slides; ++i) {
    ZStackSlide slide;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03d", i);
    slide.slide_id = id;
    slide.channel = config.channel;
    const Image sharp = synthetic_scene(config, i);
    for (const auto& [z, sigma] : sigmas) {
      ImageRecord r;
      r.slide_id = slide.slide_id;
      r.channel = config.channel;
      r.z_level = z;
      r.height = sharp.height;
      r.width = sharp.width;
      r.buffer = std::make_shared<const Image>(gaussian_blur(sharp, sigma));
      slide.images.emplace(z, std::move(r));
    }
    slides.push_back(std::move(slide));
  }
  return slides;
}

std::filesystem::path materialize_slides(const std::vector<ZStackSlide>& slides, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ImageRecord> records;
  for (const auto& slide : slides) {
    for (const auto& [z, rec] : slide.images) {
      char name[256];
      std::snprintf(name, sizeof name, "%s_%s_z%02d.png", slide.slide_id.c_str(), to_string(slide.channel), z);
      ImageRecord out = rec;
      out.path = dir / name;
      save_png(out.path, rec.load(), 16);
      out.buffer.reset();
      records.push_back(std::move(out));
    }
  }
  const std::filesystem::path manifest = dir / "manifest.csv";
  write_manifest(manifest, records);
  return manifest;
}

ImageStore::ImageStore(const std::vector<ZStackSlide>& slides, unsigned workers) {
  std::vector<const ImageRecord*> records;
  for (const auto& s : slides)
    for (const auto& [z, r] : s.images) records.push_back(&r);
  std::vector<Image> decoded(records.size());
  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(records.size())));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) decoded[i] = records[i]->load();
  } else {
    // Each worker fills a fixed stride of slots, so the result is independent of scheduling.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < records.size(); i += n_workers) decoded[i] = records[i]->load();
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ImageRecord& r = *records[i];
    images_.emplace(std::make_pair(std::string(to_string(r.channel)) + "/" + r.slide_id, r.z_level),
                    std::move(decoded[i]));
  }
}

const Image& ImageStore::get(const ImageRecord& record) const {
  const auto it = images_.find({std::string(to_string(record.channel)) + "/" + record.slide_id, record.z_level});
  if (it == images_.end()) {
    throw std::out_of_range("ImageStore: slide " + record.slide_id + " z_level " + std::to_string(record.z_level) +
                            " was not loaded");
  }
  return it->second;
}

}  // namespace latentblur
