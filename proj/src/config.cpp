#include "latentblur/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace latentblur {

const char* to_string(Regularization r) {
  switch (r) {
    case Regularization::baseline: return "baseline";
    case Regularization::indirect: return "indirect";
    case Regularization::direct: return "direct";
  }
  return "unknown";
}

Regularization parse_regularization(const std::string& text) {
  if (text == "baseline") return Regularization::baseline;
  if (text == "indirect") return Regularization::indirect;
  if (text == "direct") return Regularization::direct;
  throw ConfigError("mode", "unknown mode '" + text + "' (valid: baseline, indirect, direct)");
}

const char* to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

Reduction parse_reduction(const std::string& text) {
  if (text == "mean") return Reduction::mean;
  if (text == "sum") return Reduction::sum;
  throw ConfigError("l1_reduction", "unknown reduction '" + text + "' (valid: mean, sum)");
}

const char* to_string(DatasetSource s) {
  switch (s) {
    case DatasetSource::synthetic: return "synthetic";
    case DatasetSource::manifest: return "manifest";
    case DatasetSource::directory: return "directory";
  }
  return "unknown";
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt(values[i]);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw ConfigError(key, "cannot parse '" + text + "' as a number");
  }
  return v;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

/// Ordered key table: each entry knows how to write and read one field.
struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto add = [&](std::string key, std::function<std::string(const TrainConfig&)> get,
                   std::function<void(TrainConfig&, const std::string&)> set) {
      f.push_back({std::move(key), std::move(get), std::move(set)});
    };
    auto int_field = [&](std::string key, auto member) {
      add(key, [member](const TrainConfig& c) { return std::to_string(member(const_cast<TrainConfig&>(c))); },
          [member, key](TrainConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(member(c))>;
            member(c) = parse_number<T>(key, v);
          });
    };
    auto double_field = [&](std::string key, auto member) {
      add(key, [member](const TrainConfig& c) { return format_double(member(const_cast<TrainConfig&>(c))); },
          [member, key](TrainConfig& c, const std::string& v) { member(c) = parse_number<double>(key, v); });
    };
    auto path_field = [&](std::string key, auto member) {
      add(key, [member](const TrainConfig& c) { return member(const_cast<TrainConfig&>(c)).generic_string(); },
          [member](TrainConfig& c, const std::string& v) { member(c) = std::filesystem::path(v); });
    };

    add("mode", [](const TrainConfig& c) { return std::string(to_string(c.mode)); },
        [](TrainConfig& c, const std::string& v) { c.mode = parse_regularization(v); });
    add("channel", [](const TrainConfig& c) { return std::string(to_string(c.channel)); },
        [](TrainConfig& c, const std::string& v) {
          try {
            c.channel = parse_channel(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError("channel", e.what());
          }
        });
    int_field("epochs", [](TrainConfig& c) -> int& { return c.epochs; });
    int_field("batch_size", [](TrainConfig& c) -> int& { return c.batch_size; });
    double_field("learning_rate", [](TrainConfig& c) -> double& { return c.learning_rate; });
    double_field("adam.beta1", [](TrainConfig& c) -> double& { return c.adam_beta1; });
    double_field("adam.beta2", [](TrainConfig& c) -> double& { return c.adam_beta2; });
    double_field("adam.eps", [](TrainConfig& c) -> double& { return c.adam_eps; });
    add("l1_reduction", [](const TrainConfig& c) { return std::string(to_string(c.reduction)); },
        [](TrainConfig& c, const std::string& v) { c.reduction = parse_reduction(v); });
    int_field("seed", [](TrainConfig& c) -> std::uint64_t& { return c.seed; });
    add("split.ratios",
        [](const TrainConfig& c) {
          return std::to_string(c.split_ratios[0]) + "," + std::to_string(c.split_ratios[1]) + "," +
                 std::to_string(c.split_ratios[2]);
        },
        [](TrainConfig& c, const std::string& v) {
          const auto r = parse_number_list<int>("split.ratios", v);
          if (r.size() != 3) throw ConfigError("split.ratios", "expected three comma-separated integers");
          c.split_ratios = {r[0], r[1], r[2]};
        });

    add("dataset.source", [](const TrainConfig& c) { return std::string(to_string(c.source)); },
        [](TrainConfig& c, const std::string& v) {
          if (v == "synthetic") c.source = DatasetSource::synthetic;
          else if (v == "manifest") c.source = DatasetSource::manifest;
          else if (v == "directory") c.source = DatasetSource::directory;
          else throw ConfigError("dataset.source", "unknown source '" + v + "' (valid: synthetic, manifest, directory)");
        });
    path_field("dataset.manifest", [](TrainConfig& c) -> std::filesystem::path& { return c.manifest; });
    path_field("dataset.root", [](TrainConfig& c) -> std::filesystem::path& { return c.root; });
    add("dataset.pattern", [](const TrainConfig& c) { return c.pattern.regex; },
        [](TrainConfig& c, const std::string& v) { c.pattern.regex = v; });
    add("dataset.pattern_groups",
        [](const TrainConfig& c) {
          return std::to_string(c.pattern.slide_group) + "," + std::to_string(c.pattern.channel_group) + "," +
                 std::to_string(c.pattern.z_group);
        },
        [](TrainConfig& c, const std::string& v) {
          const auto g = parse_number_list<int>("dataset.pattern_groups", v);
          if (g.size() != 3) throw ConfigError("dataset.pattern_groups", "expected slide,channel,z group indices");
          c.pattern.slide_group = g[0];
          c.pattern.channel_group = g[1];
          c.pattern.z_group = g[2];
        });
    int_field("dataset.workers", [](TrainConfig& c) -> unsigned& { return c.loader_workers; });

    int_field("synthetic.n_slides", [](TrainConfig& c) -> int& { return c.synthetic.n_slides; });
    int_field("synthetic.image_size", [](TrainConfig& c) -> Index& { return c.synthetic.image_size; });
    int_field("synthetic.n_levels", [](TrainConfig& c) -> int& { return c.synthetic.n_levels; });
    double_field("synthetic.sigma_step", [](TrainConfig& c) -> double& { return c.synthetic.sigma_step; });
    add("synthetic.sigma_schedule",
        [](const TrainConfig& c) { return join<double>(c.synthetic.sigma_schedule, format_double); },
        [](TrainConfig& c, const std::string& v) {
          c.synthetic.sigma_schedule = parse_number_list<double>("synthetic.sigma_schedule", v);
        });
    int_field("synthetic.blob_count_min", [](TrainConfig& c) -> int& { return c.synthetic.blob_count_min; });
    int_field("synthetic.blob_count_max", [](TrainConfig& c) -> int& { return c.synthetic.blob_count_max; });
    double_field("synthetic.radius_min", [](TrainConfig& c) -> double& { return c.synthetic.radius_min; });
    double_field("synthetic.radius_max", [](TrainConfig& c) -> double& { return c.synthetic.radius_max; });
    double_field("synthetic.intensity_min", [](TrainConfig& c) -> double& { return c.synthetic.intensity_min; });
    double_field("synthetic.intensity_max", [](TrainConfig& c) -> double& { return c.synthetic.intensity_max; });
    double_field("synthetic.background", [](TrainConfig& c) -> double& { return c.synthetic.background; });
    int_field("synthetic.seed", [](TrainConfig& c) -> std::uint64_t& { return c.synthetic.seed; });

    int_field("model.input_size", [](TrainConfig& c) -> Index& { return c.model.input_size; });
    int_field("model.in_channels", [](TrainConfig& c) -> Index& { return c.model.in_channels; });
    add("model.encoder_filters",
        [](const TrainConfig& c) {
          return join<Index>(c.model.encoder_filters, [](const Index& v) { return std::to_string(v); });
        },
        [](TrainConfig& c, const std::string& v) {
          c.model.encoder_filters = parse_number_list<Index>("model.encoder_filters", v);
        });
    int_field("model.kernel_size", [](TrainConfig& c) -> Index& { return c.model.kernel_size; });
    int_field("model.stride", [](TrainConfig& c) -> Index& { return c.model.stride; });
    double_field("model.leaky_relu_slope", [](TrainConfig& c) -> double& { return c.model.leaky_relu_slope; });
    double_field("model.batchnorm_momentum", [](TrainConfig& c) -> double& { return c.model.batchnorm_momentum; });
    double_field("model.batchnorm_eps", [](TrainConfig& c) -> double& { return c.model.batchnorm_eps; });

    path_field("output.runs_dir", [](TrainConfig& c) -> std::filesystem::path& { return c.runs_dir; });
    add("output.tag", [](const TrainConfig& c) { return c.tag; },
        [](TrainConfig& c, const std::string& v) { c.tag = v; });
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate", "must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw ConfigError("adam.beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("adam.beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("adam.eps", "must be > 0");
  for (int r : split_ratios)
    if (r < 0) throw ConfigError("split.ratios", "must be non-negative");
  if (split_ratios[0] + split_ratios[1] + split_ratios[2] == 0) throw ConfigError("split.ratios", "must not all be zero");
  if (source == DatasetSource::manifest && manifest.empty()) throw ConfigError("dataset.manifest", "required for manifest source");
  if (source == DatasetSource::directory && root.empty()) throw ConfigError("dataset.root", "required for directory source");
  if (source == DatasetSource::synthetic) {
    try {
      synthetic.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("synthetic", e.what());
    }
    if (synthetic.image_size < model.input_size) {
      throw ConfigError("synthetic.image_size", "must be at least model.input_size");
    }
  }
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

std::string TrainConfig::run_tag() const {
  if (!tag.empty()) return tag;
  return std::string(to_string(mode)) + "_" + to_string(channel) + "_seed" + std::to_string(seed);
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.model = ModelConfig::tiny();
  // Ten distinct 32-pixel crops per scene; strong enough defocus that the
  // blurry source is clearly worse than a reconstruction of the sharp plane.
  c.synthetic.image_size = 64;
  c.synthetic.sigma_step = 0.5;
  // The tiny model converges too slowly at 1e-4 to finish within 40 epochs.
  c.learning_rate = 1e-3;
  return c;
}

std::string serialize(const TrainConfig& config) {
  std::string out = "schema_version = " + std::to_string(TrainConfig::kSchemaVersion) + "\n";
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError(key, "unknown key");
  f->set(config, trim(value));
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  bool saw_version = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "schema_version") {
      const int v = parse_number<int>(key, value);
      if (v < 1 || v > TrainConfig::kSchemaVersion) {
        throw ConfigError(key, "unsupported schema version " + value);
      }
      saw_version = true;
      continue;
    }
    apply_override(config, key, value);
  }
  if (!saw_version) throw ConfigError("schema_version", "missing");
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig config = parse_train_config(ss.str());
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  if (!config.manifest.empty() && config.manifest.is_relative()) config.manifest = base / config.manifest;
  if (!config.root.empty() && config.root.is_relative()) config.root = base / config.root;
  return config;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const TrainConfig& config) {
  std::string canonical = "schema_version = " + std::to_string(TrainConfig::kSchemaVersion) + "\n";
  for (const Field& f : fields()) {
    if (f.key.rfind("output.", 0) == 0 || f.key == "dataset.workers") continue;
    canonical += f.key + " = " + f.get(config) + "\n";
  }
  return fnv1a_hex(canonical);
}

}  // namespace latentblur
