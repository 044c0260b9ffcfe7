#include "latentblur/checkpoint.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace latentblur {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'B', 'C', 'K', 'P', 'T', '\r', '\n'};

nlohmann::json to_json(const ModelConfig& m) {
  return {{"input_size", m.input_size},
          {"in_channels", m.in_channels},
          {"encoder_filters", m.encoder_filters},
          {"kernel_size", m.kernel_size},
          {"stride", m.stride},
          {"leaky_relu_slope", m.leaky_relu_slope},
          {"batchnorm_momentum", m.batchnorm_momentum},
          {"batchnorm_eps", m.batchnorm_eps}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.input_size = j.at("input_size").get<Index>();
  m.in_channels = j.at("in_channels").get<Index>();
  m.encoder_filters = j.at("encoder_filters").get<std::vector<Index>>();
  m.kernel_size = j.at("kernel_size").get<Index>();
  m.stride = j.at("stride").get<Index>();
  m.leaky_relu_slope = j.at("leaky_relu_slope").get<double>();
  m.batchnorm_momentum = j.value("batchnorm_momentum", 0.1);
  m.batchnorm_eps = j.value("batchnorm_eps", 1e-5);
  return m;
}

}  // namespace

std::string CheckpointMetadata::tag() const {
  return run_tag + "@e" + std::to_string(epoch) + "-" + parameter_digest.substr(0, 8);
}

std::string parameter_digest(Autoencoder<float>& model) {
  std::string bytes;
  model.visit([&](const std::string& name, Matrix<float>& value, Parameter<float>*) {
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(value.data()), static_cast<std::size_t>(value.size()) * sizeof(float));
  });
  return fnv1a_hex(bytes);
}

void save_checkpoint(const std::filesystem::path& path, Autoencoder<float>& model, CheckpointMetadata meta) {
  meta.model = model.config();
  meta.parameter_digest = parameter_digest(model);

  nlohmann::json tensors = nlohmann::json::array();
  std::string blob;
  model.visit([&](const std::string& name, Matrix<float>& value, Parameter<float>* p) {
    tensors.push_back({{"name", name},
                       {"rows", value.rows()},
                       {"cols", value.cols()},
                       {"trainable", p != nullptr},
                       {"offset", blob.size()}});
    blob.append(reinterpret_cast<const char*>(value.data()), static_cast<std::size_t>(value.size()) * sizeof(float));
  });

  const nlohmann::json header = {{"schema_version", meta.schema_version},
                                 {"format", "latentblur-checkpoint"},
                                 {"model_config", to_json(meta.model)},
                                 {"train_config", meta.train_config},
                                 {"train_config_hash", meta.train_config_hash},
                                 {"epoch", meta.epoch},
                                 {"channel", to_string(meta.channel)},
                                 {"mode", to_string(meta.mode)},
                                 {"run_tag", meta.run_tag},
                                 {"parameter_digest", meta.parameter_digest},
                                 {"tag", meta.tag()},
                                 {"tensors", tensors}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t n = text.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError("short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint file");
  }
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n > (1ull << 30)) throw CheckpointError(path.string() + ": corrupt header length");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  const std::string blob{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": header is not valid JSON: " + e.what());
  }

  LoadedModel out;
  try {
    CheckpointMetadata& meta = out.meta;
    meta.schema_version = header.at("schema_version").get<int>();
    if (meta.schema_version > CheckpointMetadata::kSchemaVersion) {
      throw CheckpointError(path.string() + ": checkpoint schema " + std::to_string(meta.schema_version) +
                            " is newer than supported (" + std::to_string(CheckpointMetadata::kSchemaVersion) + ")");
    }
    meta.model = model_from_json(header.at("model_config"));
    meta.train_config = header.value("train_config", "");
    meta.train_config_hash = header.value("train_config_hash", "");
    meta.epoch = header.value("epoch", 0);
    meta.channel = parse_channel(header.value("channel", "w1"));
    meta.mode = parse_regularization(header.value("mode", "baseline"));
    meta.run_tag = header.value("run_tag", "");
    meta.parameter_digest = header.value("parameter_digest", "");

    std::map<std::string, nlohmann::json> by_name;
    for (const auto& t : header.at("tensors")) by_name[t.at("name").get<std::string>()] = t;

    auto model = std::make_shared<Autoencoder<float>>(meta.model);
    model->visit([&](const std::string& name, Matrix<float>& value, Parameter<float>*) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
      const auto rows = it->second.at("rows").get<Index>();
      const auto cols = it->second.at("cols").get<Index>();
      const auto offset = it->second.at("offset").get<std::size_t>();
      if (rows != value.rows() || cols != value.cols()) {
        throw CheckpointError(path.string() + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", model expects " + std::to_string(value.rows()) + "x" +
                              std::to_string(value.cols()));
      }
      const std::size_t bytes = static_cast<std::size_t>(value.size()) * sizeof(float);
      if (offset + bytes > blob.size()) throw CheckpointError(path.string() + ": truncated tensor data");
      std::memcpy(value.data(), blob.data() + offset, bytes);
    });
    if (!meta.parameter_digest.empty() && parameter_digest(*model) != meta.parameter_digest) {
      throw CheckpointError(path.string() + ": parameter digest mismatch (file corrupted)");
    }
    out.model = std::move(model);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace latentblur
