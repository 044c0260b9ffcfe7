#pragma once

#include "latentblur/autoencoder.hpp"
#include "latentblur/config.hpp"

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

namespace latentblur {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMetadata {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  ModelConfig model;
  std::string train_config;       // canonical TrainConfig document
  std::string train_config_hash;  // config_hash() of that document
  int epoch = 0;
  Channel channel = Channel::w1;
  Regularization mode = Regularization::baseline;
  std::string run_tag;
  std::string parameter_digest;  // filled on save

  /// "<run_tag>@e<epoch>-<first 8 hex of parameter digest>"
  std::string tag() const;
};

/**
 * Single-file archive:
 *   8-byte magic "LBCKPT\r\n", uint64 LE header length, UTF-8 JSON header,
 *   then float32 LE tensors in the order listed by the header.
 * Unknown header keys are ignored; newer schema versions are rejected.
 */
void save_checkpoint(const std::filesystem::path& path, Autoencoder<float>& model, CheckpointMetadata meta);

struct LoadedModel {
  CheckpointMetadata meta;
  std::shared_ptr<const Autoencoder<float>> model;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

/// Digest over all parameter and buffer bytes in visit order.
std::string parameter_digest(Autoencoder<float>& model);

}  // namespace latentblur
