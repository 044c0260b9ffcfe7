#pragma once

#include "latentblur/dataset.hpp"
#include "latentblur/model_config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace latentblur {

/// Training objective.
enum class Regularization { baseline, indirect, direct };

const char* to_string(Regularization r);
Regularization parse_regularization(const std::string& text);

/// Whether the objective encodes the middle image of a triplet.
constexpr bool encodes_middle(Regularization r) { return r == Regularization::direct; }

enum class Reduction { mean, sum };

const char* to_string(Reduction r);
Reduction parse_reduction(const std::string& text);

enum class DatasetSource { synthetic, manifest, directory };

const char* to_string(DatasetSource s);

/// Schema violation in a config document; `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct TrainConfig {
  static constexpr int kSchemaVersion = 1;

  Regularization mode = Regularization::direct;
  Channel channel = Channel::w1;
  int epochs = 40;
  int batch_size = 40;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  Reduction reduction = Reduction::mean;
  std::uint64_t seed = 0;
  SplitRatios split_ratios{7, 1, 2};

  DatasetSource source = DatasetSource::synthetic;
  std::filesystem::path manifest;
  std::filesystem::path root;
  FilenamePattern pattern;
  SyntheticStackConfig synthetic;
  unsigned loader_workers = 1;

  ModelConfig model;

  std::filesystem::path runs_dir = "runs";
  std::string tag;  // empty: derived from mode and channel

  void validate() const;

  /// Effective run tag.
  std::string run_tag() const;
  std::filesystem::path run_dir() const { return runs_dir / run_tag(); }

  /// Desk-scale variant: tiny model on 64-pixel synthetic stacks, learning rate 1e-3.
  static TrainConfig desk_scale();
};

/**
 * Canonical `key = value` document, one key per line in a fixed order,
 * starting with schema_version. Lines starting with '#' are comments.
 */
std::string serialize(const TrainConfig& config);

/// Parses a document; unknown keys and malformed values throw ConfigError naming the key.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Applies one `key=value` override on top of an existing config.
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);

/// FNV-1a 64-bit hash (hex) of the canonical document excluding output.* keys and dataset.workers.
std::string config_hash(const TrainConfig& config);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace latentblur
