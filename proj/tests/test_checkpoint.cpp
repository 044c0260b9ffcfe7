#include "doctest.h"
#include "test_support.hpp"

#include "latentblur/checkpoint.hpp"
#include "latentblur/config.hpp"

#include <fstream>
#include <sstream>

using namespace latentblur;
namespace fs = std::filesystem;

namespace {

CheckpointMetadata sample_meta(const ModelConfig& model) {
  CheckpointMetadata meta;
  meta.model = model;
  TrainConfig cfg = TrainConfig::desk_scale();
  meta.train_config = serialize(cfg);
  meta.train_config_hash = config_hash(cfg);
  meta.epoch = 7;
  meta.channel = Channel::w2;
  meta.mode = Regularization::direct;
  meta.run_tag = "unit";
  return meta;
}

/// Trains batch-norm running statistics away from their initial values.
void touch_running_stats(Autoencoder<float>& model, Rng& rng) {
  Tensor<float> x(4, 1, model.config().input_size, model.config().input_size);
  for (Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = static_cast<float>(rng.uniform());
  Autoencoder<float>::EncoderCache cache;
  model.encode_train(x, cache);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("save and load reproduce outputs bit for bit") {
  const fs::path dir = testing::scratch_dir("checkpoint");
  Autoencoder<float> model(ModelConfig::tiny());
  model.reset_parameters(71);
  Rng rng(72);
  touch_running_stats(model, rng);
  save_checkpoint(dir / "m.ckpt", model, sample_meta(model.config()));
  CHECK_FALSE(fs::exists(dir / "m.ckpt.tmp"));

  const LoadedModel loaded = load_checkpoint(dir / "m.ckpt");
  CHECK(loaded.meta.epoch == 7);
  CHECK(loaded.meta.channel == Channel::w2);
  CHECK(loaded.meta.mode == Regularization::direct);
  CHECK(loaded.meta.model == model.config());
  CHECK(loaded.meta.parameter_digest == parameter_digest(model));
  CHECK(loaded.meta.tag() == "unit@e7-" + loaded.meta.parameter_digest.substr(0, 8));

  const Image img = testing::random_image(rng, 32, 32);
  const Tensor<float> x = stack_images(std::span<const Image>(&img, 1));
  CHECK(loaded.model->encode(x) == model.encode(x));
  CHECK(loaded.model->decode(model.encode(x)).data == model.decode(model.encode(x)).data);
}

TEST_CASE("corrupted and truncated checkpoints are rejected") {
  const fs::path dir = testing::scratch_dir("checkpoint_bad");
  Autoencoder<float> model(ModelConfig::tiny());
  model.reset_parameters(73);
  save_checkpoint(dir / "m.ckpt", model, sample_meta(model.config()));
  const std::string bytes = read_bytes(dir / "m.ckpt");

  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x40;
  write_bytes(dir / "flipped.ckpt", flipped);
  CHECK_THROWS_AS(load_checkpoint(dir / "flipped.ckpt"), CheckpointError);

  write_bytes(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CheckpointError);

  write_bytes(dir / "magic.ckpt", "NOTACKPT" + bytes.substr(8));
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST_CASE("newer schema versions are refused") {
  const fs::path dir = testing::scratch_dir("checkpoint_schema");
  Autoencoder<float> model(ModelConfig::tiny());
  CheckpointMetadata meta = sample_meta(model.config());
  meta.schema_version = CheckpointMetadata::kSchemaVersion + 1;
  save_checkpoint(dir / "future.ckpt", model, meta);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "future.ckpt"), doctest::Contains("schema"), CheckpointError);
}
