#include "doctest.h"

#include "latentblur/config.hpp"

using namespace latentblur;

TEST_CASE("config documents round-trip exactly") {
  TrainConfig c = TrainConfig::desk_scale();
  c.mode = Regularization::indirect;
  c.channel = Channel::w2;
  c.learning_rate = 3.5e-4;
  c.synthetic.sigma_schedule = {2.4, 2.1, 1.8, 1.5, 1.2, 0.9, 0.6, 0.3, 0.0};
  c.model.encoder_filters = {4, 8, 8, 16, 16};
  c.tag = "exp one";
  const std::string text = serialize(c);
  CHECK(text.rfind("schema_version = 1\n", 0) == 0);
  const TrainConfig back = parse_train_config(text);
  CHECK(serialize(back) == text);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.model == c.model);
  CHECK(back.synthetic == c.synthetic);
  CHECK(back.mode == Regularization::indirect);
  CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config errors name the offending field") {
  CHECK_THROWS_WITH_AS(parse_train_config("schema_version = 1\nbogus.key = 3\n"), doctest::Contains("bogus.key"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_train_config("mode = direct\n"), doctest::Contains("schema_version"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("schema_version = 99\n"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_train_config("schema_version = 1\nepochs = many\n"), doctest::Contains("epochs"),
                       ConfigError);
  try {
    parse_train_config("schema_version = 1\nmode = bogus\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "mode");
    const std::string msg = e.what();
    CHECK(msg.find("baseline") != std::string::npos);
    CHECK(msg.find("indirect") != std::string::npos);
    CHECK(msg.find("direct") != std::string::npos);
  }
  // Comments and blank lines are ignored.
  CHECK(parse_train_config("# note\n\nschema_version = 1\n").epochs == 40);
}

TEST_CASE("validation enforces the training invariants") {
  TrainConfig c = TrainConfig::desk_scale();
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("learning_rate"), ConfigError);
  c = TrainConfig::desk_scale();
  c.epochs = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("epochs"), ConfigError);
  c = TrainConfig::desk_scale();
  c.source = DatasetSource::manifest;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("dataset.manifest"), ConfigError);
}

TEST_CASE("the hash ignores output locations but tracks everything else") {
  TrainConfig a = TrainConfig::desk_scale(), b = a;
  b.runs_dir = "/elsewhere";
  b.tag = "renamed";
  b.loader_workers = 4;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
  // Known FNV-1a 64 test vectors.
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("overrides and defaults") {
  TrainConfig c;
  CHECK(c.epochs == 40);
  CHECK(c.batch_size == 40);
  CHECK(c.learning_rate == 1e-4);
  apply_override(c, "epochs", " 2 ");
  CHECK(c.epochs == 2);
  CHECK_THROWS_AS(apply_override(c, "nope", "1"), ConfigError);
  CHECK(c.run_tag() == "direct_w1_seed0");
}
