#include "doctest.h"
#include "test_support.hpp"

#include "latentblur/checkpoint.hpp"
#include "latentblur/trainer.hpp"

#include <fstream>
#include <sstream>

using namespace latentblur;
namespace fs = std::filesystem;

namespace {

/// Seconds-scale run: 12 slides, three levels, miniature model.
TrainConfig quick_config(const std::string& name, Regularization mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 2;
  c.batch_size = 40;
  c.learning_rate = 1e-3;
  c.synthetic.n_slides = 12;
  c.synthetic.image_size = 20;
  c.synthetic.n_levels = 3;
  c.model = ModelConfig::miniature();
  c.runs_dir = testing::scratch_dir("trainer_" + name);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("baseline training writes checkpoints and one history row per epoch") {
  const TrainConfig c = quick_config("baseline", Regularization::baseline);
  const TrainResult r = train(c);
  CHECK(fs::exists(r.best_checkpoint));
  CHECK(fs::exists(r.last_checkpoint));
  const auto rows = lines(slurp(r.history_csv));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == kHistoryHeader);
  CHECK(rows[1].rfind("1,baseline,", 0) == 0);
  CHECK(r.history.size() == 2);

  const LoadedModel m = load_checkpoint(r.last_checkpoint);
  CHECK(m.meta.epoch == 2);
  CHECK(m.meta.mode == Regularization::baseline);
  CHECK(m.meta.train_config_hash == config_hash(c));
}

TEST_CASE("every step respects the mode's encoder discipline and loss formula") {
  for (Regularization mode : {Regularization::indirect, Regularization::direct}) {
    TrainConfig c = quick_config("discipline", mode);
    c.epochs = 1;
    int steps = 0;
    bool formula_ok = true, flags_ok = true;
    TrainHooks hooks;
    hooks.on_step = [&](const StepInfo& s) {
      ++steps;
      formula_ok = formula_ok && s.loss.total == s.loss.formula_total();
      flags_ok = flags_ok && s.loss.encoded[1] == encodes_middle(mode) && s.loss.encoded[0] && s.loss.encoded[2];
    };
    train(c, hooks);
    CHECK(steps > 0);
    CHECK(formula_ok);
    CHECK(flags_ok);
  }
}

TEST_CASE("identical config and seed give identical histories") {
  const TrainConfig a = quick_config("det_a", Regularization::direct);
  TrainConfig b = quick_config("det_b", Regularization::direct);
  const TrainResult ra = train(a), rb = train(b);
  CHECK(slurp(ra.history_csv) == slurp(rb.history_csv));
  CHECK(load_checkpoint(ra.last_checkpoint).meta.parameter_digest ==
        load_checkpoint(rb.last_checkpoint).meta.parameter_digest);

  TrainConfig other = quick_config("det_c", Regularization::direct);
  other.seed = 3;
  CHECK(slurp(train(other).history_csv) != slurp(ra.history_csv));
}

TEST_CASE("empty datasets and undersized images are reported") {
  const fs::path dir = testing::scratch_dir("trainer_empty");
  std::ofstream(dir / "manifest.csv") << "path,slide_id,channel,z_level\n";
  TrainConfig c = quick_config("empty_run", Regularization::direct);
  c.source = DatasetSource::manifest;
  c.manifest = dir / "manifest.csv";
  CHECK_THROWS_WITH_AS(train(c), doctest::Contains("empty"), TrainingError);

  TrainConfig small = quick_config("small", Regularization::direct);
  small.model.input_size = 32;
  CHECK_THROWS(train(small));
}

TEST_CASE("divergence aborts with the failing step") {
  TrainConfig c = quick_config("nan", Regularization::indirect);
  c.learning_rate = 1e38;
  c.epochs = 5;
  CHECK_THROWS_WITH_AS(train(c), doctest::Contains("non-finite loss at epoch"), TrainingError);
}
