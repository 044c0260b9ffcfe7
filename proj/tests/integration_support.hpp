#pragma once

// One quick training run shared by the CLI and service suites.

#include "test_support.hpp"

#include "latentblur/config.hpp"
#include "latentblur/trainer.hpp"

#include <fstream>
#include <sstream>

namespace testing {

struct SharedRun {
  std::filesystem::path dir;
  std::filesystem::path config_path;
  latentblur::TrainConfig config;
  latentblur::TrainResult result;
  std::string test_slide;
};

/// Miniature direct-mode model on 12 synthetic slides with all nine levels.
inline latentblur::TrainConfig quick_direct_config(const std::filesystem::path& runs_dir) {
  latentblur::TrainConfig c;
  c.mode = latentblur::Regularization::direct;
  c.epochs = 1;
  c.learning_rate = 1e-3;
  c.synthetic.n_slides = 12;
  c.synthetic.image_size = 20;
  c.model = latentblur::ModelConfig::miniature();
  c.runs_dir = runs_dir;
  return c;
}

inline const SharedRun& shared_run() {
  static const SharedRun run = [] {
    SharedRun r;
    r.dir = scratch_dir("integration");
    r.config = quick_direct_config(r.dir / "runs");
    r.config_path = r.dir / "quick.cfg";
    std::ofstream(r.config_path) << latentblur::serialize(r.config);
    r.result = latentblur::train(r.config);
    r.test_slide = latentblur::prepare_data(r.config).test.front().slide_id;
    return r;
  }();
  return run;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing
