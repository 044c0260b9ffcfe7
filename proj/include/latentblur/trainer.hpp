#pragma once

#include "latentblur/config.hpp"
#include "latentblur/dataset.hpp"
#include "latentblur/losses.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentblur {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Slides of the configured channel, split into train/val/test, with decoded pixels.
struct PreparedData {
  std::vector<std::string> warnings;
  SplitAssignment split;
  std::vector<ZStackSlide> train;
  std::vector<ZStackSlide> val;
  std::vector<ZStackSlide> test;
  ImageStore store;

  const std::vector<ZStackSlide>& part(SplitAssignment::Part p) const;
};

/// Resolves the dataset source of `config` (synthetic, manifest or directory) and filters by channel.
SlideIndex resolve_dataset(const TrainConfig& config);

PreparedData prepare_data(const TrainConfig& config);

/// Mean loss components of one epoch plus the validation objective.
struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;
  double val_total = 0.0;
};

struct StepInfo {
  int epoch = 0;
  int step = 0;
  std::size_t batch_size = 0;
  const LossBreakdown& loss;
};

struct TrainHooks {
  std::function<void(const StepInfo&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  std::ostream* log = nullptr;  // progress lines, one per epoch
};

struct TrainResult {
  std::filesystem::path run_dir;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path history_csv;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

inline constexpr const char* kHistoryHeader = "epoch,mode,rct_a,rct_c,rct_b_interp,latent_l1,total,val_total";

std::string history_row(const EpochRecord& record);

/**
 * Trains one model under `config.mode`.
 *
 * Every epoch draws the ten crops of every training triplet (single images in
 * baseline mode), shuffles them from the run seed, and steps Adam once per
 * batch. Validation uses center crops with running statistics. Writes
 * `<run_dir>/history.csv` and `<run_dir>/checkpoints/{best,last}.ckpt`.
 */
TrainResult train(const TrainConfig& config, const TrainHooks& hooks = {});

/// Inference-mode objective over center crops of the given slides (the validation metric).
double evaluate_objective(Autoencoder<float>& model, const std::vector<ZStackSlide>& slides,
                          const ImageStore& store, Regularization mode, Reduction reduction,
                          std::size_t batch_size = 40);

}  // namespace latentblur
