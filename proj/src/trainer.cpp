#include "latentblur/trainer.hpp"

#include "latentblur/adam.hpp"
#include "latentblur/checkpoint.hpp"
#include "latentblur/random.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace latentblur {

const std::vector<ZStackSlide>& PreparedData::part(SplitAssignment::Part p) const {
  switch (p) {
    case SplitAssignment::Part::train: return train;
    case SplitAssignment::Part::val: return val;
    case SplitAssignment::Part::test: return test;
  }
  return test;
}

SlideIndex resolve_dataset(const TrainConfig& config) {
  SlideIndex index;
  switch (config.source) {
    case DatasetSource::synthetic: {
      SyntheticStackConfig synth = config.synthetic;
      synth.channel = config.channel;
      index.slides = generate_synthetic_stack(synth);
      break;
    }
    case DatasetSource::manifest:
      if (config.manifest.empty()) throw ConfigError("dataset.manifest", "required when dataset.source = manifest");
      index = build_index(config.manifest, config.pattern);
      break;
    case DatasetSource::directory:
      if (config.root.empty()) throw ConfigError("dataset.root", "required when dataset.source = directory");
      index = build_index(config.root, config.pattern,
                          config.manifest.empty() ? std::nullopt : std::optional(config.manifest));
      break;
  }
  index.slides = filter_channel(index.slides, config.channel);
  return index;
}

PreparedData prepare_data(const TrainConfig& config) {
  SlideIndex index = resolve_dataset(config);
  if (index.slides.empty()) {
    throw TrainingError(std::string("dataset is empty: no usable slides for channel ") + to_string(config.channel));
  }
  PreparedData data;
  data.warnings = std::move(index.warnings);
  data.split = split_slides(index.slides, config.split_ratios, config.seed);
  data.train = select_slides(index.slides, data.split.train);
  data.val = select_slides(index.slides, data.split.val);
  data.test = select_slides(index.slides, data.split.test);
  data.store = ImageStore(index.slides, config.loader_workers);
  const Index crop = config.model.input_size;
  for (const ZStackSlide& s : index.slides) {
    if (s.height() < crop || s.width() < crop) {
      throw TrainingError("slide " + s.slide_id + " is " + std::to_string(s.height()) + "x" +
                          std::to_string(s.width()) + ", smaller than the " + std::to_string(crop) +
                          "-pixel model input");
    }
  }
  return data;
}

namespace {

struct Sample {
  std::array<const ImageRecord*, 3> images{};  // only [0] used for single-image samples
  CropWindow window;
};

std::vector<Sample> epoch_samples(const std::vector<ZStackSlide>& slides, Regularization mode, Index crop,
                                  bool center_only) {
  std::vector<Sample> out;
  auto windows_for = [&](const ImageRecord& r) {
    std::vector<CropWindow> w;
    if (center_only) {
      w.push_back({(r.height - crop) / 2, (r.width - crop) / 2, false});
    } else {
      const auto all = ten_crop_windows(r.height, r.width, crop);
      w.assign(all.begin(), all.end());
    }
    return w;
  };
  for (const ZStackSlide& slide : slides) {
    if (mode == Regularization::baseline) {
      for (const auto& [z, record] : slide.images) {
        for (const CropWindow& w : windows_for(record)) out.push_back({{&record, nullptr, nullptr}, w});
      }
    } else {
      for (const Triplet& t : enumerate_triplets(slide)) {
        for (const CropWindow& w : windows_for(*t.images[0])) out.push_back({t.images, w});
      }
    }
  }
  return out;
}

Tensor<float> gather(const ImageStore& store, std::span<const Sample> batch, int role, Index crop) {
  std::vector<Image> crops;
  crops.reserve(batch.size());
  for (const Sample& s : batch) crops.push_back(apply_crop(store.get(*s.images[role]), s.window, crop));
  return stack_images(crops);
}

LossBreakdown run_batch(Autoencoder<float>& model, const ImageStore& store, std::span<const Sample> batch,
                        Regularization mode, Reduction reduction, Index crop, bool training) {
  if (mode == Regularization::baseline) {
    return loss_baseline(model, gather(store, batch, 0, crop), reduction, training);
  }
  TripletBatch<float> tb;
  tb.sharp = gather(store, batch, 0, crop);
  tb.middle = gather(store, batch, 1, crop);
  tb.blurry = gather(store, batch, 2, crop);
  // Training triplets satisfy 2b = a + c, so the middle level sits at alpha = 0.5.
  tb.alpha = 0.5f;
  return triplet_objective(model, tb, mode, reduction, training);
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x, double w) {
  sum.rct_a += w * x.rct_a;
  sum.rct_c += w * x.rct_c;
  sum.rct_b_interp += w * x.rct_b_interp;
  sum.latent_l1 += w * x.latent_l1;
  sum.total += w * x.total;
}

void scale(LossBreakdown& b, double s) {
  b.rct_a *= s;
  b.rct_c *= s;
  b.rct_b_interp *= s;
  b.latent_l1 *= s;
  b.total *= s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string history_row(const EpochRecord& r) {
  return std::to_string(r.epoch) + "," + to_string(r.train.mode) + "," + fmt(r.train.rct_a) + "," +
         fmt(r.train.rct_c) + "," + fmt(r.train.rct_b_interp) + "," + fmt(r.train.latent_l1) + "," +
         fmt(r.train.total) + "," + fmt(r.val_total);
}

double evaluate_objective(Autoencoder<float>& model, const std::vector<ZStackSlide>& slides, const ImageStore& store,
                          Regularization mode, Reduction reduction, std::size_t batch_size) {
  const Index crop = model.config().input_size;
  const std::vector<Sample> samples = epoch_samples(slides, mode, crop, true);
  if (samples.empty()) return std::nan("");
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - i);
    const LossBreakdown b =
        run_batch(model, store, std::span(samples).subspan(i, n), mode, reduction, crop, false);
    sum += b.total * static_cast<double>(n);
  }
  return sum / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  PreparedData data = prepare_data(config);
  const Index crop = config.model.input_size;
  std::vector<Sample> samples = epoch_samples(data.train, config.mode, crop, false);
  if (samples.empty()) {
    throw TrainingError("training split has no " +
                        std::string(config.mode == Regularization::baseline ? "images" : "triplets"));
  }

  TrainResult result;
  result.run_dir = config.run_dir();
  const std::filesystem::path ckpt_dir = result.run_dir / "checkpoints";
  std::filesystem::create_directories(ckpt_dir);
  for (const char* sub : {"reports", "images"}) std::filesystem::create_directories(result.run_dir / sub);
  result.best_checkpoint = ckpt_dir / "best.ckpt";
  result.last_checkpoint = ckpt_dir / "last.ckpt";
  result.history_csv = result.run_dir / "history.csv";

  Autoencoder<float> model(config.model);
  model.reset_parameters(derive_seed(config.seed, 0x1417));
  Adam<float> adam({config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps});

  CheckpointMetadata meta;
  meta.train_config = serialize(config);
  meta.train_config_hash = config_hash(config);
  meta.channel = config.channel;
  meta.mode = config.mode;
  meta.run_tag = config.run_tag();

  std::ofstream history(result.history_csv, std::ios::binary);
  if (!history) throw TrainingError("cannot write " + result.history_csv.string());
  history << kHistoryHeader << "\n";

  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(samples);

    EpochRecord record;
    record.epoch = epoch;
    record.train.mode = config.mode;
    int step = 0;
    for (std::size_t i = 0; i < samples.size(); i += batch_size, ++step) {
      const std::size_t n = std::min(batch_size, samples.size() - i);
      model.zero_grad();
      LossBreakdown loss;
      try {
        loss = run_batch(model, data.store, std::span(samples).subspan(i, n), config.mode, config.reduction, crop, true);
      } catch (const LatentError& e) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                            " (" + e.what() + ")");
      }
      if (!std::isfinite(loss.total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                            " (rct_a=" + fmt(loss.rct_a) + ", rct_c=" + fmt(loss.rct_c) +
                            ", rct_b_interp=" + fmt(loss.rct_b_interp) + ", latent_l1=" + fmt(loss.latent_l1) + ")");
      }
      if (hooks.on_step) hooks.on_step({epoch, step, n, loss});
      adam.step(model);
      accumulate(record.train, loss, static_cast<double>(n));
    }
    scale(record.train, 1.0 / static_cast<double>(samples.size()));

    record.val_total = evaluate_objective(model, data.val, data.store, config.mode, config.reduction, batch_size);
    const double selection = std::isnan(record.val_total) ? record.train.total : record.val_total;

    meta.epoch = epoch;
    if (selection < best_val || epoch == 1) {
      best_val = selection;
      result.best_epoch = epoch;
      save_checkpoint(result.best_checkpoint, model, meta);
    }
    if (epoch == config.epochs) save_checkpoint(result.last_checkpoint, model, meta);

    history << history_row(record) << "\n";
    history.flush();
    result.history.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (hooks.log) {
      *hooks.log << "epoch " << epoch << "/" << config.epochs << "  " << to_string(config.mode)
                 << "  total " << fmt(record.train.total) << "  val " << fmt(record.val_total) << std::endl;
    }
  }
  return result;
}

}  // namespace latentblur
