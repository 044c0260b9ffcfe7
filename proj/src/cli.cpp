#include "latentblur/cli.hpp"

#include "latentblur/checkpoint.hpp"
#include "latentblur/evaluation.hpp"
#include "latentblur/image_io.hpp"
#include "latentblur/latent.hpp"
#include "latentblur/plot.hpp"
#include "latentblur/service.hpp"
#include "latentblur/trainer.hpp"

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

namespace latentblur {

namespace fs = std::filesystem;

namespace {

/// Bad flags or values supplied by the user (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, const char* spec = "%.9g") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::pair<int, int> parse_level_pair(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    const int a = std::stoi(text.substr(0, comma), &used);
    const int b = std::stoi(text.substr(comma + 1));
    return {a, b};
  } catch (const std::exception&) {
    throw UsageError("--levels expects two comma-separated z-levels like 2,0, got '" + text + "'");
  }
}

/// Directory of a run, inferred from `<run>/checkpoints/<file>.ckpt`.
fs::path run_dir_of(const fs::path& checkpoint) {
  const fs::path parent = checkpoint.parent_path();
  if (parent.filename() == "checkpoints") return parent.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

struct ModelContext {
  fs::path checkpoint;
  LoadedModel loaded;
  TrainConfig config;
  PreparedData data;

  fs::path run_dir() const { return run_dir_of(checkpoint); }

  const ZStackSlide& slide(const std::string& id) const {
    for (const auto* part : {&data.train, &data.val, &data.test}) {
      for (const ZStackSlide& s : *part) {
        if (s.slide_id == id) return s;
      }
    }
    throw UsageError("unknown slide '" + id + "' (the checkpoint's dataset has " +
                     std::to_string(data.train.size() + data.val.size() + data.test.size()) + " slides for channel " +
                     to_string(config.channel) + ")");
  }
};

/**
 * Loads a checkpoint and rebuilds the dataset it was trained on. With an
 * explicit config, its hash must match the one recorded in the checkpoint.
 */
ModelContext open_checkpoint(const fs::path& checkpoint, const std::string& config_path) {
  ModelContext ctx;
  ctx.checkpoint = checkpoint;
  ctx.loaded = load_checkpoint(checkpoint);
  const CheckpointMetadata& meta = ctx.loaded.meta;
  if (!config_path.empty()) {
    ctx.config = load_train_config(config_path);
    const std::string hash = config_hash(ctx.config);
    if (hash != meta.train_config_hash) {
      throw std::runtime_error("config hash mismatch: " + config_path + " hashes to " + hash + ", checkpoint " +
                               checkpoint.string() + " was trained with " + meta.train_config_hash);
    }
  } else {
    if (meta.train_config.empty()) throw std::runtime_error(checkpoint.string() + " carries no training config");
    ctx.config = parse_train_config(meta.train_config);
    if (config_hash(ctx.config) != meta.train_config_hash) {
      throw std::runtime_error("embedded training config of " + checkpoint.string() + " does not match its hash");
    }
  }
  ctx.data = prepare_data(ctx.config);
  return ctx;
}

SplitAssignment::Part parse_split(const std::string& s) {
  if (s == "train") return SplitAssignment::Part::train;
  if (s == "val") return SplitAssignment::Part::val;
  if (s == "test") return SplitAssignment::Part::test;
  throw UsageError("unknown split '" + s + "' (expected train, val or test)");
}

std::string alpha_label(double alpha) { return fmt(alpha, "%.4f"); }

// ---------------------------------------------------------------------------

struct MakeSyntheticArgs {
  std::string config;
  std::string out;
  std::optional<int> slides;
  std::optional<long> size;
  std::optional<int> levels;
  std::optional<double> sigma_step;
  std::optional<std::string> channel;
  std::uint64_t seed = 0;
};

int cmd_make_synthetic(const MakeSyntheticArgs& a, std::ostream& out) {
  SyntheticStackConfig sc = a.config.empty() ? TrainConfig::desk_scale().synthetic : load_train_config(a.config).synthetic;
  if (a.slides) sc.n_slides = *a.slides;
  if (a.size) sc.image_size = *a.size;
  if (a.levels) sc.n_levels = *a.levels;
  if (a.sigma_step) sc.sigma_step = *a.sigma_step;
  if (a.channel) sc.channel = parse_channel(*a.channel);
  sc.seed = a.seed;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("synthetic", e.what());
  }
  const std::vector<ZStackSlide> slides = generate_synthetic_stack(sc);
  const fs::path manifest = materialize_slides(slides, a.out);
  std::size_t images = 0;
  for (const auto& s : slides) images += s.images.size();
  out << manifest.string() << "\n";
  out << "wrote " << images << " images of " << slides.size() << " slides (" << sc.n_levels << " levels, "
      << sc.image_size << "x" << sc.image_size << ", channel " << to_string(sc.channel) << ") to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::string> channel;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> runs_dir;
  std::optional<std::string> tag;
  std::vector<std::string> set;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig c = a.config.empty() ? TrainConfig::desk_scale() : load_train_config(a.config);
  if (a.mode) apply_override(c, "mode", *a.mode);
  if (a.channel) apply_override(c, "channel", *a.channel);
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.learning_rate) c.learning_rate = *a.learning_rate;
  if (a.seed) {
    c.seed = *a.seed;
    c.synthetic.seed = *a.seed;
  }
  if (a.runs_dir) c.runs_dir = *a.runs_dir;
  if (a.tag) c.tag = *a.tag;
  for (const std::string& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();

  TrainHooks hooks;
  if (!a.quiet) hooks.log = &err;
  const TrainResult r = train(c, hooks);
  write_text(r.run_dir / "config.cfg", serialize(c));

  out << r.best_checkpoint.string() << "\n" << r.last_checkpoint.string() << "\n" << r.history_csv.string() << "\n";
  const EpochRecord& last = r.history.back();
  out << "trained " << c.run_tag() << " (" << to_string(c.mode) << ", " << to_string(c.channel) << "): "
      << r.history.size() << " epochs, final total " << fmt(last.train.total, "%.5f") << ", best epoch "
      << r.best_epoch << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string config;
  std::string split = "test";
  std::optional<std::string> channel;
  std::string psnr_max = "one";
  int target_level = kFocusLevel;
  std::string levels = "2,0";
  std::string out_dir;
};

EvalOptions eval_options(const std::string& psnr_max, int target, const std::string& levels) {
  EvalOptions o;
  try {
    o.psnr_max = parse_psnr_max(psnr_max);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::tie(o.deblur_b, o.deblur_c) = parse_level_pair(levels);
  o.deblur_target = target;
  try {
    alpha_for_levels(o.deblur_target, o.deblur_b, o.deblur_c);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return o;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const SplitAssignment::Part part = parse_split(a.split);
  const EvalOptions options = eval_options(a.psnr_max, a.target_level, a.levels);
  std::vector<MetricReport> reports;
  std::vector<fs::path> written;
  for (const std::string& ckpt : a.checkpoints) {
    ModelContext ctx = open_checkpoint(ckpt, a.config);
    if (a.channel && parse_channel(*a.channel) != ctx.loaded.meta.channel) {
      throw std::runtime_error("checkpoint " + ckpt + " was trained on channel " +
                               to_string(ctx.loaded.meta.channel) + ", not " + *a.channel);
    }
    MetricReport r = evaluate_model(*ctx.loaded.model, ctx.data.part(part), ctx.data.store, options);
    r.model_tag = ctx.loaded.meta.tag();
    r.mode = to_string(ctx.loaded.meta.mode);
    r.channel = to_string(ctx.loaded.meta.channel);
    r.split = a.split;
    r.config_hash = ctx.loaded.meta.train_config_hash;

    const fs::path dir = a.out_dir.empty() ? ctx.run_dir() / "reports" : fs::path(a.out_dir);
    const std::string stem = (a.out_dir.empty() ? std::string("metrics_") : r.mode + "_metrics_") + a.split;
    write_text(dir / (stem + ".json"), report_json(r));
    write_text(dir / (stem + ".txt"), render_table({r}));
    written.push_back(dir / (stem + ".json"));
    written.push_back(dir / (stem + ".txt"));
    reports.push_back(std::move(r));
  }
  const std::string table = render_table(reports);
  if (reports.size() > 1) {
    const fs::path dir = a.out_dir.empty() ? run_dir_of(a.checkpoints.front()) / "reports" : fs::path(a.out_dir);
    write_text(dir / ("comparison_" + a.split + ".txt"), table);
    written.push_back(dir / ("comparison_" + a.split + ".txt"));
  }
  out << table;
  for (const fs::path& p : written) out << p.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BlurArgs {
  std::string checkpoint;
  std::string config;
  std::string slide;
  int level_a = kFocusLevel;
  int level_c = 0;
  std::vector<double> alphas;
  std::string out_dir;
};

int cmd_synthesize_blur(const BlurArgs& a, std::ostream& out) {
  std::vector<double> alphas = a.alphas;
  if (alphas.empty()) {
    for (int k = 0; k <= 8; ++k) alphas.push_back(k / 8.0);
  }
  for (double al : alphas) {
    if (!(al >= 0.0 && al <= 1.0)) throw UsageError("--alphas values must lie in [0, 1], got " + fmt(al));
  }
  if (!(a.level_a > a.level_c)) throw UsageError("--level-a must be less blurred (higher) than --level-c");
  ModelContext ctx = open_checkpoint(a.checkpoint, a.config);
  const ZStackSlide& slide = ctx.slide(a.slide);
  const SlideLatents s = encode_slide(*ctx.loaded.model, slide, ctx.data.store);
  if (!s.has(a.level_a) || !s.has(a.level_c)) throw UsageError("slide " + a.slide + " lacks the requested levels");

  const fs::path dir = a.out_dir.empty() ? ctx.run_dir() / "images" : fs::path(a.out_dir);
  const std::string stem = "blur_" + a.slide + "_a" + std::to_string(a.level_a) + "_c" + std::to_string(a.level_c);
  std::vector<Image> frames;
  std::vector<fs::path> written;
  // Blurriest first, matching a left-to-right focus sweep.
  std::sort(alphas.begin(), alphas.end());
  for (double al : alphas) {
    const Image y =
        decode_latent(*ctx.loaded.model, interpolate_latents(s.latent(a.level_a), s.latent(a.level_c), float(al)));
    const fs::path p = dir / (stem + "_alpha" + alpha_label(al) + ".png");
    save_png(p, y);
    written.push_back(p);
    frames.push_back(y);
  }
  const fs::path strip = dir / (stem + "_filmstrip.png");
  save_png(strip, filmstrip(frames));
  written.push_back(strip);
  for (const fs::path& p : written) out << p.string() << "\n";
  out << "synthesized " << alphas.size() << " blur levels between z" << a.level_c << " and z" << a.level_a
      << " for " << a.slide << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DeblurArgs {
  std::string checkpoint;
  std::string config;
  std::string slide;
  std::string levels;
  std::optional<double> alpha;
  std::optional<int> target_level;
  std::string psnr_max = "one";
  std::string out_dir;
};

int cmd_deblur(const DeblurArgs& a, std::ostream& out) {
  const auto [b, c] = parse_level_pair(a.levels);
  if (!(b > c)) throw UsageError("--levels b,c needs b less blurred (higher) than c");
  if (a.alpha.has_value() == a.target_level.has_value()) throw UsageError("give exactly one of --alpha or --target-level");
  double alpha = 0.0;
  std::optional<int> target = a.target_level;
  if (a.alpha) {
    alpha = *a.alpha;
    if (!(alpha > 0.0)) throw UsageError("--alpha must be > 0 (extrapolation divides by alpha)");
    if (!(alpha <= 1.0)) throw UsageError("--alpha must be <= 1");
    const double level = c + (b - c) / alpha;
    if (std::abs(level - std::round(level)) < 1e-9) target = static_cast<int>(std::round(level));
  } else {
    try {
      alpha = alpha_for_levels(*target, b, c);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  PsnrMax pm;
  try {
    pm = parse_psnr_max(a.psnr_max);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  ModelContext ctx = open_checkpoint(a.checkpoint, a.config);
  const SlideLatents s = encode_slide(*ctx.loaded.model, ctx.slide(a.slide), ctx.data.store);
  if (!s.has(b) || !s.has(c)) throw UsageError("slide " + a.slide + " lacks levels " + a.levels);
  const Image y =
      decode_latent(*ctx.loaded.model, extrapolate_latents(s.latent(b), s.latent(c), static_cast<float>(alpha)));

  nlohmann::ordered_json meta = {{"checkpoint_tag", ctx.loaded.meta.tag()},
                                 {"slide_id", a.slide},
                                 {"level_b", b},
                                 {"level_c", c},
                                 {"alpha", alpha},
                                 {"target_level", target ? nlohmann::ordered_json(*target) : nullptr},
                                 {"psnr_max", to_string(pm)},
                                 {"psnr_grd", nullptr},
                                 {"psnr_reconstruction", nullptr},
                                 {"psnr_blurry_input", nullptr}};
  auto db = [](double v) { return std::isinf(v) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(v); };
  if (target && s.has(*target)) {
    const Image& truth = s.crops.at(*target);
    meta["psnr_grd"] = db(psnr(truth, y, pm));
    meta["psnr_reconstruction"] = db(psnr(decode_latent(*ctx.loaded.model, s.latent(*target)), y, pm));
    meta["psnr_blurry_input"] = db(psnr(truth, s.crops.at(b), pm));
  }
  const fs::path dir = a.out_dir.empty() ? ctx.run_dir() / "images" : fs::path(a.out_dir);
  const std::string stem = "deblur_" + a.slide + "_b" + std::to_string(b) + "_c" + std::to_string(c) + "_alpha" +
                           alpha_label(alpha);
  save_png(dir / (stem + ".png"), y);
  write_text(dir / (stem + ".json"), meta.dump(2) + "\n");
  out << (dir / (stem + ".png")).string() << "\n" << (dir / (stem + ".json")).string() << "\n";
  out << "alpha = " << fmt(alpha, "%.6g");
  if (target) out << ", target level " << *target;
  if (!meta["psnr_grd"].is_null()) out << ", PSNR vs ground truth " << meta["psnr_grd"].dump() << " dB";
  out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> slides;
  std::string split = "test";
  int fixed_level = 0;
  std::vector<int> levels{2, 4, 6, 8, 10, 12, 14};
  int target_level = kFocusLevel;
  double band = 0.5;
  std::string psnr_max = "one";
  std::string out_dir;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  EvalOptions o = eval_options(a.psnr_max, a.target_level, std::to_string(a.target_level) + "," +
                                                                 std::to_string(a.fixed_level));
  o.sweep_fixed = a.fixed_level;
  o.sweep_levels = a.levels;
  o.sweep_band_db = a.band;
  ModelContext ctx = open_checkpoint(a.checkpoint, a.config);
  std::vector<SlideLatents> enc;
  if (a.slides.empty()) {
    for (const ZStackSlide& s : ctx.data.part(parse_split(a.split))) {
      enc.push_back(encode_slide(*ctx.loaded.model, s, ctx.data.store));
    }
  } else {
    for (const std::string& id : a.slides) enc.push_back(encode_slide(*ctx.loaded.model, ctx.slide(id), ctx.data.store));
  }
  const std::vector<SweepPoint> sweep = deblur_sweep(*ctx.loaded.model, enc, o);
  const bool monotone = sweep_is_non_increasing(sweep, a.band);

  std::string csv = "level_b,level_c,alpha,psnr_grd_extr,psnr_d_extr,psnr_blurry_input,slides\n";
  PlotSeries extr, input;
  input.color = {0.8f, 0.2f, 0.1f};
  for (const SweepPoint& p : sweep) {
    csv += std::to_string(p.level_b) + "," + std::to_string(p.level_c) + "," + fmt(p.alpha) + "," +
           fmt(p.grd_extr.mean()) + "," + fmt(p.d_extr.mean()) + "," + fmt(p.input.mean()) + "," +
           std::to_string(p.grd_extr.count()) + "\n";
    extr.x.push_back(p.level_b);
    extr.y.push_back(p.grd_extr.mean());
    input.x.push_back(p.level_b);
    input.y.push_back(p.input.mean());
  }
  const fs::path dir = a.out_dir.empty() ? ctx.run_dir() / "reports" : fs::path(a.out_dir);
  const std::string who = a.slides.size() == 1 ? a.slides.front() : (a.slides.empty() ? a.split : "selected");
  const std::string stem = "sweep_" + who + "_c" + std::to_string(a.fixed_level);
  write_text(dir / (stem + ".csv"), csv);
  save_png(dir / (stem + ".png"), render_plot({extr, input}));
  out << (dir / (stem + ".csv")).string() << "\n" << (dir / (stem + ".png")).string() << "\n";
  out << "sweep over " << sweep.size() << " source levels (fixed z" << a.fixed_level << ", target z" << a.target_level
      << "): non-increasing within " << fmt(a.band, "%.2g") << " dB: " << (monotone ? "yes" : "no") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> slides;
  std::string split = "test";
  bool pooled = false;
  std::string out_dir;
};

int cmd_project(const ProjectArgs& a, std::ostream& out) {
  ModelContext ctx = open_checkpoint(a.checkpoint, a.config);
  std::vector<const ZStackSlide*> chosen;
  if (a.slides.empty()) {
    for (const ZStackSlide& s : ctx.data.part(parse_split(a.split))) chosen.push_back(&s);
  } else {
    for (const std::string& id : a.slides) chosen.push_back(&ctx.slide(id));
  }
  std::vector<LatentTrajectory> traj;
  for (const ZStackSlide* s : chosen) traj.push_back(encode_slide(*ctx.loaded.model, *s, ctx.data.store).trajectory());

  const fs::path dir = a.out_dir.empty() ? ctx.run_dir() / "reports" : fs::path(a.out_dir);
  std::string csv = "slide_id,z_level,pc1,pc2\n";
  std::vector<fs::path> written;
  double worst_pc2 = 0.0;
  auto emit = [&](const std::vector<const LatentTrajectory*>& group, const Projection2D& p, const std::string& name) {
    Index row = 0;
    PlotSeries series;
    series.lines = true;
    for (const LatentTrajectory* t : group) {
      for (Index i = 0; i < t->size(); ++i, ++row) {
        csv += t->slide_id + "," + std::to_string(t->z_levels[static_cast<std::size_t>(i)]) + "," +
               fmt(p.points(row, 0)) + "," + fmt(p.points(row, 1)) + "\n";
        series.x.push_back(p.points(row, 0));
        series.y.push_back(p.points(row, 1));
      }
    }
    const fs::path png = dir / ("projection_" + name + ".png");
    save_png(png, render_plot({series}));
    written.push_back(png);
    worst_pc2 = std::max(worst_pc2, p.explained_ratio[1]);
  };
  if (a.pooled) {
    std::vector<const LatentTrajectory*> all;
    for (const auto& t : traj) all.push_back(&t);
    emit(all, pca_project_2d(traj), "pooled");
  } else {
    for (const auto& t : traj) emit({&t}, pca_project_2d(t.latents), t.slide_id);
  }
  const fs::path csv_path = dir / (a.pooled ? "projection_pooled.csv" : "projection.csv");
  write_text(csv_path, csv);
  out << csv_path.string() << "\n";
  for (const fs::path& p : written) out << p.string() << "\n";
  out << "projected " << traj.size() << " slides; max PC2 variance ratio " << fmt(worst_pc2, "%.4f") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string checkpoint;
  std::string config;
  std::string catalog = "test";
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  std::unique_ptr<InferenceService> service;
  std::optional<ModelContext> ctx;
  ImageStore catalog_store;
  if (a.checkpoint.empty()) {
    service = std::make_unique<InferenceService>();
  } else {
    ctx = open_checkpoint(a.checkpoint, a.config);
    std::vector<ZStackSlide> catalog;
    const ImageStore* store = &ctx->data.store;
    if (a.catalog == "test" || a.catalog == "val" || a.catalog == "train") {
      catalog = ctx->data.part(parse_split(a.catalog));
    } else if (a.catalog == "all") {
      for (const auto* part : {&ctx->data.train, &ctx->data.val, &ctx->data.test})
        catalog.insert(catalog.end(), part->begin(), part->end());
    } else {
      SlideIndex index = build_index(a.catalog, ctx->config.pattern);
      catalog = filter_channel(index.slides, ctx->loaded.meta.channel);
      catalog_store = ImageStore(catalog);
      store = &catalog_store;
    }
    service = std::make_unique<InferenceService>(ctx->loaded.model, ctx->loaded.meta, catalog, *store);
  }
  httplib::Server server;
  service->mount(server);
  if (!server.bind_to_port(a.host, a.port)) throw std::runtime_error("cannot bind " + a.host + ":" + std::to_string(a.port));
  out << "serving " << (service->has_model() ? service->checkpoint_tag() : std::string("<no model>")) << " on http://"
      << a.host << ":" << a.port << std::endl;
  server.listen_after_bind();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-line autoencoders for defocus blur synthesis and deblurring", "latentblur"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  MakeSyntheticArgs ms;
  auto* make_synth = app.add_subcommand("make-synthetic", "Write a procedural z-stack dataset with a manifest");
  make_synth->add_option("--out", ms.out, "Output directory")->required();
  make_synth->add_option("--config", ms.config, "Config whose synthetic.* keys are used (default: desk-scale)");
  make_synth->add_option("--slides", ms.slides, "Number of slides (default 24)");
  make_synth->add_option("--size", ms.size, "Image side in pixels (default 64)");
  make_synth->add_option("--levels", ms.levels, "Number of even z-levels ending at 16 (default 9)");
  make_synth->add_option("--sigma-step", ms.sigma_step, "Gaussian sigma per 2 levels below focus (default 0.5)");
  make_synth->add_option("--channel", ms.channel, "Channel tag w1 or w2 (default w1)");
  make_synth->add_option("--seed", ms.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train an autoencoder (baseline, indirect or direct)");
  train_cmd->add_option("--config", tr.config, "TrainConfig file (default: desk-scale synthetic)");
  train_cmd->add_option("--mode", tr.mode, "Objective: baseline, indirect or direct");
  train_cmd->add_option("--channel", tr.channel, "Channel: w1 or w2");
  train_cmd->add_option("--epochs", tr.epochs, "Epochs (default 40)");
  train_cmd->add_option("--batch-size", tr.batch_size, "Triplets per batch (default 40)");
  train_cmd->add_option("--learning-rate", tr.learning_rate, "Adam learning rate (default 1e-3 at desk scale)");
  train_cmd->add_option("--seed", tr.seed, "Seed for data, split, initialization and shuffling (default 0)");
  train_cmd->add_option("--runs-dir", tr.runs_dir, "Parent of run directories (default runs)");
  train_cmd->add_option("--tag", tr.tag, "Run tag (default <mode>_<channel>_seed<seed>)");
  train_cmd->add_option("--set", tr.set, "Override any config key, key=value (repeatable)");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compute LDS, APD and PSNR metrics on a split");
  eval_cmd->add_option("--checkpoint", ev.checkpoints, "Checkpoint(s); several give a comparison table")->required();
  eval_cmd->add_option("--config", ev.config, "Config to verify against the checkpoint's config hash");
  eval_cmd->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--channel", ev.channel, "Expected channel of the checkpoint");
  eval_cmd->add_option("--psnr-max", ev.psnr_max, "PSNR peak: one (1.0) or image (reference maximum)")->capture_default_str();
  eval_cmd->add_option("--target-level", ev.target_level, "Deblurring target level")->capture_default_str();
  eval_cmd->add_option("--levels", ev.levels, "Deblurring source levels b,c")->capture_default_str();
  eval_cmd->add_option("--out", ev.out_dir, "Report directory (default <run>/reports)");

  BlurArgs bl;
  auto* blur_cmd = app.add_subcommand("synthesize-blur", "Decode interpolated latents between two levels");
  blur_cmd->add_option("--checkpoint", bl.checkpoint, "Checkpoint")->required();
  blur_cmd->add_option("--config", bl.config, "Config to verify against the checkpoint");
  blur_cmd->add_option("--slide", bl.slide, "Slide id")->required();
  blur_cmd->add_option("--level-a", bl.level_a, "Sharper source level")->capture_default_str();
  blur_cmd->add_option("--level-c", bl.level_c, "Blurrier source level")->capture_default_str();
  blur_cmd->add_option("--alphas", bl.alphas, "Blend weights in [0,1] (default 0, 1/8, ..., 1)")->delimiter(',');
  blur_cmd->add_option("--out", bl.out_dir, "Image directory (default <run>/images)");

  DeblurArgs db;
  auto* deblur_cmd = app.add_subcommand("deblur", "Extrapolate two blurry levels toward focus");
  deblur_cmd->add_option("--checkpoint", db.checkpoint, "Checkpoint")->required();
  deblur_cmd->add_option("--config", db.config, "Config to verify against the checkpoint");
  deblur_cmd->add_option("--slide", db.slide, "Slide id")->required();
  deblur_cmd->add_option("--levels", db.levels, "Source levels b,c with b less blurred, e.g. 2,0")->required();
  deblur_cmd->add_option("--alpha", db.alpha, "Extrapolation weight in (0,1]");
  deblur_cmd->add_option("--target-level", db.target_level, "Target level; alpha = (b-c)/(target-c)");
  deblur_cmd->add_option("--psnr-max", db.psnr_max, "PSNR peak: one or image")->capture_default_str();
  deblur_cmd->add_option("--out", db.out_dir, "Image directory (default <run>/images)");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Deblurring PSNR as the less blurred source varies");
  sweep_cmd->add_option("--checkpoint", sw.checkpoint, "Checkpoint")->required();
  sweep_cmd->add_option("--config", sw.config, "Config to verify against the checkpoint");
  sweep_cmd->add_option("--slide", sw.slides, "Slide id(s) (default: every slide of --split)");
  sweep_cmd->add_option("--split", sw.split, "Split used when no slide is given")->capture_default_str();
  sweep_cmd->add_option("--fixed-level", sw.fixed_level, "Blurrier source level held fixed")->capture_default_str();
  sweep_cmd->add_option("--levels", sw.levels, "Varying source levels")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--target-level", sw.target_level, "Target level")->capture_default_str();
  sweep_cmd->add_option("--band", sw.band, "Noise band in dB for the monotonicity flag")->capture_default_str();
  sweep_cmd->add_option("--psnr-max", sw.psnr_max, "PSNR peak: one or image")->capture_default_str();
  sweep_cmd->add_option("--out", sw.out_dir, "Output directory (default <run>/reports)");

  ProjectArgs pj;
  auto* project_cmd = app.add_subcommand("project", "2D PCA of per-slide latent trajectories");
  project_cmd->add_option("--checkpoint", pj.checkpoint, "Checkpoint")->required();
  project_cmd->add_option("--config", pj.config, "Config to verify against the checkpoint");
  project_cmd->add_option("--slide", pj.slides, "Slide id(s) (default: every slide of --split)");
  project_cmd->add_option("--split", pj.split, "Split used when no slide is given")->capture_default_str();
  project_cmd->add_flag("--pooled", pj.pooled, "Fit one PCA on all chosen slides instead of one per slide");
  project_cmd->add_option("--out", pj.out_dir, "Output directory (default <run>/reports)");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service for the alpha explorer");
  serve_cmd->add_option("--checkpoint", sv.checkpoint, "Checkpoint (without one, health reports 503)");
  serve_cmd->add_option("--config", sv.config, "Config to verify against the checkpoint");
  serve_cmd->add_option("--catalog", sv.catalog, "Slides to register: train, val, test, all, or a manifest/directory")
      ->capture_default_str();
  serve_cmd->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", sv.port, "Port")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto selected = app.get_subcommands();
    out << (selected.empty() ? app.help() : selected.back()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto selected = app.get_subcommands();
    err << "run with " << (selected.empty() ? std::string() : selected.back()->get_name() + " ") << "--help for usage\n";
    return kExitUsage;
  }

  try {
    if (make_synth->parsed()) return cmd_make_synthetic(ms, out);
    if (train_cmd->parsed()) return cmd_train(tr, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (blur_cmd->parsed()) return cmd_synthesize_blur(bl, out);
    if (deblur_cmd->parsed()) return cmd_deblur(db, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sw, out);
    if (project_cmd->parsed()) return cmd_project(pj, out);
    if (serve_cmd->parsed()) return cmd_serve(sv, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace latentblur
