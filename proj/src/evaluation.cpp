#include "latentblur/evaluation.hpp"

#include "latentblur/latent.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace latentblur {

Index SlideLatents::column(int level) const {
  const auto it = std::lower_bound(levels.begin(), levels.end(), level);
  if (it == levels.end() || *it != level) {
    throw std::out_of_range("slide " + slide_id + " has no level " + std::to_string(level));
  }
  return static_cast<Index>(it - levels.begin());
}

LatentTrajectory SlideLatents::trajectory() const {
  LatentTrajectory t;
  t.slide_id = slide_id;
  const Index n = static_cast<Index>(levels.size());
  t.latents.resize(latents.rows(), n);
  for (Index i = 0; i < n; ++i) {
    t.z_levels.push_back(levels[static_cast<std::size_t>(n - 1 - i)]);
    t.latents.col(i) = latents.col(n - 1 - i).cast<double>();
  }
  return t;
}

SlideLatents encode_slide(const Autoencoder<float>& model, const ZStackSlide& slide, const ImageStore& store) {
  SlideLatents out;
  out.slide_id = slide.slide_id;
  const Index size = model.config().input_size;
  std::vector<Image> crops;
  for (const auto& [z, record] : slide.images) {
    out.levels.push_back(z);
    crops.push_back(center_crop(store.get(record), size));
    out.crops.emplace(z, crops.back());
  }
  out.latents = model.encode(stack_images(crops));
  return out;
}

Image decode_latent(const Autoencoder<float>& model, const Vector<float>& z) {
  return image_from_batch(model.decode(z), 0);
}

namespace {

Image reconstruct(const Autoencoder<float>& model, const SlideLatents& s, int level) {
  return decode_latent(model, s.latent(level));
}

}  // namespace

bool sweep_is_non_increasing(const std::vector<SweepPoint>& sweep, double band_db) {
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double prev = sweep[i - 1].grd_extr.mean();
    const double cur = sweep[i].grd_extr.mean();
    if (std::isnan(prev) || std::isnan(cur)) continue;
    if (cur > prev + band_db) return false;
  }
  return true;
}

std::vector<SweepPoint> deblur_sweep(const Autoencoder<float>& model, const std::vector<SlideLatents>& slides,
                                     const EvalOptions& o) {
  std::vector<int> bs = o.sweep_levels;
  std::sort(bs.begin(), bs.end(), std::greater<>());
  std::vector<SweepPoint> out;
  for (int b : bs) {
    if (b <= o.sweep_fixed || b > o.deblur_target) continue;
    SweepPoint p;
    p.level_b = b;
    p.level_c = o.sweep_fixed;
    p.alpha = alpha_for_levels(o.deblur_target, b, o.sweep_fixed);
    for (const SlideLatents& s : slides) {
      if (!s.has(b) || !s.has(o.sweep_fixed) || !s.has(o.deblur_target)) continue;
      const Vector<float> z = extrapolate_latents(s.latent(b), s.latent(o.sweep_fixed), static_cast<float>(p.alpha));
      const Image y = decode_latent(model, z);
      const Image& truth = s.crops.at(o.deblur_target);
      p.grd_extr.add(psnr(truth, y, o.psnr_max));
      p.d_extr.add(psnr(reconstruct(model, s, o.deblur_target), y, o.psnr_max));
      p.input.add(psnr(truth, s.crops.at(b), o.psnr_max));
    }
    out.push_back(p);
  }
  return out;
}

MetricReport evaluate_model(const Autoencoder<float>& model, const std::vector<ZStackSlide>& slides,
                            const ImageStore& store, const EvalOptions& o) {
  MetricReport r;
  r.psnr_max = to_string(o.psnr_max);
  r.slides = slides.size();
  r.deblur_target = o.deblur_target;
  r.deblur_b = o.deblur_b;
  r.deblur_c = o.deblur_c;
  r.deblur_alpha = alpha_for_levels(o.deblur_target, o.deblur_b, o.deblur_c);

  std::vector<SlideLatents> enc;
  enc.reserve(slides.size());
  for (const ZStackSlide& s : slides) enc.push_back(encode_slide(model, s, store));

  // Latent geometry, averaged per slide.
  double lds_sum = 0.0, apd_sum = 0.0;
  for (const SlideLatents& s : enc) {
    const LatentTrajectory t = s.trajectory();
    try {
      if (t.size() >= 3) {
        lds_sum += lds(t);
        ++r.lds_slides;
      }
    } catch (const MetricError& e) {
      r.warnings.push_back(s.slide_id + ": " + e.what());
    }
    try {
      if (t.size() >= 2) {
        apd_sum += apd(t);
        ++r.apd_slides;
      }
    } catch (const MetricError& e) {
      r.warnings.push_back(s.slide_id + ": " + e.what());
    }
  }
  r.lds = r.lds_slides ? lds_sum / static_cast<double>(r.lds_slides) : std::nan("");
  r.apd = r.apd_slides ? apd_sum / static_cast<double>(r.apd_slides) : std::nan("");

  // Blur synthesis over every triplet, plus the wrong-slide control.
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const SlideLatents& s = enc[i];
    const SlideLatents& other = enc[(i + 1) % enc.size()];
    for (const Triplet& t : enumerate_triplets(slides[i])) {
      const auto [a, b, c] = t.levels;
      const float alpha = static_cast<float>(alpha_for_levels(a, b, c));
      const Image y = decode_latent(model, interpolate_latents(s.latent(a), s.latent(c), alpha));
      r.psnr_b_interp.add(psnr(reconstruct(model, s, b), y, o.psnr_max));
      r.psnr_grd_interp.add(psnr(s.crops.at(b), y, o.psnr_max));
      if (enc.size() > 1 && other.has(a) && other.has(c)) {
        const Image yc = decode_latent(model, interpolate_latents(other.latent(a), other.latent(c), alpha));
        r.psnr_grd_interp_control.add(psnr(s.crops.at(b), yc, o.psnr_max));
      }
      ++r.triplets;
    }
  }

  // Deblurring at the configured sources.
  for (const SlideLatents& s : enc) {
    if (!s.has(o.deblur_b) || !s.has(o.deblur_c) || !s.has(o.deblur_target)) {
      r.warnings.push_back(s.slide_id + ": deblurring levels missing, skipped");
      continue;
    }
    const Vector<float> z =
        extrapolate_latents(s.latent(o.deblur_b), s.latent(o.deblur_c), static_cast<float>(r.deblur_alpha));
    const Image y = decode_latent(model, z);
    const Image& truth = s.crops.at(o.deblur_target);
    r.psnr_grd_extr.add(psnr(truth, y, o.psnr_max));
    r.psnr_d_extr.add(psnr(reconstruct(model, s, o.deblur_target), y, o.psnr_max));
    r.psnr_blurry_input.add(psnr(truth, s.crops.at(o.deblur_b), o.psnr_max));
  }

  r.sweep = deblur_sweep(model, enc, o);
  r.sweep_non_increasing = sweep_is_non_increasing(r.sweep, o.sweep_band_db);
  return r;
}

namespace {

nlohmann::ordered_json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::ordered_json stat_json(const PsnrStat& s) {
  return {{"mean_db", number(s.mean())}, {"finite", s.finite}, {"infinite", s.infinite}};
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  for (const SweepPoint& p : r.sweep) {
    sweep.push_back({{"level_b", p.level_b},
                     {"level_c", p.level_c},
                     {"alpha", p.alpha},
                     {"psnr_grd_extr", stat_json(p.grd_extr)},
                     {"psnr_d_extr", stat_json(p.d_extr)},
                     {"psnr_blurry_input", stat_json(p.input)}});
  }
  const nlohmann::ordered_json j = {
      {"model_tag", r.model_tag},
      {"mode", r.mode},
      {"channel", r.channel},
      {"split", r.split},
      {"config_hash", r.config_hash},
      {"psnr_max", r.psnr_max},
      {"lds", number(r.lds)},
      {"apd", number(r.apd)},
      {"psnr_b_interp", stat_json(r.psnr_b_interp)},
      {"psnr_grd_interp", stat_json(r.psnr_grd_interp)},
      {"psnr_d_extr", stat_json(r.psnr_d_extr)},
      {"psnr_grd_extr", stat_json(r.psnr_grd_extr)},
      {"psnr_blurry_input", stat_json(r.psnr_blurry_input)},
      {"psnr_grd_interp_control", stat_json(r.psnr_grd_interp_control)},
      {"deblur", {{"target", r.deblur_target}, {"level_b", r.deblur_b}, {"level_c", r.deblur_c},
                  {"alpha", r.deblur_alpha}}},
      {"sweep", sweep},
      {"sweep_non_increasing", r.sweep_non_increasing},
      {"counts", {{"slides", r.slides}, {"triplets", r.triplets}, {"lds_slides", r.lds_slides},
                  {"apd_slides", r.apd_slides}}},
      {"warnings", r.warnings}};
  return j.dump(2) + "\n";
}

std::string format_db(const PsnrStat& s) {
  char buf[64];
  if (s.finite == 0 && s.infinite == 0) return "n/a";
  if (s.finite == 0) return "inf";
  std::snprintf(buf, sizeof buf, "%.2f", s.mean());
  std::string out = buf;
  if (s.infinite) out += " (+" + std::to_string(s.infinite) + " inf)";
  return out;
}

std::string render_table(std::vector<MetricReport> reports) {
  auto rank = [](const std::string& mode) {
    if (mode == "baseline") return 0;
    if (mode == "indirect") return 1;
    if (mode == "direct") return 2;
    return 3;
  };
  std::stable_sort(reports.begin(), reports.end(),
                   [&](const MetricReport& a, const MetricReport& b) { return rank(a.mode) < rank(b.mode); });

  struct Row {
    std::string label;
    std::vector<double> values;
    std::vector<std::string> text;
    bool higher_is_better;
  };
  std::vector<Row> rows;
  auto add_scalar = [&](const std::string& label, auto get, bool higher, int digits) {
    Row row{label, {}, {}, higher};
    for (const MetricReport& r : reports) {
      const double v = get(r);
      row.values.push_back(v);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.*f", digits, v);
      row.text.push_back(std::isnan(v) ? "n/a" : buf);
    }
    rows.push_back(row);
  };
  auto add_stat = [&](const std::string& label, auto get) {
    Row row{label, {}, {}, true};
    for (const MetricReport& r : reports) {
      const PsnrStat& s = get(r);
      row.values.push_back(s.mean());
      row.text.push_back(format_db(s));
    }
    rows.push_back(row);
  };
  add_scalar("LDS", [](const MetricReport& r) { return r.lds; }, true, 4);
  add_scalar("APD", [](const MetricReport& r) { return r.apd; }, false, 4);
  add_stat("PSNR_b_interp", [](const MetricReport& r) -> const PsnrStat& { return r.psnr_b_interp; });
  add_stat("PSNR_grd_interp", [](const MetricReport& r) -> const PsnrStat& { return r.psnr_grd_interp; });
  add_stat("PSNR_d_extr", [](const MetricReport& r) -> const PsnrStat& { return r.psnr_d_extr; });
  add_stat("PSNR_grd_extr", [](const MetricReport& r) -> const PsnrStat& { return r.psnr_grd_extr; });
  add_stat("PSNR_blurry_input", [](const MetricReport& r) -> const PsnrStat& { return r.psnr_blurry_input; });

  for (Row& row : rows) {
    if (reports.size() < 2) break;
    double best = row.higher_is_better ? -INFINITY : INFINITY;
    for (double v : row.values) {
      if (std::isnan(v)) continue;
      best = row.higher_is_better ? std::max(best, v) : std::min(best, v);
    }
    for (std::size_t i = 0; i < row.values.size(); ++i) {
      if (row.values[i] == best) row.text[i] += " *";
    }
  }

  std::vector<std::string> header{"metric"};
  for (const MetricReport& r : reports) header.push_back(r.mode.empty() ? r.model_tag : r.mode);
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const Row& row : rows) {
    width[0] = std::max(width[0], row.label.size());
    for (std::size_t c = 0; c < row.text.size(); ++c) width[c + 1] = std::max(width[c + 1], row.text[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << (c ? "  " : "");
      if (c == 0) {
        out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
      } else {
        out << std::string(width[c] - cells[c].size(), ' ') << cells[c];
      }
    }
    out << "\n";
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  out << std::string(total - 2, '-') << "\n";
  for (const Row& row : rows) {
    std::vector<std::string> cells{row.label};
    cells.insert(cells.end(), row.text.begin(), row.text.end());
    emit(cells);
  }
  if (!reports.empty()) {
    const MetricReport& r = reports.front();
    char buf[160];
    std::snprintf(buf, sizeof buf, "deblurring: levels (%d, %d) -> %d, alpha = %.4g; psnr max = %s\n", r.deblur_b,
                  r.deblur_c, r.deblur_target, r.deblur_alpha, r.psnr_max.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace latentblur
