#pragma once

#include "latentblur/autoencoder.hpp"
#include "latentblur/dataset.hpp"
#include "latentblur/metrics.hpp"

#include <map>
#include <string>
#include <vector>

namespace latentblur {

/// Center crops of every level of one slide and their inference-mode latents.
struct SlideLatents {
  std::string slide_id;
  std::vector<int> levels;     // ascending z
  Matrix<float> latents;       // one column per entry of `levels`
  std::map<int, Image> crops;  // model-input-sized center crops

  bool has(int level) const { return crops.count(level) != 0; }
  Index column(int level) const;
  Vector<float> latent(int level) const { return latents.col(column(level)); }

  /// Sharpest level first, as the trajectory metrics expect.
  LatentTrajectory trajectory() const;
};

SlideLatents encode_slide(const Autoencoder<float>& model, const ZStackSlide& slide, const ImageStore& store);

/// Decodes one latent vector into an image.
Image decode_latent(const Autoencoder<float>& model, const Vector<float>& z);

struct EvalOptions {
  PsnrMax psnr_max = PsnrMax::one;
  int deblur_target = kFocusLevel;
  int deblur_b = 2;
  int deblur_c = 0;
  int sweep_fixed = 0;
  std::vector<int> sweep_levels{2, 4, 6, 8, 10, 12, 14};
  double sweep_band_db = 0.5;
};

/// Deblurring quality of extrapolating (b, c) to the target level.
struct SweepPoint {
  int level_b = 0;
  int level_c = 0;
  double alpha = 0.0;
  PsnrStat grd_extr;  // vs ground truth x_target
  PsnrStat d_extr;    // vs reconstruction of x_target
  PsnrStat input;     // blurry input x_b vs ground truth x_target
};

struct MetricReport {
  std::string model_tag;
  std::string mode;
  std::string channel;
  std::string split;
  std::string config_hash;
  std::string psnr_max;

  double lds = 0.0;
  double apd = 0.0;
  std::size_t lds_slides = 0;
  std::size_t apd_slides = 0;

  PsnrStat psnr_b_interp;            // D(z'_b) vs D(E(x_b))
  PsnrStat psnr_grd_interp;          // D(z'_b) vs x_b
  PsnrStat psnr_grd_interp_control;  // endpoints taken from a different slide
  PsnrStat psnr_d_extr;              // D(z'_t) vs D(E(x_t))
  PsnrStat psnr_grd_extr;            // D(z'_t) vs x_t
  PsnrStat psnr_blurry_input;        // x_b vs x_t

  int deblur_target = kFocusLevel;
  int deblur_b = 2;
  int deblur_c = 0;
  double deblur_alpha = 0.0;

  std::vector<SweepPoint> sweep;  // ordered by increasing source blur (decreasing b)
  bool sweep_non_increasing = true;

  std::size_t slides = 0;
  std::size_t triplets = 0;
  std::vector<std::string> warnings;
};

MetricReport evaluate_model(const Autoencoder<float>& model, const std::vector<ZStackSlide>& slides,
                            const ImageStore& store, const EvalOptions& options = {});

/// Extrapolation sweep over `options.sweep_levels` with `options.sweep_fixed` as the blurrier source.
std::vector<SweepPoint> deblur_sweep(const Autoencoder<float>& model, const std::vector<SlideLatents>& slides,
                                     const EvalOptions& options);

bool sweep_is_non_increasing(const std::vector<SweepPoint>& sweep, double band_db);

/// Pretty-printed, key-stable JSON (byte-identical for identical reports).
std::string report_json(const MetricReport& report);

/**
 * Aligned text table: one column per report (baseline, indirect, direct
 * order), geometry rows then PSNR rows. The best value per row is starred.
 */
std::string render_table(std::vector<MetricReport> reports);

std::string format_db(const PsnrStat& stat);

}  // namespace latentblur
