#pragma once

#include "latentblur/image.hpp"
#include "latentblur/tensor.hpp"

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentblur {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Encoded latents of one slide, one column per blur level.
 * Column n = 0 is the sharpest image (z-level 16); blur grows with n.
 */
struct LatentTrajectory {
  std::string slide_id;
  std::vector<int> z_levels;
  Matrix<double> latents;

  Index size() const { return latents.cols(); }
};

/// Mean cosine similarity of consecutive difference vectors (z_{n-1} - z_n, z_n - z_{n+1}) over n = 1..N-2.
double lds(const Matrix<double>& latents);
inline double lds(const LatentTrajectory& t) { return lds(t.latents); }

/// Points at uniform steps on the segment from the first to the last column.
Matrix<double> endpoint_interpolation(const Matrix<double>& latents);

/**
 * Mean over consecutive pairs of |d(z_n, z_{n+1}) - d(z'_n, z'_{n+1})|,
 * normalized by d(z_0, z_{N-1}); d is Euclidean distance.
 */
double apd(const Matrix<double>& real, const Matrix<double>& interp);
/// APD against the endpoint-anchored interpolated trajectory.
double apd(const Matrix<double>& real);
inline double apd(const LatentTrajectory& t) { return apd(t.latents); }

/// Peak value used for PSNR: a fixed 1.0 for normalized images, or the maximum of the reference image.
enum class PsnrMax { one, image };

const char* to_string(PsnrMax m);
PsnrMax parse_psnr_max(const std::string& text);

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 20 log10(max / RMSE(reference, test)); +inf for identical images.
double psnr(const Image& reference, const Image& test, double max_value);
double psnr(const Image& reference, const Image& test, PsnrMax max_mode = PsnrMax::one);

/// Running mean over finite PSNR values; infinite values are only counted.
struct PsnrStat {
  double sum = 0.0;
  std::size_t finite = 0;
  std::size_t infinite = 0;

  void add(double db);
  /// NaN when no finite value was added.
  double mean() const;
  std::size_t count() const { return finite + infinite; }
};

struct Projection2D {
  Matrix<double> points;  // N x 2, input order
  double explained_ratio[2] = {0.0, 0.0};
  Vector<double> mean;
  Matrix<double> components;  // D x 2 unit principal axes
};

/**
 * PCA onto two axes of the pooled columns of `trajectories`.
 * Fitted through the Gram matrix, so cost scales with the point count rather
 * than the latent length. Axis signs are fixed so that the score of largest
 * magnitude on each axis is positive.
 */
Projection2D pca_project_2d(const std::vector<LatentTrajectory>& trajectories);
Projection2D pca_project_2d(const Matrix<double>& columns);

}  // namespace latentblur
