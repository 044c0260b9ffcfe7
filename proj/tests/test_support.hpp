#pragma once

// Independent reference implementations and fixtures shared by the test suites.
// The oracles deliberately use plain std::vector loops instead of Eigen.

#include "latentblur/image.hpp"
#include "latentblur/random.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace testing {

using Points = std::vector<std::vector<double>>;

inline double oracle_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double oracle_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double oracle_lds(const Points& z) {
  double total = 0.0;
  for (std::size_t n = 1; n + 1 < z.size(); ++n) {
    std::vector<double> u(z[n].size()), v(z[n].size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = z[n - 1][i] - z[n][i];
      v[i] = z[n][i] - z[n + 1][i];
    }
    total += oracle_dot(u, v) / (std::sqrt(oracle_dot(u, u)) * std::sqrt(oracle_dot(v, v)));
  }
  return total / static_cast<double>(z.size() - 2);
}

inline double oracle_apd(const Points& z) {
  const std::size_t n = z.size();
  Points interp(n, std::vector<double>(z[0].size()));
  for (std::size_t k = 0; k < n; ++k) {
    const double alpha = 1.0 - static_cast<double>(k) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < z[0].size(); ++i) interp[k][i] = alpha * z[0][i] + (1.0 - alpha) * z[n - 1][i];
  }
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    total += std::abs(oracle_dist(z[k], z[k + 1]) - oracle_dist(interp[k], interp[k + 1]));
  }
  return total / static_cast<double>(n - 1) / oracle_dist(z[0], z[n - 1]);
}

inline double oracle_psnr(const std::vector<double>& ref, const std::vector<double>& test, double peak) {
  double se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) se += (ref[i] - test[i]) * (ref[i] - test[i]);
  const double rmse = std::sqrt(se / static_cast<double>(ref.size()));
  return 20.0 * std::log10(peak / rmse);
}

inline latentblur::Matrix<double> to_matrix(const Points& z) {
  latentblur::Matrix<double> m(static_cast<latentblur::Index>(z[0].size()), static_cast<latentblur::Index>(z.size()));
  for (std::size_t j = 0; j < z.size(); ++j)
    for (std::size_t i = 0; i < z[j].size(); ++i) m(static_cast<latentblur::Index>(i), static_cast<latentblur::Index>(j)) = z[j][i];
  return m;
}

inline Points random_points(latentblur::Rng& rng, std::size_t n, std::size_t dim) {
  Points z(n, std::vector<double>(dim));
  for (auto& p : z)
    for (double& v : p) v = rng.uniform(-1.0, 1.0);
  return z;
}

inline latentblur::Image random_image(latentblur::Rng& rng, latentblur::Index h, latentblur::Index w,
                                      latentblur::Index c = 1) {
  latentblur::Image img(c, h, w);
  for (latentblur::Index i = 0; i < img.data.size(); ++i) img.data.data()[i] = static_cast<float>(rng.uniform());
  return img;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("latentblur_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
