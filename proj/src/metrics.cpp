#include "latentblur/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace latentblur {

double lds(const Matrix<double>& z) {
  const Index n = z.cols();
  if (n < 3) throw MetricError("lds: need at least 3 latents, got " + std::to_string(n));
  double sum = 0.0;
  for (Index i = 1; i + 1 < n; ++i) {
    const Vector<double> u = z.col(i - 1) - z.col(i);
    const Vector<double> v = z.col(i) - z.col(i + 1);
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0) throw MetricError("lds: latents " + std::to_string(i - 1) + " and " + std::to_string(i) + " coincide");
    if (nv == 0.0) throw MetricError("lds: latents " + std::to_string(i) + " and " + std::to_string(i + 1) + " coincide");
    sum += std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  }
  return sum / static_cast<double>(n - 2);
}

Matrix<double> endpoint_interpolation(const Matrix<double>& z) {
  const Index n = z.cols();
  if (n < 2) throw MetricError("endpoint_interpolation: need at least 2 latents");
  Matrix<double> out(z.rows(), n);
  for (Index i = 0; i < n; ++i) {
    const double alpha = 1.0 - static_cast<double>(i) / static_cast<double>(n - 1);
    out.col(i) = alpha * z.col(0) + (1.0 - alpha) * z.col(n - 1);
  }
  out.col(0) = z.col(0);
  out.col(n - 1) = z.col(n - 1);
  return out;
}

double apd(const Matrix<double>& real, const Matrix<double>& interp) {
  const Index n = real.cols();
  if (n < 2) throw MetricError("apd: need at least 2 latents, got " + std::to_string(n));
  if (interp.cols() != n || interp.rows() != real.rows()) {
    throw MetricError("apd: real and interpolated trajectories differ in shape");
  }
  const double span = (real.col(0) - real.col(n - 1)).norm();
  if (span == 0.0) throw MetricError("apd: trajectory endpoints coincide");
  double sum = 0.0;
  for (Index i = 0; i + 1 < n; ++i) {
    const double d_real = (real.col(i) - real.col(i + 1)).norm();
    const double d_interp = (interp.col(i) - interp.col(i + 1)).norm();
    sum += std::abs(d_real - d_interp);
  }
  return sum / static_cast<double>(n - 1) / span;
}

double apd(const Matrix<double>& real) { return apd(real, endpoint_interpolation(real)); }

const char* to_string(PsnrMax m) { return m == PsnrMax::one ? "one" : "image"; }

PsnrMax parse_psnr_max(const std::string& text) {
  if (text == "one") return PsnrMax::one;
  if (text == "image") return PsnrMax::image;
  throw std::invalid_argument("unknown psnr max '" + text + "' (expected one or image)");
}

double psnr(const Image& reference, const Image& test, double max_value) {
  if (!reference.same_shape(test)) {
    throw MetricError("psnr: shape mismatch (" + std::to_string(reference.channels) + "x" +
                      std::to_string(reference.height) + "x" + std::to_string(reference.width) + " vs " +
                      std::to_string(test.channels) + "x" + std::to_string(test.height) + "x" +
                      std::to_string(test.width) + ")");
  }
  if (!(max_value > 0.0)) throw MetricError("psnr: max value must be positive");
  const double mse = (reference.data.cast<double>() - test.data.cast<double>()).squaredNorm() /
                     static_cast<double>(reference.data.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 20.0 * std::log10(max_value / std::sqrt(mse));
}

double psnr(const Image& reference, const Image& test, PsnrMax max_mode) {
  const double peak = max_mode == PsnrMax::one ? 1.0 : static_cast<double>(reference.data.maxCoeff());
  return psnr(reference, test, peak);
}

void PsnrStat::add(double db) {
  if (std::isinf(db) && db > 0) {
    ++infinite;
  } else {
    sum += db;
    ++finite;
  }
}

double PsnrStat::mean() const { return finite == 0 ? std::nan("") : sum / static_cast<double>(finite); }

Projection2D pca_project_2d(const Matrix<double>& x) {
  const Index n = x.cols();
  if (n < 3) throw MetricError("pca_project_2d: need at least 3 latents, got " + std::to_string(n));
  Projection2D out;
  out.mean = x.rowwise().mean();
  const Matrix<double> centered = x.colwise() - out.mean;
  const Matrix<double> gram = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(gram);
  if (eig.info() != Eigen::Success) throw MetricError("pca_project_2d: eigendecomposition failed");

  const Vector<double> values = eig.eigenvalues().cwiseMax(0.0);  // ascending
  const double total = values.sum();
  if (!(total > 0.0)) throw MetricError("pca_project_2d: latents have zero variance");

  out.points.resize(n, 2);
  out.components = Matrix<double>::Zero(x.rows(), 2);
  for (int k = 0; k < 2; ++k) {
    const Index idx = n - 1 - k;
    const double lambda = values(idx);
    out.explained_ratio[k] = lambda / total;
    Vector<double> u = eig.eigenvectors().col(idx);
    Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0) u = -u;
    const double s = std::sqrt(lambda);
    out.points.col(k) = u * s;
    // Near-null axes carry no direction worth reporting.
    if (lambda > total * 1e-12) out.components.col(k) = centered * u / s;
  }
  return out;
}

Projection2D pca_project_2d(const std::vector<LatentTrajectory>& trajectories) {
  Index cols = 0;
  Index rows = trajectories.empty() ? 0 : trajectories.front().latents.rows();
  for (const auto& t : trajectories) {
    if (t.latents.rows() != rows) throw MetricError("pca_project_2d: trajectories differ in latent length");
    cols += t.latents.cols();
  }
  Matrix<double> pooled(rows, cols);
  Index at = 0;
  for (const auto& t : trajectories) {
    pooled.middleCols(at, t.latents.cols()) = t.latents;
    at += t.latents.cols();
  }
  return pca_project_2d(pooled);
}

}  // namespace latentblur
