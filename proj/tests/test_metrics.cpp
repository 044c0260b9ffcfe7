#include "doctest.h"
#include "test_support.hpp"

#include "latentblur/metrics.hpp"

using namespace latentblur;
using testing::Points;

TEST_CASE("hand-derived LDS examples") {
  CHECK(lds(testing::to_matrix({{0, 0}, {1, 0}, {2, 0}, {3, 0}})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(lds(testing::to_matrix({{0, 0}, {1, 0}, {1, 1}}))) <= 1e-12);
  CHECK(std::abs(lds(testing::to_matrix({{0, 0}, {1, 0}, {2, 1}, {3, 3}})) - 0.82790) <= 1e-4);
}

TEST_CASE("hand-derived APD examples") {
  CHECK(std::abs(apd(testing::to_matrix({{0}, {0.5}, {3}})) - 1.0 / 3.0) <= 1e-4);
  CHECK(apd(testing::to_matrix({{0, 0}, {1, 1}, {2, 2}, {3, 3}})) <= 1e-12);

  const Matrix<double> e = endpoint_interpolation(testing::to_matrix({{0}, {0.5}, {3}}));
  CHECK(e(0, 1) == doctest::Approx(1.5));
  CHECK(e(0, 0) == 0.0);
  CHECK(e(0, 2) == 3.0);
}

TEST_CASE("hand-derived PSNR example") {
  Image ones(1, 4, 4), half(1, 4, 4);
  ones.data.setConstant(1.0f);
  half.data.setConstant(0.5f);
  CHECK(std::abs(psnr(ones, half, 1.0) - 6.0206) <= 1e-4);
  CHECK(std::isinf(psnr(ones, ones, 1.0)));
  CHECK(psnr(ones, ones, 1.0) > 0);
}

TEST_CASE("metrics agree with brute-force oracles on random inputs") {
  Rng rng(51);
  double lds_err = 0.0, apd_err = 0.0, psnr_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(8);
    const std::size_t dim = 1 + rng.below(16);
    const Points z = testing::random_points(rng, n, dim);
    const Matrix<double> m = testing::to_matrix(z);
    lds_err = std::max(lds_err, std::abs(lds(m) - testing::oracle_lds(z)));
    apd_err = std::max(apd_err, std::abs(apd(m) - testing::oracle_apd(z)));

    const Index h = 2 + static_cast<Index>(rng.below(11)), w = 2 + static_cast<Index>(rng.below(11));
    const Image a = testing::random_image(rng, h, w), b = testing::random_image(rng, h, w);
    std::vector<double> va(a.data.data(), a.data.data() + a.data.size());
    std::vector<double> vb(b.data.data(), b.data.data() + b.data.size());
    const double peak = rng.uniform(0.5, 2.0);
    psnr_err = std::max(psnr_err, std::abs(psnr(a, b, peak) - testing::oracle_psnr(va, vb, peak)));
  }
  CHECK(lds_err <= 1e-10);
  CHECK(apd_err <= 1e-10);
  CHECK(psnr_err <= 1e-10);
}

TEST_CASE("LDS and APD invariances") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix<double> m = testing::to_matrix(testing::random_points(rng, 6, 5));
    const double base_lds = lds(m), base_apd = apd(m);
    CHECK(base_lds >= -1.0);
    CHECK(base_lds <= 1.0);
    CHECK(base_apd >= 0.0);

    Vector<double> shift(5);
    for (Index i = 0; i < 5; ++i) shift(i) = rng.uniform(-5, 5);
    const Matrix<double> moved = m.colwise() + shift;
    CHECK(lds(moved) == doctest::Approx(base_lds).epsilon(1e-9));
    CHECK(lds(m * 7.5) == doctest::Approx(base_lds).epsilon(1e-9));
    CHECK(apd(m * 10.0) == doctest::Approx(base_apd).epsilon(1e-9));
  }
}

TEST_CASE("degenerate trajectories are errors") {
  CHECK_THROWS_AS(lds(testing::to_matrix({{0, 0}, {1, 0}, {1, 0}})), MetricError);
  CHECK_THROWS_AS(lds(testing::to_matrix({{0, 0}, {1, 0}})), MetricError);
  CHECK_THROWS_AS(apd(testing::to_matrix({{1, 1}, {3, 0}, {1, 1}})), MetricError);
  CHECK_THROWS_AS(apd(testing::to_matrix({{1, 1}})), MetricError);
  try {
    lds(testing::to_matrix({{0}, {1}, {2}, {2}}));
    FAIL("expected an error");
  } catch (const MetricError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("PSNR symmetry holds for a fixed peak and breaks with the in-image peak") {
  Rng rng(53);
  const Image a = testing::random_image(rng, 8, 8);
  Image b = testing::random_image(rng, 8, 8);
  b.data *= 0.5f;
  CHECK(psnr(a, b, PsnrMax::one) == doctest::Approx(psnr(b, a, PsnrMax::one)).epsilon(1e-12));
  CHECK(psnr(a, b, PsnrMax::image) != doctest::Approx(psnr(b, a, PsnrMax::image)).epsilon(1e-6));
  CHECK(psnr(a, b, PsnrMax::image) == doctest::Approx(psnr(a, b, a.data.maxCoeff())).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(a, testing::random_image(rng, 8, 9), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
  CHECK(parse_psnr_max("image") == PsnrMax::image);
  CHECK_THROWS_AS(parse_psnr_max("two"), std::invalid_argument);
}

TEST_CASE("infinite PSNR values are counted, not averaged") {
  PsnrStat s;
  CHECK(std::isnan(s.mean()));
  s.add(10.0);
  s.add(kInfinitePsnr);
  s.add(20.0);
  CHECK(s.mean() == doctest::Approx(15.0));
  CHECK(s.infinite == 1);
  CHECK(s.count() == 3);
}

TEST_CASE("PCA of collinear latents has no second component") {
  Points z;
  for (int n = 0; n < 6; ++n) z.push_back({1.0 + n, 2.0 + 2.0 * n, -0.5 * n});
  const Projection2D p = pca_project_2d(testing::to_matrix(z));
  CHECK(p.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(p.explained_ratio[1]) <= 1e-9);
  CHECK(p.points.rows() == 6);
}

TEST_CASE("PCA preserves order along a monotone trajectory and centers the points") {
  Rng rng(54);
  Points z;
  for (int n = 0; n < 9; ++n) {
    std::vector<double> p(12);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = 3.0 * n * (1.0 + 0.1 * i) + rng.uniform(-0.05, 0.05);
    z.push_back(p);
  }
  const Projection2D p = pca_project_2d(testing::to_matrix(z));
  bool increasing = true, decreasing = true;
  for (Index i = 1; i < 9; ++i) {
    increasing = increasing && p.points(i, 0) > p.points(i - 1, 0);
    decreasing = decreasing && p.points(i, 0) < p.points(i - 1, 0);
  }
  CHECK((increasing || decreasing));
  CHECK(std::abs(p.points.col(0).mean()) <= 1e-9);
  CHECK(std::abs(p.points.col(1).mean()) <= 1e-9);
  CHECK(p.explained_ratio[0] >= p.explained_ratio[1]);
  CHECK(p.explained_ratio[0] + p.explained_ratio[1] <= 1.0 + 1e-12);
  // Axes are unit vectors.
  CHECK(p.components.col(0).norm() == doctest::Approx(1.0));
  CHECK(std::abs(p.components.col(0).dot(p.components.col(1))) <= 1e-9);
}

TEST_CASE("PCA matches an explicit covariance eigendecomposition") {
  Rng rng(55);
  const Matrix<double> m = testing::to_matrix(testing::random_points(rng, 7, 4));
  const Projection2D p = pca_project_2d(m);
  const Vector<double> mean = m.rowwise().mean();
  const Matrix<double> centered = m.colwise() - mean;
  const Matrix<double> cov = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(cov);
  const double total = es.eigenvalues().sum();
  CHECK(p.explained_ratio[0] == doctest::Approx(es.eigenvalues()(3) / total).epsilon(1e-9));
  CHECK(p.explained_ratio[1] == doctest::Approx(es.eigenvalues()(2) / total).epsilon(1e-9));
  for (int k = 0; k < 2; ++k) {
    const Vector<double> axis = es.eigenvectors().col(3 - k);
    const Vector<double> scores = centered.transpose() * axis;
    CHECK(std::abs(std::abs(scores.dot(p.points.col(k))) - scores.squaredNorm()) <= 1e-9);
  }
  CHECK_THROWS_AS(pca_project_2d(testing::to_matrix({{0, 0}, {1, 1}})), MetricError);
  CHECK_THROWS_AS(pca_project_2d(testing::to_matrix({{1, 1}, {1, 1}, {1, 1}})), MetricError);
}
