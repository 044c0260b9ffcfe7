#include "doctest.h"
#include "gradient_check.hpp"
#include "test_support.hpp"

using namespace latentblur;
using testing::GradStats;

TEST_CASE("indirect objective gradients match central differences on the miniature model") {
  Autoencoder<double> model(ModelConfig::miniature());
  model.reset_parameters(31);
  Rng rng(32);
  const TripletBatch<double> batch = testing::smooth_triplets(rng, 5, 16);
  const GradStats s = testing::check_gradients(model, [&] { return loss_indirect(model, batch); });
  MESSAGE("indirect: checked ", s.checked, " parameters, global rel err ", s.global, ", worst ", s.worst_single);
  CHECK(s.global <= 1e-3);
  CHECK(s.worst_single <= 1e-3);
}

TEST_CASE("direct objective gradients match central differences on the miniature model") {
  Autoencoder<double> model(ModelConfig::miniature());
  model.reset_parameters(33);
  Rng rng(34);
  const TripletBatch<double> batch = testing::smooth_triplets(rng, 5, 16);
  const GradStats s = testing::check_gradients(model, [&] { return loss_direct(model, batch); });
  MESSAGE("direct: checked ", s.checked, " parameters, global rel err ", s.global, ", worst ", s.worst_single);
  CHECK(s.global <= 1e-3);
  CHECK(s.worst_single <= 1e-3);
}

TEST_CASE("baseline objective gradients match central differences on the miniature model") {
  Autoencoder<double> model(ModelConfig::miniature());
  model.reset_parameters(35);
  Rng rng(36);
  const Tensor<double> images = testing::smooth_batch(rng, 4, 16);
  const GradStats s = testing::check_gradients(model, [&] { return loss_baseline(model, images); });
  CHECK(s.global <= 1e-3);
  CHECK(s.worst_single <= 1e-3);
}

TEST_CASE("single encoder weight gradient of the indirect loss") {
  Autoencoder<double> model(ModelConfig::miniature());
  model.reset_parameters(37);
  Rng rng(38);
  const TripletBatch<double> batch = testing::smooth_triplets(rng, 4, 16);
  model.zero_grad();
  loss_indirect(model, batch);
  double analytic = 0.0;
  double* weight = nullptr;
  model.visit_parameters([&](const std::string& name, Parameter<double>& p) {
    if (name == "encoder.2.conv.weight") {
      analytic = p.grad(1, 3);
      weight = &p.value(1, 3);
    }
  });
  REQUIRE(weight != nullptr);
  const double h = 1e-7, saved = *weight;
  *weight = saved + h;
  const double up = loss_indirect(model, batch).total;
  *weight = saved - h;
  const double down = loss_indirect(model, batch).total;
  *weight = saved;
  const double numeric = (up - down) / (2 * h);
  CHECK(std::abs(analytic - numeric) <= 1e-3 * std::max(std::abs(numeric), 1e-8));
}
