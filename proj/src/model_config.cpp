#include "latentblur/model_config.hpp"

#include "latentblur/layers.hpp"

#include <stdexcept>

namespace latentblur {

void ModelConfig::validate() const {
  if (input_size < 1) throw std::invalid_argument("model.input_size must be positive");
  if (in_channels < 1) throw std::invalid_argument("model.in_channels must be positive");
  if (encoder_filters.size() != 5) {
    throw std::invalid_argument("model.encoder_filters must list exactly 5 stages, got " +
                                std::to_string(encoder_filters.size()));
  }
  for (Index f : encoder_filters) {
    if (f < 1) throw std::invalid_argument("model.encoder_filters entries must be positive");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("model.kernel_size must be a positive odd number");
  }
  if (stride < 1) throw std::invalid_argument("model.stride must be positive");
  if (!(leaky_relu_slope > 0.0 && leaky_relu_slope < 1.0)) {
    throw std::invalid_argument("model.leaky_relu_slope must lie in (0, 1)");
  }
  if (!(batchnorm_momentum > 0.0 && batchnorm_momentum <= 1.0)) {
    throw std::invalid_argument("model.batchnorm_momentum must lie in (0, 1]");
  }
  if (!(batchnorm_eps > 0.0)) throw std::invalid_argument("model.batchnorm_eps must be positive");
}

std::vector<Index> ModelConfig::encoder_sizes() const {
  std::vector<Index> sizes{input_size};
  for (std::size_t i = 0; i < encoder_filters.size(); ++i) {
    sizes.push_back(conv_output_size(sizes.back(), kernel_size, stride, padding()));
  }
  return sizes;
}

Index ModelConfig::latent_dim() const {
  const Index s = latent_spatial();
  return latent_channels() * s * s;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.input_size = 32;
  cfg.encoder_filters = {8, 16, 32, 64, 256};
  return cfg;
}

ModelConfig ModelConfig::miniature() {
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.encoder_filters = {2, 2, 2, 2, 2};
  return cfg;
}

}  // namespace latentblur
