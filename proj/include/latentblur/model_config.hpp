#pragma once

#include "latentblur/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace latentblur {

/// Architecture hyperparameters of the convolutional autoencoder.
struct ModelConfig {
  Index input_size = 128;
  Index in_channels = 1;
  std::vector<Index> encoder_filters{64, 128, 256, 512, 1024};
  Index kernel_size = 3;
  Index stride = 2;
  double leaky_relu_slope = 0.2;
  double batchnorm_momentum = 0.1;
  double batchnorm_eps = 1e-5;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  Index padding() const { return kernel_size / 2; }

  /// Spatial sizes from the input through every encoder stage (length stages+1).
  std::vector<Index> encoder_sizes() const;

  Index latent_channels() const { return encoder_filters.back(); }
  Index latent_spatial() const { return encoder_sizes().back(); }
  Index latent_dim() const;

  /// Same architecture on 32x32 inputs with filters 8-16-32-64-256 (1024-dim latents).
  static ModelConfig tiny();

  /// Two filters per stage on 16x16 inputs; used for gradient checks.
  static ModelConfig miniature();

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace latentblur
