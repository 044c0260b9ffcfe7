#pragma once

#include "latentblur/layers.hpp"
#include "latentblur/model_config.hpp"
#include "latentblur/random.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentblur {

/// Convolution (or transposed convolution) + batch norm + leaky ReLU.
template <typename Scalar, typename ConvLayer>
class NormalizedBlock {
 public:
  struct Cache {
    typename ConvLayer::Cache conv;
    typename BatchNorm2d<Scalar>::Cache bn;
    Matrix<Scalar> output;
  };

  NormalizedBlock() = default;
  NormalizedBlock(ConvLayer conv, const ModelConfig& cfg)
      : conv(std::move(conv)),
        bn(this->conv.out_channels(), cfg.batchnorm_momentum, cfg.batchnorm_eps),
        slope_(static_cast<Scalar>(cfg.leaky_relu_slope)) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
    Tensor<Scalar> y = bn.forward(conv.forward(x));
    leaky_relu_inplace(y.data, slope_);
    return y;
  }

  Tensor<Scalar> forward_train(const Tensor<Scalar>& x, Cache& cache) {
    Tensor<Scalar> y = bn.forward_train(conv.forward(x, cache.conv), cache.bn);
    leaky_relu_inplace(y.data, slope_);
    cache.output = y.data;
    return y;
  }

  Tensor<Scalar> backward(Tensor<Scalar> dy, const Cache& cache, bool need_input_grad) {
    leaky_relu_backward_inplace(dy.data, cache.output, slope_);
    return conv.backward(bn.backward(dy, cache.bn), cache.conv, need_input_grad);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".conv.weight", conv.weight.value, &conv.weight);
    f(prefix + ".conv.bias", conv.bias.value, &conv.bias);
    f(prefix + ".bn.gamma", bn.gamma.value, &bn.gamma);
    f(prefix + ".bn.beta", bn.beta.value, &bn.beta);
    f(prefix + ".bn.running_mean", bn.running_mean, nullptr);
    f(prefix + ".bn.running_var", bn.running_var, nullptr);
  }

  ConvLayer conv;
  BatchNorm2d<Scalar> bn;

 private:
  Scalar slope_ = Scalar(0.2);
};

template <typename Scalar>
using EncoderBlock = NormalizedBlock<Scalar, Conv2d<Scalar>>;
template <typename Scalar>
using DecoderBlock = NormalizedBlock<Scalar, ConvTranspose2d<Scalar>>;

/**
 * Convolutional autoencoder.
 *
 * Encoder: one stride-2 EncoderBlock per entry of encoder_filters.
 * Decoder: the mirrored stride-2 DecoderBlocks (output padding chosen to
 * restore each encoder size exactly), one stride-1 DecoderBlock, then a
 * 3x3 convolution and a sigmoid.
 *
 * Latents are handled as (latent_dim x batch) matrices, one flattened
 * feature map per column.
 */
template <typename Scalar>
class Autoencoder {
 public:
  struct EncoderCache {
    std::vector<typename EncoderBlock<Scalar>::Cache> stages;
  };
  struct DecoderCache {
    std::vector<typename DecoderBlock<Scalar>::Cache> stages;
    typename Conv2d<Scalar>::Cache head;
    Matrix<Scalar> output;
  };

  explicit Autoencoder(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::vector<Index> sizes = config_.encoder_sizes();
    const Index stages = static_cast<Index>(config_.encoder_filters.size());
    const WindowGeometry down{config_.kernel_size, config_.stride, config_.padding()};
    const WindowGeometry same{config_.kernel_size, 1, config_.padding()};

    Index channels = config_.in_channels;
    for (Index i = 0; i < stages; ++i) {
      const Index out = config_.encoder_filters[i];
      encoder_.emplace_back(Conv2d<Scalar>(channels, out, down), config_);
      channels = out;
    }
    for (Index i = stages - 1; i >= 0; --i) {
      const Index target = sizes[i];
      const Index from = sizes[i + 1];
      const Index base = transposed_output_size(from, down.kernel, down.stride, down.padding, 0);
      const Index out = i > 0 ? config_.encoder_filters[i - 1] : config_.encoder_filters[0];
      decoder_.emplace_back(ConvTranspose2d<Scalar>(channels, out, down, target - base), config_);
      channels = out;
    }
    decoder_.emplace_back(ConvTranspose2d<Scalar>(channels, channels, same, 0), config_);
    head_ = Conv2d<Scalar>(channels, config_.in_channels, same);
    reset_parameters(0);
  }

  const ModelConfig& config() const { return config_; }
  Index latent_dim() const { return config_.latent_dim(); }

  void reset_parameters(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& b : encoder_) b.conv.reset_parameters(rng);
    for (auto& b : decoder_) b.conv.reset_parameters(rng);
    head_.reset_parameters(rng);
  }

  /// Inference-mode encoding of an image batch; batch norm uses running statistics.
  Matrix<Scalar> encode(const Tensor<Scalar>& images) const {
    check_images(images);
    Tensor<Scalar> x = images;
    for (const auto& b : encoder_) x = b.forward(x);
    return x.flat();
  }

  /// Inference-mode decoding of (latent_dim x batch) latents into images in (0,1).
  Tensor<Scalar> decode(const Matrix<Scalar>& latents) const {
    Tensor<Scalar> x = latent_tensor(latents);
    for (const auto& b : decoder_) x = b.forward(x);
    Tensor<Scalar> y = head_.forward(x);
    sigmoid_inplace(y.data);
    return y;
  }

  Matrix<Scalar> encode_train(const Tensor<Scalar>& images, EncoderCache& cache) {
    check_images(images);
    cache.stages.assign(encoder_.size(), {});
    Tensor<Scalar> x = images;
    for (std::size_t i = 0; i < encoder_.size(); ++i) x = encoder_[i].forward_train(x, cache.stages[i]);
    return x.flat();
  }

  Tensor<Scalar> decode_train(const Matrix<Scalar>& latents, DecoderCache& cache) {
    Tensor<Scalar> x = latent_tensor(latents);
    cache.stages.assign(decoder_.size(), {});
    for (std::size_t i = 0; i < decoder_.size(); ++i) x = decoder_[i].forward_train(x, cache.stages[i]);
    Tensor<Scalar> y = head_.forward(x, cache.head);
    sigmoid_inplace(y.data);
    cache.output = y.data;
    return y;
  }

  /// Accumulates encoder gradients from dL/dz.
  void encoder_backward(const Matrix<Scalar>& dlatents, const EncoderCache& cache) {
    Tensor<Scalar> g = latent_tensor(dlatents);
    for (std::size_t i = encoder_.size(); i-- > 0;) g = encoder_[i].backward(std::move(g), cache.stages[i], i > 0);
  }

  /// Accumulates decoder gradients from dL/d(output image); returns dL/dz.
  Matrix<Scalar> decoder_backward(Tensor<Scalar> doutput, const DecoderCache& cache) {
    doutput.data.array() *= cache.output.array() * (Scalar(1) - cache.output.array());
    Tensor<Scalar> g = head_.backward(doutput, cache.head, true);
    for (std::size_t i = decoder_.size(); i-- > 0;) g = decoder_[i].backward(std::move(g), cache.stages[i], true);
    return g.flat();
  }

  void zero_grad() {
    visit([](const std::string&, Matrix<Scalar>&, Parameter<Scalar>* p) {
      if (p) p->zero_grad();
    });
  }

  /**
   * Visits every named tensor: f(name, value, parameter_or_null).
   * Trainable entries pass their Parameter; batch-norm running statistics pass nullptr.
   */
  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].visit("encoder." + std::to_string(i), f);
    for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].visit("decoder." + std::to_string(i), f);
    f(std::string("head.weight"), head_.weight.value, &head_.weight);
    f(std::string("head.bias"), head_.bias.value, &head_.bias);
  }

  template <typename F>
  void visit_parameters(F&& f) {
    visit([&](const std::string& name, Matrix<Scalar>&, Parameter<Scalar>* p) {
      if (p) f(name, *p);
    });
  }

  Index parameter_count() {
    Index n = 0;
    visit_parameters([&](const std::string&, Parameter<Scalar>& p) { n += p.value.size(); });
    return n;
  }

  /// Spatial size produced by each decoder stage, in order (for shape assertions).
  std::vector<Index> decoder_sizes() const {
    std::vector<Index> sizes;
    Index s = config_.latent_spatial();
    for (const auto& b : decoder_) {
      s = b.conv.output_size(s);
      sizes.push_back(s);
    }
    sizes.push_back(head_.output_size(s));
    return sizes;
  }

  const std::vector<EncoderBlock<Scalar>>& encoder_stages() const { return encoder_; }
  const std::vector<DecoderBlock<Scalar>>& decoder_stages() const { return decoder_; }

 private:
  void check_images(const Tensor<Scalar>& images) const {
    if (images.channels != config_.in_channels || images.height != config_.input_size ||
        images.width != config_.input_size) {
      throw std::invalid_argument("encode: expected image shape (N, " +
                                  std::to_string(config_.in_channels) + ", " +
                                  std::to_string(config_.input_size) + ", " +
                                  std::to_string(config_.input_size) + "), got " +
                                  images.shape_string());
    }
  }

  Tensor<Scalar> latent_tensor(const Matrix<Scalar>& latents) const {
    if (latents.rows() != latent_dim()) {
      throw std::invalid_argument("decode: expected latent length " + std::to_string(latent_dim()) +
                                  ", got " + std::to_string(latents.rows()));
    }
    const Index s = config_.latent_spatial();
    return tensor_from_columns<Scalar>(latents, config_.latent_channels(), s, s);
  }

  ModelConfig config_;
  std::vector<EncoderBlock<Scalar>> encoder_;
  std::vector<DecoderBlock<Scalar>> decoder_;
  Conv2d<Scalar> head_;
};

}  // namespace latentblur
