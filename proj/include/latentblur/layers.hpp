#pragma once

#include "latentblur/random.hpp"
#include "latentblur/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latentblur {

/// Spatial size after a strided convolution.
constexpr Index conv_output_size(Index in, Index kernel, Index stride, Index padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

/// Spatial size after a transposed convolution.
constexpr Index transposed_output_size(Index in, Index kernel, Index stride, Index padding,
                                       Index output_padding) {
  return (in - 1) * stride - 2 * padding + kernel + output_padding;
}

/// Trainable matrix with an accumulated gradient of the same shape.
template <typename Scalar>
struct Parameter {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(Index rows, Index cols) : value(rows, cols), grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

/// Sliding-window geometry shared by convolution and transposed convolution.
struct WindowGeometry {
  Index kernel = 3;
  Index stride = 1;
  Index padding = 0;
};

/**
 * Gathers k*k receptive fields into columns.
 *
 * `input` is the dense side (height x width), the result has one column per
 * window position of the (out_h x out_w) grid. Row index is
 * (ky*k + kx)*channels + c so every tap copies one contiguous channel vector.
 */
template <typename Scalar>
Matrix<Scalar> im2col(const Tensor<Scalar>& input, const WindowGeometry& g, Index out_h,
                      Index out_w) {
  const Index c = input.channels;
  const Index k = g.kernel;
  Matrix<Scalar> cols(k * k * c, input.batch * out_h * out_w);
  const Scalar* src = input.data.data();
  Scalar* dst = cols.data();
  for (Index n = 0; n < input.batch; ++n) {
    for (Index oy = 0; oy < out_h; ++oy) {
      for (Index ox = 0; ox < out_w; ++ox) {
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * g.stride - g.padding + ky;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (iy < 0 || iy >= input.height || ix < 0 || ix >= input.width) {
              std::fill(dst, dst + c, Scalar(0));
            } else {
              const Scalar* p = src + ((n * input.height + iy) * input.width + ix) * c;
              std::copy(p, p + c, dst);
            }
            dst += c;
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds columns back onto a (batch, channels, height, width) grid.
template <typename Scalar>
Tensor<Scalar> col2im(const Matrix<Scalar>& cols, Index batch, Index channels, Index height,
                      Index width, const WindowGeometry& g, Index out_h, Index out_w) {
  Tensor<Scalar> out = Tensor<Scalar>::zeros(batch, channels, height, width);
  const Index k = g.kernel;
  const Scalar* src = cols.data();
  Scalar* dst_base = out.data.data();
  for (Index n = 0; n < batch; ++n) {
    for (Index oy = 0; oy < out_h; ++oy) {
      for (Index ox = 0; ox < out_w; ++ox) {
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * g.stride - g.padding + ky;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (iy >= 0 && iy < height && ix >= 0 && ix < width) {
              Scalar* d = dst_base + ((n * height + iy) * width + ix) * channels;
              for (Index ch = 0; ch < channels; ++ch) d[ch] += src[ch];
            }
            src += channels;
          }
        }
      }
    }
  }
  return out;
}

namespace detail {

template <typename Scalar>
void uniform_init(Matrix<Scalar>& m, double bound, Rng& rng) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
}

}  // namespace detail

/**
 * 2D convolution, square kernel, zero padding.
 *
 * weight is (out_channels x k*k*in_channels) in im2col row order.
 */
template <typename Scalar>
class Conv2d {
 public:
  struct Cache {
    Matrix<Scalar> columns;
    Index batch = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  };

  Conv2d() = default;
  Conv2d(Index in_channels, Index out_channels, WindowGeometry geometry)
      : in_channels_(in_channels),
        out_channels_(out_channels),
        geometry_(geometry),
        weight(out_channels, geometry.kernel * geometry.kernel * in_channels),
        bias(out_channels, 1) {}

  void reset_parameters(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(weight.value.cols()));
    detail::uniform_init(weight.value, bound, rng);
    detail::uniform_init(bias.value, bound, rng);
  }

  Index output_size(Index in) const {
    return conv_output_size(in, geometry_.kernel, geometry_.stride, geometry_.padding);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
    Cache cache;
    return forward(x, cache);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache& cache) const {
    check_input(x);
    cache.batch = x.batch;
    cache.in_h = x.height;
    cache.in_w = x.width;
    cache.out_h = output_size(x.height);
    cache.out_w = output_size(x.width);
    cache.columns = im2col(x, geometry_, cache.out_h, cache.out_w);
    Tensor<Scalar> y(x.batch, out_channels_, cache.out_h, cache.out_w);
    y.data.noalias() = weight.value * cache.columns;
    y.data.colwise() += bias.value.col(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx, or an empty tensor when not requested.
  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Cache& cache, bool need_input_grad) {
    weight.grad.noalias() += dy.data * cache.columns.transpose();
    bias.grad.col(0) += dy.data.rowwise().sum();
    if (!need_input_grad) return {};
    Matrix<Scalar> dcols = weight.value.transpose() * dy.data;
    return col2im(dcols, cache.batch, in_channels_, cache.in_h, cache.in_w, geometry_, cache.out_h,
                  cache.out_w);
  }

  Index in_channels() const { return in_channels_; }
  Index out_channels() const { return out_channels_; }
  const WindowGeometry& geometry() const { return geometry_; }

 private:
  void check_input(const Tensor<Scalar>& x) const {
    if (x.channels != in_channels_) {
      throw std::invalid_argument("Conv2d: expected " + std::to_string(in_channels_) +
                                  " input channels, got " + std::to_string(x.channels));
    }
  }

  Index in_channels_ = 0;
  Index out_channels_ = 0;
  WindowGeometry geometry_;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

/**
 * Transposed 2D convolution (the adjoint of Conv2d's data path).
 *
 * weight is (k*k*out_channels x in_channels): forward spreads every input
 * pixel over a k*k window of the output grid via col2im.
 */
template <typename Scalar>
class ConvTranspose2d {
 public:
  struct Cache {
    Tensor<Scalar> input;
  };

  ConvTranspose2d() = default;
  ConvTranspose2d(Index in_channels, Index out_channels, WindowGeometry geometry,
                  Index output_padding)
      : in_channels_(in_channels),
        out_channels_(out_channels),
        geometry_(geometry),
        output_padding_(output_padding),
        weight(geometry.kernel * geometry.kernel * out_channels, in_channels),
        bias(out_channels, 1) {
    if (output_padding < 0 || (output_padding >= geometry.stride && output_padding > 0)) {
      throw std::invalid_argument("ConvTranspose2d: output_padding must be in [0, stride)");
    }
  }

  void reset_parameters(Rng& rng) {
    // Same fan-in convention as the reference frameworks: out_channels * k * k.
    const double bound = 1.0 / std::sqrt(static_cast<double>(weight.value.rows()));
    detail::uniform_init(weight.value, bound, rng);
    detail::uniform_init(bias.value, bound, rng);
  }

  Index output_size(Index in) const {
    return transposed_output_size(in, geometry_.kernel, geometry_.stride, geometry_.padding,
                                  output_padding_);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
    check_input(x);
    const Index oh = output_size(x.height);
    const Index ow = output_size(x.width);
    Matrix<Scalar> cols = weight.value * x.data;
    Tensor<Scalar> y = col2im(cols, x.batch, out_channels_, oh, ow, geometry_, x.height, x.width);
    y.data.colwise() += bias.value.col(0);
    return y;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache& cache) const {
    cache.input = x;
    return forward(x);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Cache& cache, bool need_input_grad) {
    const Tensor<Scalar>& x = cache.input;
    Matrix<Scalar> dcols = im2col(dy, geometry_, x.height, x.width);
    weight.grad.noalias() += dcols * x.data.transpose();
    bias.grad.col(0) += dy.data.rowwise().sum();
    if (!need_input_grad) return {};
    Tensor<Scalar> dx(x.batch, in_channels_, x.height, x.width);
    dx.data.noalias() = weight.value.transpose() * dcols;
    return dx;
  }

  Index in_channels() const { return in_channels_; }
  Index out_channels() const { return out_channels_; }
  Index output_padding() const { return output_padding_; }

 private:
  void check_input(const Tensor<Scalar>& x) const {
    if (x.channels != in_channels_) {
      throw std::invalid_argument("ConvTranspose2d: expected " + std::to_string(in_channels_) +
                                  " input channels, got " + std::to_string(x.channels));
    }
  }

  Index in_channels_ = 0;
  Index out_channels_ = 0;
  WindowGeometry geometry_;
  Index output_padding_ = 0;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

/**
 * Per-channel batch normalization over (batch, height, width).
 *
 * Training mode normalizes with batch statistics and updates the running
 * estimates (unbiased variance, exponential momentum); inference mode uses
 * the running estimates only, so samples are processed independently.
 */
template <typename Scalar>
class BatchNorm2d {
 public:
  struct Cache {
    Matrix<Scalar> normalized;
    Vector<Scalar> inv_std;
  };

  BatchNorm2d() = default;
  BatchNorm2d(Index channels, double momentum, double eps)
      : momentum_(momentum),
        eps_(eps),
        gamma(channels, 1),
        beta(channels, 1),
        running_mean(Matrix<Scalar>::Zero(channels, 1)),
        running_var(Matrix<Scalar>::Ones(channels, 1)) {
    gamma.value.setOnes();
    beta.value.setZero();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
    Tensor<Scalar> y = x;
    const Vector<Scalar> scale =
        gamma.value.col(0).array() / (running_var.col(0).array() + Scalar(eps_)).sqrt();
    const Vector<Scalar> shift = beta.value.col(0).array() - running_mean.col(0).array() * scale.array();
    y.data = (y.data.array().colwise() * scale.array()).colwise() + shift.array();
    return y;
  }

  Tensor<Scalar> forward_train(const Tensor<Scalar>& x, Cache& cache) {
    const Index m = x.data.cols();
    const Vector<Scalar> mean = x.data.rowwise().mean();
    Matrix<Scalar> centered = x.data.colwise() - mean;
    const Vector<Scalar> var = centered.array().square().rowwise().sum() / Scalar(m);
    cache.inv_std = (var.array() + Scalar(eps_)).rsqrt();
    cache.normalized = centered.array().colwise() * cache.inv_std.array();

    const Scalar mom(momentum_);
    running_mean.col(0) = (Scalar(1) - mom) * running_mean.col(0) + mom * mean;
    if (m > 1) {
      running_var.col(0) =
          (Scalar(1) - mom) * running_var.col(0) + mom * var * (Scalar(m) / Scalar(m - 1));
    }

    Tensor<Scalar> y(x.batch, x.channels, x.height, x.width);
    y.data = (cache.normalized.array().colwise() * gamma.value.col(0).array()).colwise() +
             beta.value.col(0).array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Cache& cache) {
    const Scalar m = Scalar(dy.data.cols());
    gamma.grad.col(0) += (dy.data.array() * cache.normalized.array()).rowwise().sum().matrix();
    beta.grad.col(0) += dy.data.rowwise().sum();

    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dnorm =
        dy.data.array().colwise() * gamma.value.col(0).array();
    const Vector<Scalar> sum_dnorm = dnorm.rowwise().sum().matrix();
    const Vector<Scalar> sum_dnorm_norm = (dnorm * cache.normalized.array()).rowwise().sum().matrix();

    Tensor<Scalar> dx(dy.batch, dy.channels, dy.height, dy.width);
    dx.data = ((dnorm * m).colwise() - sum_dnorm.array() -
               cache.normalized.array().colwise() * sum_dnorm_norm.array())
                  .colwise() *
              (cache.inv_std.array() / m);
    return dx;
  }

  double momentum() const { return momentum_; }
  double eps() const { return eps_; }

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;

 public:
  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Matrix<Scalar> running_mean;
  Matrix<Scalar> running_var;
};

template <typename Scalar>
void leaky_relu_inplace(Matrix<Scalar>& m, Scalar slope) {
  m = m.array().max(m.array() * slope);
}

/// Backward of leaky ReLU given the activation output (sign-preserving, slope > 0).
template <typename Scalar>
void leaky_relu_backward_inplace(Matrix<Scalar>& grad, const Matrix<Scalar>& output, Scalar slope) {
  grad = (output.array() > Scalar(0)).select(grad.array(), grad.array() * slope);
}

template <typename Scalar>
void sigmoid_inplace(Matrix<Scalar>& m) {
  m = (Scalar(1) + (-m.array()).exp()).inverse();
}

}  // namespace latentblur
