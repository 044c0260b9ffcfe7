#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latentblur {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/**
 * A batch of feature maps.
 *
 * Storage is a (channels x batch*height*width) column-major matrix: each
 * column holds the channel vector of one pixel, pixels are ordered
 * sample-major then row-major. One sample therefore occupies a contiguous
 * block of channels*height*width scalars, which is what the latent algebra
 * flattens.
 */
template <typename Scalar>
struct Tensor {
  Index batch = 0;
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(Index n, Index c, Index h, Index w)
      : batch(n), channels(c), height(h), width(w), data(c, n * h * w) {}

  static Tensor zeros(Index n, Index c, Index h, Index w) {
    Tensor t(n, c, h, w);
    t.data.setZero();
    return t;
  }

  Index pixels_per_sample() const { return height * width; }
  Index sample_size() const { return channels * height * width; }

  /// Column-per-sample view, (channels*height*width) x batch.
  Eigen::Map<Matrix<Scalar>> flat() { return {data.data(), sample_size(), batch}; }
  Eigen::Map<const Matrix<Scalar>> flat() const { return {data.data(), sample_size(), batch}; }

  /// Scalar at (sample, channel, row, col).
  Scalar& at(Index n, Index c, Index y, Index x) { return data(c, (n * height + y) * width + x); }
  Scalar at(Index n, Index c, Index y, Index x) const { return data(c, (n * height + y) * width + x); }

  std::string shape_string() const {
    return "(" + std::to_string(batch) + ", " + std::to_string(channels) + ", " +
           std::to_string(height) + ", " + std::to_string(width) + ")";
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.batch = batch;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }
};

/// Builds a batch tensor from flattened per-sample columns.
template <typename Scalar, typename Derived>
Tensor<Scalar> tensor_from_columns(const Eigen::MatrixBase<Derived>& columns, Index channels,
                                   Index height, Index width) {
  if (columns.rows() != channels * height * width) {
    throw std::invalid_argument("tensor_from_columns: expected column length " +
                                std::to_string(channels * height * width) + ", got " +
                                std::to_string(columns.rows()));
  }
  Tensor<Scalar> t(columns.cols(), channels, height, width);
  t.flat() = columns.template cast<Scalar>();
  return t;
}

}  // namespace latentblur
