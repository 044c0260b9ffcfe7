#pragma once

#include "latentblur/autoencoder.hpp"
#include "latentblur/config.hpp"
#include "latentblur/latent.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace latentblur {

/// Per-term loss values of one objective evaluation.
struct LossBreakdown {
  Regularization mode = Regularization::baseline;
  double rct_a = 0.0;         // baseline: reconstruction of every input image
  double rct_c = 0.0;
  double rct_b_interp = 0.0;  // x_b reconstructed from the interpolated latent
  double latent_l1 = 0.0;     // direct only: ||z_b - z'_b||_1
  double total = 0.0;
  /// Which triplet roles (a, b, c) went through the encoder.
  std::array<bool, 3> encoded{false, false, false};

  /// The mode's formula applied to the components.
  double formula_total() const {
    switch (mode) {
      case Regularization::baseline: return rct_a;
      case Regularization::indirect: return 0.5 * (rct_a + rct_c) + rct_b_interp;
      case Regularization::direct: return 0.5 * (rct_a + rct_c) + rct_b_interp + latent_l1;
    }
    return 0.0;
  }
};

static_assert(!encodes_middle(Regularization::indirect), "indirect objective must not encode x_b");
static_assert(!encodes_middle(Regularization::baseline));
static_assert(encodes_middle(Regularization::direct));

/// L1 distance between two same-shaped arrays, averaged or summed.
template <typename A, typename B>
double l1_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, Reduction reduction) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("l1_distance: shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
  const double sum = (a.template cast<double>() - b.template cast<double>()).cwiseAbs().sum();
  return reduction == Reduction::mean ? sum / static_cast<double>(a.size()) : sum;
}

/// Mean (or summed) absolute pixel difference.
template <typename Scalar>
double reconstruction_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& reconstruction,
                           Reduction reduction = Reduction::mean) {
  if (x.batch != reconstruction.batch || x.channels != reconstruction.channels ||
      x.height != reconstruction.height || x.width != reconstruction.width) {
    throw std::invalid_argument("reconstruction_loss: shape mismatch " + x.shape_string() + " vs " +
                                reconstruction.shape_string());
  }
  return l1_distance(x.data, reconstruction.data, reduction);
}

namespace detail {

/// weight * d/dy L1(y, target).
template <typename Scalar>
Tensor<Scalar> l1_grad(const Tensor<Scalar>& y, const Tensor<Scalar>& target, double weight, Reduction reduction) {
  Tensor<Scalar> g(y.batch, y.channels, y.height, y.width);
  const double scale = reduction == Reduction::mean ? weight / static_cast<double>(y.data.size()) : weight;
  g.data = (y.data - target.data).array().sign() * static_cast<Scalar>(scale);
  return g;
}

template <typename Scalar>
Matrix<Scalar> l1_grad(const Matrix<Scalar>& y, const Matrix<Scalar>& target, double weight, Reduction reduction) {
  const double scale = reduction == Reduction::mean ? weight / static_cast<double>(y.size()) : weight;
  return (y - target).array().sign() * static_cast<Scalar>(scale);
}

}  // namespace detail

/// Images of B triplets, stacked per role.
template <typename Scalar>
struct TripletBatch {
  Tensor<Scalar> sharp;   // x_a
  Tensor<Scalar> middle;  // x_b
  Tensor<Scalar> blurry;  // x_c
  Scalar alpha = Scalar(0.5);
};

/**
 * Triplet objectives.
 *
 * indirect: 1/2 [L(x_a, D(z_a)) + L(x_c, D(z_c))] + L(x_b, D(z'_b)),
 *           z'_b = alpha z_a + (1 - alpha) z_c; x_b is only a target.
 * direct:   indirect + L1(z_b, z'_b) with z_b = E(x_b).
 *
 * With `training` set, batch norm uses batch statistics and parameter
 * gradients are accumulated into the model; otherwise the model is only read.
 */
template <typename Scalar>
LossBreakdown triplet_objective(Autoencoder<Scalar>& model, const TripletBatch<Scalar>& batch,
                                Regularization mode, Reduction reduction, bool training) {
  if (mode == Regularization::baseline) {
    throw std::invalid_argument("triplet_objective: baseline mode trains on single images");
  }
  using AE = Autoencoder<Scalar>;
  LossBreakdown out;
  out.mode = mode;

  typename AE::EncoderCache enc_a, enc_b, enc_c;
  typename AE::DecoderCache dec_a, dec_c, dec_b;

  const Matrix<Scalar> z_a = training ? model.encode_train(batch.sharp, enc_a) : model.encode(batch.sharp);
  const Matrix<Scalar> z_c = training ? model.encode_train(batch.blurry, enc_c) : model.encode(batch.blurry);
  out.encoded[0] = out.encoded[2] = true;
  const Matrix<Scalar> z_b_interp = interpolate_latents(z_a, z_c, batch.alpha);

  Matrix<Scalar> z_b;
  if (encodes_middle(mode)) {
    z_b = training ? model.encode_train(batch.middle, enc_b) : model.encode(batch.middle);
    out.encoded[1] = true;
  }

  const Tensor<Scalar> y_a = training ? model.decode_train(z_a, dec_a) : model.decode(z_a);
  const Tensor<Scalar> y_c = training ? model.decode_train(z_c, dec_c) : model.decode(z_c);
  const Tensor<Scalar> y_b = training ? model.decode_train(z_b_interp, dec_b) : model.decode(z_b_interp);

  out.rct_a = reconstruction_loss(batch.sharp, y_a, reduction);
  out.rct_c = reconstruction_loss(batch.blurry, y_c, reduction);
  out.rct_b_interp = reconstruction_loss(batch.middle, y_b, reduction);
  if (encodes_middle(mode)) out.latent_l1 = l1_distance(z_b, z_b_interp, reduction);
  out.total = out.formula_total();

  if (!training) return out;

  const Scalar alpha = batch.alpha;
  Matrix<Scalar> dz_a = model.decoder_backward(detail::l1_grad(y_a, batch.sharp, 0.5, reduction), dec_a);
  Matrix<Scalar> dz_c = model.decoder_backward(detail::l1_grad(y_c, batch.blurry, 0.5, reduction), dec_c);
  Matrix<Scalar> dz_interp = model.decoder_backward(detail::l1_grad(y_b, batch.middle, 1.0, reduction), dec_b);
  if (encodes_middle(mode)) {
    const Matrix<Scalar> dz_b = detail::l1_grad(z_b, z_b_interp, 1.0, reduction);
    dz_interp -= dz_b;
    model.encoder_backward(dz_b, enc_b);
  }
  dz_a += alpha * dz_interp;
  dz_c += (Scalar(1) - alpha) * dz_interp;
  model.encoder_backward(dz_a, enc_a);
  model.encoder_backward(dz_c, enc_c);
  return out;
}

template <typename Scalar>
LossBreakdown loss_indirect(Autoencoder<Scalar>& model, const TripletBatch<Scalar>& batch,
                            Reduction reduction = Reduction::mean, bool training = true) {
  return triplet_objective(model, batch, Regularization::indirect, reduction, training);
}

template <typename Scalar>
LossBreakdown loss_direct(Autoencoder<Scalar>& model, const TripletBatch<Scalar>& batch,
                          Reduction reduction = Reduction::mean, bool training = true) {
  return triplet_objective(model, batch, Regularization::direct, reduction, training);
}

/// Plain autoencoder objective: L(x, D(E(x))) over a batch of single images.
template <typename Scalar>
LossBreakdown loss_baseline(Autoencoder<Scalar>& model, const Tensor<Scalar>& images,
                            Reduction reduction = Reduction::mean, bool training = true) {
  using AE = Autoencoder<Scalar>;
  LossBreakdown out;
  out.mode = Regularization::baseline;
  typename AE::EncoderCache enc;
  typename AE::DecoderCache dec;
  const Matrix<Scalar> z = training ? model.encode_train(images, enc) : model.encode(images);
  const Tensor<Scalar> y = training ? model.decode_train(z, dec) : model.decode(z);
  out.encoded[0] = true;
  out.rct_a = reconstruction_loss(images, y, reduction);
  out.total = out.formula_total();
  if (training) model.encoder_backward(model.decoder_backward(detail::l1_grad(y, images, 1.0, reduction), dec), enc);
  return out;
}

}  // namespace latentblur
