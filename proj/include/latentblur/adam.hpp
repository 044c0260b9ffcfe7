#pragma once

#include "latentblur/autoencoder.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace latentblur {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction, no weight decay; moment state follows the model's parameter order.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options) : options_(options) {}

  void step(Autoencoder<Scalar>& model) {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const Scalar b1(options_.beta1), b2(options_.beta2);
    const Scalar step_size(options_.learning_rate / c1);
    const Scalar inv_sqrt_c2(1.0 / std::sqrt(c2));
    const Scalar eps(options_.eps);
    std::size_t i = 0;
    model.visit_parameters([&](const std::string&, Parameter<Scalar>& p) {
      if (i == m_.size()) {
        m_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
      }
      Matrix<Scalar>& m = m_[i];
      Matrix<Scalar>& v = v_[i];
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
      ++i;
    });
  }

  long steps() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
};

}  // namespace latentblur
