#pragma once

#include "latentblur/tensor.hpp"

#include <stdexcept>
#include <string>

namespace latentblur {

enum class Provenance { encoded, interpolated, extrapolated };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::encoded: return "encoded";
    case Provenance::interpolated: return "interpolated";
    case Provenance::extrapolated: return "extrapolated";
  }
  return "unknown";
}

/// One flattened encoder feature map.
template <typename Scalar>
struct LatentCode {
  Vector<Scalar> vector;
  Provenance provenance = Provenance::encoded;

  Index size() const { return vector.size(); }
};

class LatentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* op) {
  if (!v.allFinite()) throw LatentError(std::string(op) + ": result contains NaN or Inf");
}

namespace detail {

template <typename A, typename B>
void require_same_length(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": latent lengths differ (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

/**
 * Blend toward the sharper code: alpha * sharp + (1 - alpha) * blurry.
 * alpha = 1 returns `sharp`, alpha = 0 returns `blurry`. Works column-wise on
 * latent batches as well as on single vectors.
 */
template <typename A, typename B>
auto interpolate_latents(const Eigen::MatrixBase<A>& sharp, const Eigen::MatrixBase<B>& blurry,
                         typename A::Scalar alpha) {
  using Scalar = typename A::Scalar;
  if (!(alpha >= Scalar(0) && alpha <= Scalar(1))) {
    throw std::invalid_argument("interpolate: alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  detail::require_same_length(sharp, blurry, "interpolate");
  typename A::PlainObject out = alpha * sharp + (Scalar(1) - alpha) * blurry;
  require_finite(out, "interpolate");
  return out;
}

/**
 * Inverse of interpolate_latents with respect to its sharp endpoint:
 * (1/alpha) * less_blurry - ((1 - alpha)/alpha) * more_blurry, alpha in (0, 1].
 */
template <typename A, typename B>
auto extrapolate_latents(const Eigen::MatrixBase<A>& less_blurry, const Eigen::MatrixBase<B>& more_blurry,
                         typename A::Scalar alpha) {
  using Scalar = typename A::Scalar;
  if (!(alpha > Scalar(0))) {
    throw std::invalid_argument("extrapolate: alpha must be > 0 (division by alpha), got " +
                                std::to_string(alpha));
  }
  if (!(alpha <= Scalar(1))) {
    throw std::invalid_argument("extrapolate: alpha > 1 would move toward more blur; got " +
                                std::to_string(alpha));
  }
  detail::require_same_length(less_blurry, more_blurry, "extrapolate");
  typename A::PlainObject out =
      (Scalar(1) / alpha) * less_blurry - ((Scalar(1) - alpha) / alpha) * more_blurry;
  require_finite(out, "extrapolate");
  return out;
}

template <typename Scalar>
LatentCode<Scalar> interpolate(const LatentCode<Scalar>& sharp, const LatentCode<Scalar>& blurry,
                               Scalar alpha) {
  return {interpolate_latents(sharp.vector, blurry.vector, alpha), Provenance::interpolated};
}

template <typename Scalar>
LatentCode<Scalar> extrapolate(const LatentCode<Scalar>& less_blurry,
                               const LatentCode<Scalar>& more_blurry, Scalar alpha) {
  return {extrapolate_latents(less_blurry.vector, more_blurry.vector, alpha), Provenance::extrapolated};
}

/**
 * Blend weight that places `middle` between `sharp_level` and `blurry_level`
 * in z-level coordinates: (middle - blurry) / (sharp - blurry).
 *
 * Used both ways: interpolate(z_sharp, z_blurry, alpha) targets `middle`,
 * and extrapolate(z_middle, z_blurry, alpha) targets `sharp_level`.
 */
inline double alpha_for_levels(int target, int less_blurry, int more_blurry) {
  if (target == more_blurry) {
    throw std::invalid_argument("alpha_for_levels: target level equals the blurrier source level");
  }
  if (!(target >= less_blurry && less_blurry > more_blurry)) {
    throw std::invalid_argument("alpha_for_levels: need target >= less_blurry > more_blurry, got (" +
                                std::to_string(target) + ", " + std::to_string(less_blurry) + ", " +
                                std::to_string(more_blurry) + ")");
  }
  return static_cast<double>(less_blurry - more_blurry) / static_cast<double>(target - more_blurry);
}

}  // namespace latentblur
