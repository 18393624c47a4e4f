#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "mmdebias/common/error.hpp"

namespace mmdebias::embedspace {

enum class Modality { text, image };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view s);

/// A point in the shared cross-modal space.
struct EmbeddingVector {
  std::vector<double> values;
  Modality modality = Modality::image;

  std::size_t dim() const { return values.size(); }
};

struct LossConfig {
  /// Angle bound in degrees, 0 < alpha < 90.
  double alpha_degrees = 45.0;
  /// Weight of the bias term relative to the semantic term.
  double bias_weight = 1.0;
  /// Clamp the bracketed expression at zero.
  bool hinge = true;

  void validate() const {
    if (!(alpha_degrees > 0.0 && alpha_degrees < 90.0)) throw ValidationError("alpha must lie in (0, 90) degrees");
    if (!(bias_weight >= 0.0) || !std::isfinite(bias_weight)) throw ValidationError("bias weight must be >= 0");
  }
  double tan2_alpha() const {
    double t = std::tan(alpha_degrees * std::numbers::pi / 180.0);
    return t * t;
  }
};

/// ||xa - xp||^2 - 4 tan^2(alpha) ||xn - xc||^2 with xc = (xa + xp) / 2,
/// clamped at zero when cfg.hinge is set.
double angular_loss(std::span<const double> xa, std::span<const double> xp, std::span<const double> xn,
                    const LossConfig& cfg);
double angular_loss(const EmbeddingVector& xa, const EmbeddingVector& xp, const EmbeddingVector& xn,
                    const LossConfig& cfg);

/// Same arithmetic with the positive drawn from the anchor's bias
/// neighborhood and the negative from outside it.
double bias_angular_loss(const EmbeddingVector& xa, const EmbeddingVector& x_bias, const EmbeddingVector& xn,
                         const LossConfig& cfg);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> anchor, positive, negative;
};

/// Loss with analytic gradients; all zero when the hinge is active.
LossGradient angular_loss_gradient(std::span<const double> xa, std::span<const double> xp,
                                   std::span<const double> xn, const LossConfig& cfg);

}  // namespace mmdebias::embedspace
