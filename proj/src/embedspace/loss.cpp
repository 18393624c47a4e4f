#include "mmdebias/embedspace/loss.hpp"

#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::embedspace {

std::string_view modality_name(Modality m) { return m == Modality::text ? "text" : "image"; }

Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::text;
  if (s == "image") return Modality::image;
  throw ValidationError("unknown modality '" + std::string(s) + "'");
}

namespace {

void check_dims(std::size_t a, std::size_t p, std::size_t n) {
  if (a != p || a != n) throw ValidationError("triplet dimensions differ");
  if (a == 0) throw ValidationError("empty embedding");
}

}  // namespace

double angular_loss(std::span<const double> xa, std::span<const double> xp, std::span<const double> xn,
                    const LossConfig& cfg) {
  return angular_loss_gradient(xa, xp, xn, cfg).loss;
}

double angular_loss(const EmbeddingVector& xa, const EmbeddingVector& xp, const EmbeddingVector& xn,
                    const LossConfig& cfg) {
  return angular_loss(xa.values, xp.values, xn.values, cfg);
}

double bias_angular_loss(const EmbeddingVector& xa, const EmbeddingVector& x_bias, const EmbeddingVector& xn,
                         const LossConfig& cfg) {
  return angular_loss(xa.values, x_bias.values, xn.values, cfg);
}

LossGradient angular_loss_gradient(std::span<const double> xa, std::span<const double> xp,
                                   std::span<const double> xn, const LossConfig& cfg) {
  cfg.validate();
  check_dims(xa.size(), xp.size(), xn.size());
  const std::size_t d = xa.size();
  LossGradient g;
  g.anchor.resize(d);
  g.positive.resize(d);
  g.negative.resize(d);
  double loss = 0.0;
  kernels::AngularBatch b{xa, xp, xn, 1, d, cfg.tan2_alpha(), cfg.hinge, {&loss, 1}, g.anchor, g.positive, g.negative};
  kernels::serial::angular_loss(b);
  g.loss = loss;
  return g;
}

}  // namespace mmdebias::embedspace
