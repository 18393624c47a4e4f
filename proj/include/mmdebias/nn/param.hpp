#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdebias/common/rng.hpp"

namespace mmdebias::nn {

/// A dense row-major weight block with its gradient accumulator.
struct Param {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::size_t r, std::size_t c)
      : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

  std::size_t size() const { return value.size(); }
  double* row(std::size_t r) { return value.data() + r * cols; }
  const double* row(std::size_t r) const { return value.data() + r * cols; }
  double* grad_row(std::size_t r) { return grad.data() + r * cols; }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  void init_normal(Rng& rng, double stddev) {
    for (auto& v : value) v = rng.normal(0.0, stddev);
  }
};

/// Adam with bias correction. A learning rate of zero leaves parameters
/// bit-for-bit unchanged.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<Param* const> params);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

nlohmann::json to_json(const Param& p);
/// Restores values into an existing Param whose shape must match.
void from_json(const nlohmann::json& j, Param& p);

inline double sigmoid(double z) {
  if (z >= 0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace mmdebias::nn
