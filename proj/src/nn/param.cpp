#include "mmdebias/nn/param.hpp"

#include <cmath>

#include "mmdebias/common/error.hpp"

namespace mmdebias::nn {

void Adam::step(std::span<Param* const> params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw StateError("optimizer reused with a different parameter set");
  ++t_;
  if (lr_ == 0.0) return;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      double g = p.grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      p.value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

nlohmann::json to_json(const Param& p) {
  return {{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"value", p.value}};
}

void from_json(const nlohmann::json& j, Param& p) {
  auto rows = j.at("rows").get<std::size_t>();
  auto cols = j.at("cols").get<std::size_t>();
  if (rows != p.rows || cols != p.cols)
    throw ValidationError("parameter " + p.name + " shape mismatch in checkpoint");
  auto v = j.at("value").get<std::vector<double>>();
  if (v.size() != p.size()) throw ValidationError("parameter " + p.name + " size mismatch in checkpoint");
  p.value = std::move(v);
  p.zero_grad();
}

}  // namespace mmdebias::nn
