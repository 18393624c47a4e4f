#include "mmdebias/textbias/encoder.hpp"

#include <cmath>

#include "mmdebias/common/error.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::textbias {

namespace {

void neighbor_mean(const std::vector<double>& x, std::size_t n, std::size_t h, std::vector<double>& m) {
  m.assign(n * h, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* mi = m.data() + i * h;
    if (i > 0)
      for (std::size_t k = 0; k < h; ++k) mi[k] += 0.5 * x[(i - 1) * h + k];
    if (i + 1 < n)
      for (std::size_t k = 0; k < h; ++k) mi[k] += 0.5 * x[(i + 1) * h + k];
  }
}

}  // namespace

ContextMixEncoder::ContextMixEncoder(std::size_t vocab_size, std::size_t hidden, std::size_t layers)
    : vocab_(vocab_size), hidden_(hidden), embedding_("embedding", vocab_size, hidden) {
  if (hidden == 0) throw ValidationError("hidden size must be positive");
  for (std::size_t l = 0; l < layers; ++l) {
    auto p = "layer" + std::to_string(l) + ".";
    mix_.push_back({nn::Param(p + "self", hidden, hidden), nn::Param(p + "neighbor", hidden, hidden),
                    nn::Param(p + "bias", 1, hidden)});
  }
}

void ContextMixEncoder::init(Rng& rng) {
  embedding_.init_normal(rng, 0.5);
  const double s = 0.5 / std::sqrt(static_cast<double>(hidden_));
  for (auto& l : mix_) {
    l.self.init_normal(rng, s);
    l.neighbor.init_normal(rng, s);
  }
}

// states layout: [x_0, m_0, t_0, x_1, m_1, t_1, ..., x_L]
void ContextMixEncoder::forward(std::span<const int> ids, EncoderCache& cache) const {
  const std::size_t n = ids.size(), h = hidden_;
  cache.tokens = n;
  cache.states.clear();
  std::vector<double> x(n * h);
  for (std::size_t i = 0; i < n; ++i) {
    auto id = static_cast<std::size_t>(ids[i]);
    if (id >= vocab_) throw ValidationError("token id out of range");
    std::copy_n(embedding_.row(id), h, x.data() + i * h);
  }
  std::vector<double> m, z(n * h), zb(n * h);
  for (const auto& layer : mix_) {
    neighbor_mean(x, n, h, m);
    kernels::project(x, n, h, layer.self.value, h, z);
    kernels::project(m, n, h, layer.neighbor.value, h, zb);
    std::vector<double> t(n * h), next(n * h);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < h; ++k) {
        std::size_t idx = i * h + k;
        t[idx] = std::tanh(z[idx] + zb[idx] + layer.bias.value[k]);
        next[idx] = x[idx] + t[idx];
      }
    cache.states.push_back(std::move(x));
    cache.states.push_back(m);
    cache.states.push_back(std::move(t));
    x = std::move(next);
  }
  cache.output = x;
  cache.states.push_back(std::move(x));
}

void ContextMixEncoder::backward(std::span<const int> ids, const EncoderCache& cache,
                                 std::span<const double> grad_output) {
  const std::size_t n = ids.size(), h = hidden_;
  std::vector<double> g(grad_output.begin(), grad_output.end());
  std::vector<double> dz(n * h), dx(n * h), dm(n * h);
  for (std::size_t l = mix_.size(); l-- > 0;) {
    auto& layer = mix_[l];
    const auto& x = cache.states[3 * l];
    const auto& m = cache.states[3 * l + 1];
    const auto& t = cache.states[3 * l + 2];
    for (std::size_t idx = 0; idx < n * h; ++idx) dz[idx] = g[idx] * (1.0 - t[idx] * t[idx]);
    kernels::project_grad(x, n, h, dz, h, layer.self.grad);
    kernels::project_grad(m, n, h, dz, h, layer.neighbor.grad);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < h; ++k) layer.bias.grad[k] += dz[i * h + k];
    kernels::project_back(dz, n, h, layer.self.value, h, dx);
    kernels::project_back(dz, n, h, layer.neighbor.value, h, dm);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < h; ++k) {
        double v = g[i * h + k] + dx[i * h + k];
        if (i > 0) v += 0.5 * dm[(i - 1) * h + k];
        if (i + 1 < n) v += 0.5 * dm[(i + 1) * h + k];
        dx[i * h + k] = v;
      }
    g.swap(dx);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* ge = embedding_.grad_row(static_cast<std::size_t>(ids[i]));
    for (std::size_t k = 0; k < h; ++k) ge[k] += g[i * h + k];
  }
}

std::vector<nn::Param*> ContextMixEncoder::params() {
  std::vector<nn::Param*> out{&embedding_};
  for (auto& l : mix_) {
    out.push_back(&l.self);
    out.push_back(&l.neighbor);
    out.push_back(&l.bias);
  }
  return out;
}

std::unique_ptr<SequenceEncoder> ContextMixEncoder::clone() const {
  return std::make_unique<ContextMixEncoder>(*this);
}

nlohmann::json ContextMixEncoder::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  auto self = const_cast<ContextMixEncoder*>(this)->params();
  for (auto* p : self) params.push_back(nn::to_json(*p));
  return {{"kind", kind()}, {"vocab", vocab_}, {"hidden", hidden_}, {"layers", mix_.size()}, {"params", params}};
}

std::unique_ptr<ContextMixEncoder> ContextMixEncoder::from_json(const nlohmann::json& j) {
  auto enc = std::make_unique<ContextMixEncoder>(j.at("vocab").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
                                                 j.at("layers").get<std::size_t>());
  auto ps = enc->params();
  const auto& arr = j.at("params");
  if (arr.size() != ps.size()) throw ValidationError("encoder checkpoint has wrong parameter count");
  for (std::size_t i = 0; i < ps.size(); ++i) nn::from_json(arr[i], *ps[i]);
  return enc;
}

std::unique_ptr<SequenceEncoder> encoder_from_json(const nlohmann::json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "context-mix") return ContextMixEncoder::from_json(j);
  throw ValidationError("unknown encoder kind '" + kind + "'");
}

}  // namespace mmdebias::textbias
