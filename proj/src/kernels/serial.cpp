#include "angular_term.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::kernels::serial {

void sq_distances(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                  std::span<double> out) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
  const double* r = rows.data();
  const double* q = query.data();
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* row = r + static_cast<std::size_t>(i) * dim;
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      double d = row[k] - q[k];
      s += d * d;
    }
    out[i] = s;
  }
}

void project(std::span<const double> x, std::size_t n, std::size_t in_dim, std::span<const double> w,
             std::size_t out_dim, std::span<double> y) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* xi = x.data() + static_cast<std::size_t>(i) * in_dim;
    double* yi = y.data() + static_cast<std::size_t>(i) * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wo = w.data() + o * in_dim;
      double s = 0.0;
      for (std::size_t k = 0; k < in_dim; ++k) s += wo[k] * xi[k];
      yi[o] = s;
    }
  }
}

void project_grad(std::span<const double> x, std::size_t n, std::size_t in_dim, std::span<const double> gy,
                  std::size_t out_dim, std::span<double> gw) {
  const std::ptrdiff_t outs = static_cast<std::ptrdiff_t>(out_dim);
  for (std::ptrdiff_t o = 0; o < outs; ++o) {
    double* go = gw.data() + static_cast<std::size_t>(o) * in_dim;
    for (std::size_t i = 0; i < n; ++i) {
      double g = gy[i * out_dim + o];
      if (g == 0.0) continue;
      const double* xi = x.data() + i * in_dim;
      for (std::size_t k = 0; k < in_dim; ++k) go[k] += g * xi[k];
    }
  }
}

void project_back(std::span<const double> gy, std::size_t n, std::size_t out_dim, std::span<const double> w,
                  std::size_t in_dim, std::span<double> gx) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* gxi = gx.data() + static_cast<std::size_t>(i) * in_dim;
    for (std::size_t k = 0; k < in_dim; ++k) gxi[k] = 0.0;
    for (std::size_t o = 0; o < out_dim; ++o) {
      double g = gy[static_cast<std::size_t>(i) * out_dim + o];
      if (g == 0.0) continue;
      const double* wo = w.data() + o * in_dim;
      for (std::size_t k = 0; k < in_dim; ++k) gxi[k] += g * wo[k];
    }
  }
}

void angular_loss(const AngularBatch& b) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(b.count);
  const bool grads = !b.grad_anchor.empty();
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::size_t off = static_cast<std::size_t>(i) * b.dim;
    b.loss[i] = detail::angular_one(b.anchor.data() + off, b.positive.data() + off, b.negative.data() + off,
                                    b.dim, b.tan2_alpha, b.hinge, grads ? b.grad_anchor.data() + off : nullptr,
                                    grads ? b.grad_positive.data() + off : nullptr,
                                    grads ? b.grad_negative.data() + off : nullptr);
  }
}

}  // namespace mmdebias::kernels::serial
