#pragma once

#include <cstddef>

namespace mmdebias::kernels::detail {

// Loss and gradients for one triplet. Shared by the serial and OpenMP drivers
// so that both evaluate identical arithmetic.
inline double angular_one(const double* xa, const double* xp, const double* xn, std::size_t dim,
                          double tan2, bool hinge, double* ga, double* gp, double* gn) {
  double pos = 0.0, neg = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    double d = xa[k] - xp[k];
    double c = xn[k] - 0.5 * (xa[k] + xp[k]);
    pos += d * d;
    neg += c * c;
  }
  double raw = pos - 4.0 * tan2 * neg;
  bool clamped = hinge && raw <= 0.0;
  if (ga) {
    for (std::size_t k = 0; k < dim; ++k) {
      if (clamped) {
        ga[k] = gp[k] = gn[k] = 0.0;
        continue;
      }
      double d = xa[k] - xp[k];
      double c = xn[k] - 0.5 * (xa[k] + xp[k]);
      ga[k] = 2.0 * d + 4.0 * tan2 * c;
      gp[k] = -2.0 * d + 4.0 * tan2 * c;
      gn[k] = -8.0 * tan2 * c;
    }
  }
  return clamped ? 0.0 : raw;
}

}  // namespace mmdebias::kernels::detail
