#pragma once

// Data-parallel inner loops used by training and retrieval. Every kernel has a
// serial reference in kernels::serial and an OpenMP version in kernels::omp
// with the same signature. Each output element is computed by exactly one
// thread in a fixed order, so the two agree bit-for-bit on distances and
// projections and runs are reproducible regardless of thread count.
//
// Layouts are row-major: a batch of n vectors of dimension d is a span of n*d.

#include <cstddef>
#include <span>

namespace mmdebias::kernels {

/// Inputs and outputs of a batched angular-loss evaluation. Gradient spans may
/// be empty when only losses are wanted.
struct AngularBatch {
  std::span<const double> anchor;
  std::span<const double> positive;
  std::span<const double> negative;
  std::size_t count = 0;
  std::size_t dim = 0;
  double tan2_alpha = 1.0;
  bool hinge = true;

  std::span<double> loss;           // count
  std::span<double> grad_anchor;    // count*dim, overwritten
  std::span<double> grad_positive;  // count*dim, overwritten
  std::span<double> grad_negative;  // count*dim, overwritten
};

#define MMDEBIAS_KERNEL_DECLS                                                                    \
  /* out[i] = ||rows[i] - query||^2 */                                                           \
  void sq_distances(std::span<const double> rows, std::size_t dim, std::span<const double> query, \
                    std::span<double> out);                                                      \
  /* y[n x out] = x[n x in] * w^T, w is out x in */                                              \
  void project(std::span<const double> x, std::size_t n, std::size_t in_dim,                     \
               std::span<const double> w, std::size_t out_dim, std::span<double> y);             \
  /* gw[out x in] += gy^T * x */                                                                 \
  void project_grad(std::span<const double> x, std::size_t n, std::size_t in_dim,                \
                    std::span<const double> gy, std::size_t out_dim, std::span<double> gw);      \
  /* gx[n x in] = gy * w */                                                                      \
  void project_back(std::span<const double> gy, std::size_t n, std::size_t out_dim,              \
                    std::span<const double> w, std::size_t in_dim, std::span<double> gx);        \
  void angular_loss(const AngularBatch& batch);

namespace serial {
MMDEBIAS_KERNEL_DECLS
}

namespace omp {
MMDEBIAS_KERNEL_DECLS
}

#undef MMDEBIAS_KERNEL_DECLS

/// Number of OpenMP threads the parallel kernels will use.
int max_threads();

using omp::angular_loss;
using omp::project;
using omp::project_back;
using omp::project_grad;
using omp::sq_distances;

}  // namespace mmdebias::kernels
