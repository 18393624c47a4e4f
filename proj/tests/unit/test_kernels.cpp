#include <doctest.h>

#include <random>

#include "mmdebias/kernels/kernels.hpp"
#include "oracles.hpp"

using namespace mmdebias;

namespace {
std::vector<double> rand_vec(std::mt19937_64& g, std::size_t n) { return oracle::random_vector(g, n); }
}  // namespace

TEST_CASE("parallel distances and projections equal the serial reference exactly") {
  std::mt19937_64 g(3);
  for (std::size_t n : {1u, 7u, 300u})
    for (std::size_t d : {1u, 5u, 64u}) {
      auto rows = rand_vec(g, n * d), q = rand_vec(g, d);
      std::vector<double> a(n), b(n);
      kernels::serial::sq_distances(rows, d, q, a);
      kernels::omp::sq_distances(rows, d, q, b);
      CHECK(a == b);

      std::size_t out = 9;
      auto w = rand_vec(g, out * d);
      std::vector<double> ya(n * out), yb(n * out);
      kernels::serial::project(rows, n, d, w, out, ya);
      kernels::omp::project(rows, n, d, w, out, yb);
      CHECK(ya == yb);

      auto gy = rand_vec(g, n * out);
      std::vector<double> gwa(out * d, 0.5), gwb(out * d, 0.5);
      kernels::serial::project_grad(rows, n, d, gy, out, gwa);
      kernels::omp::project_grad(rows, n, d, gy, out, gwb);
      CHECK(gwa == gwb);

      std::vector<double> gxa(n * d), gxb(n * d);
      kernels::serial::project_back(gy, n, out, w, d, gxa);
      kernels::omp::project_back(gy, n, out, w, d, gxb);
      CHECK(gxa == gxb);
    }
}

TEST_CASE("project matches a direct matrix product") {
  std::vector<double> x = {1, 2, 3, 4, 5, 6};  // 2 x 3
  std::vector<double> w = {1, 0, -1, 0.5, 0.5, 0.5};  // 2 x 3
  std::vector<double> y(4);
  kernels::project(x, 2, 3, w, 2, y);
  CHECK(y == std::vector<double>{-2, 3, -2, 7.5});
  std::vector<double> gw(6, 0.0);
  std::vector<double> gy = {1, 0, 0, 1};
  kernels::project_grad(x, 2, 3, gy, 2, gw);
  CHECK(gw == std::vector<double>{1, 2, 3, 4, 5, 6});
  std::vector<double> gx(6);
  kernels::project_back(gy, 2, 2, w, 3, gx);
  CHECK(gx == std::vector<double>{1, 0, -1, 0.5, 0.5, 0.5});
}

TEST_CASE("batched angular loss agrees between serial and parallel") {
  std::mt19937_64 g(5);
  const std::size_t c = 257, d = 17;
  auto a = rand_vec(g, c * d), p = rand_vec(g, c * d), n = rand_vec(g, c * d);
  std::vector<double> la(c), lb(c), ga(c * d), gb(c * d), pa(c * d), pb(c * d), na(c * d), nb(c * d);
  kernels::serial::angular_loss({a, p, n, c, d, 1.0, true, la, ga, pa, na});
  kernels::omp::angular_loss({a, p, n, c, d, 1.0, true, lb, gb, pb, nb});
  CHECK(la == lb);
  CHECK(ga == gb);
  CHECK(pa == pb);
  CHECK(na == nb);
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<double> va(a.begin() + i * d, a.begin() + (i + 1) * d), vp(p.begin() + i * d, p.begin() + (i + 1) * d),
        vn(n.begin() + i * d, n.begin() + (i + 1) * d);
    CHECK(la[i] == doctest::Approx(oracle::angular(va, vp, vn, 45.0)).epsilon(1e-12));
  }
}

TEST_CASE("loss-only batches accept empty gradient spans") {
  std::vector<double> a = {1, 0}, p = {0, 1}, n = {0.5, 0.5};
  std::vector<double> l(1);
  kernels::angular_loss({a, p, n, 1, 2, 1.0, true, l, {}, {}, {}});
  CHECK(l[0] == doctest::Approx(2.0));
}
