#pragma once

// Independent reference computations used as test oracles. These are written
// directly from the formulas and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline double angular(const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& n,
                      double alpha_degrees, bool hinge = true) {
  double t = std::tan(alpha_degrees * std::numbers::pi / 180.0);
  double ap = 0.0, nc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - p[i];
    ap += d * d;
    double c = 0.5 * (a[i] + p[i]);
    nc += (n[i] - c) * (n[i] - c);
  }
  double raw = ap - 4.0 * t * t * nc;
  return hinge ? std::max(0.0, raw) : raw;
}

/// Central differences of f at x with step h.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + h;
    double up = f(x);
    x[i] = keep - h;
    double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(double a, double b) {
  double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

struct Ranked {
  std::string id;
  double distance;
};

/// Exhaustive scan: every distance computed, then a full sort by (distance, id).
inline std::vector<Ranked> brute_force_nearest(const std::vector<std::vector<double>>& rows,
                                               const std::vector<std::string>& ids, const std::vector<double>& query,
                                               std::size_t k) {
  std::vector<std::pair<double, std::string>> all;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) s += (rows[r][i] - query[i]) * (rows[r][i] - query[i]);
    all.emplace_back(s, ids[r]);
  }
  std::sort(all.begin(), all.end());
  std::vector<Ranked> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
  return out;
}

inline std::vector<double> random_vector(std::mt19937_64& g, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(d);
  for (auto& x : v) x = nd(g);
  return v;
}

}  // namespace oracle

namespace testutil {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mmdebias") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
