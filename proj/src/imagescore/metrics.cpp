#include "mmdebias/imagescore/metrics.hpp"

#include <cmath>

#include "mmdebias/common/error.hpp"

namespace mmdebias::imagescore {

namespace {
void check_lengths(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
  if (pred.empty()) throw ValidationError("regression metrics need at least one sample");
}
}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double r2(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedError("R2 is undefined when every truth value is identical");
  return 1.0 - ss_res / ss_tot;
}

RegressionReport regression_report(std::span<const double> pred, std::span<const double> truth) {
  return {rmse(pred, truth), r2(pred, truth), pred.size()};
}

nlohmann::json to_json(const RegressionReport& r) { return {{"rmse", r.rmse}, {"r2", r.r2}, {"n", r.n}}; }

}  // namespace mmdebias::imagescore
