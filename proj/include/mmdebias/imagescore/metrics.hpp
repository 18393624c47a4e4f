#pragma once

#include <cstddef>
#include <span>

#include <json.hpp>

namespace mmdebias::imagescore {

double rmse(std::span<const double> pred, std::span<const double> truth);
/// 1 - SS_res/SS_tot about the truth mean; UndefinedError for constant truth.
double r2(std::span<const double> pred, std::span<const double> truth);

struct RegressionReport {
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

RegressionReport regression_report(std::span<const double> pred, std::span<const double> truth);
nlohmann::json to_json(const RegressionReport& r);

}  // namespace mmdebias::imagescore
