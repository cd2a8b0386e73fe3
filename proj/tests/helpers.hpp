#pragma once

#include "dcrkit/cohort.hpp"
#include "dcrkit/simulator.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dcrkit::testing {

/// Hourly series 0..L-1 with the given rows.
inline TimeSeries hourly(const Matrix& features) {
  return TimeSeries::fully_observed(features, Vector::LinSpaced(features.rows(), 0.0, static_cast<double>(features.rows() - 1)));
}

inline Subject subject(const Matrix& features, int event, double time) { return {hourly(features), {event, time}}; }

/// k = 3 config whose features drive every risk.
inline GenerativeConfig informative_config(std::uint64_t seed, double scale = 1.0) {
  GenerativeConfig g;
  g.k = 3;
  g.d_dynamic = 4;
  g.d_static = 2;
  g.rates = {0.03, 0.03, 0.03};
  g.betas = {{1.5, 0, 0, 0, 0.5, 0}, {-1.0, 1.2, 0, 0, 0, 0}, {0, 0, 1.2, 0, 0, -0.5}};
  for (auto& b : g.betas)
    for (auto& v : b) v *= scale;
  g.censor_rate = 0.002;
  g.seed = seed;
  return g;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dcrkit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dcrkit::testing
