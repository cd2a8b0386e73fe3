#pragma once

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dcrkit {

/// Discretized horizon values Δ_1 < ... < Δ_m; bin u covers (Δ_{u-1}, Δ_u] with Δ_0 = 0.
struct TimeGrid {
  std::vector<double> deltas;

  Index size() const { return static_cast<Index>(deltas.size()); }
  double horizon() const { return deltas.back(); }

  void validate() const {
    require(!deltas.empty(), "time grid must have at least one value");
    require(deltas.front() > 0.0, "time grid must start above 0");
    for (std::size_t u = 1; u < deltas.size(); ++u) {
      require(deltas[u] > deltas[u - 1], "time grid must be strictly increasing");
    }
  }

  /// Δ_u = u * horizon / m.
  static TimeGrid uniform(Index m, double horizon) {
    require(m >= 1 && horizon > 0.0, "uniform grid needs m >= 1 and a positive horizon");
    TimeGrid g;
    for (Index u = 1; u <= m; ++u) g.deltas.push_back(horizon * static_cast<double>(u) / static_cast<double>(m));
    return g;
  }

  /// Δ_u = u * step, with as many bins as needed to reach `horizon`.
  static TimeGrid stepped(double step, double horizon) {
    require(step > 0.0 && horizon > 0.0, "stepped grid needs a positive step and horizon");
    TimeGrid g;
    const auto m = static_cast<Index>(std::ceil(horizon / step - 1e-12));
    for (Index u = 1; u <= std::max<Index>(m, 1); ++u) g.deltas.push_back(step * static_cast<double>(u));
    return g;
  }

  /// m equal-width bins from 0 to `margin` times the largest residual duration.
  static TimeGrid for_cohort(const Cohort& c, Index m = 30, double margin = 1.05) {
    return uniform(m, max_residual(c) * margin);
  }

  static double max_residual(const Cohort& c) {
    double mx = 0.0;
    for (const auto& s : c.subjects) mx = std::max(mx, s.residual());
    return mx > 0.0 ? mx : 1.0;
  }

  /// 0-based bin index u with Δ_{u-1} < residual <= Δ_u; residual <= 0 maps to bin 0.
  /// Residuals beyond Δ_m are rejected.
  Index bin_of(double residual) const {
    require(residual <= deltas.back(), "residual duration " + std::to_string(residual) +
                                           " exceeds the time grid horizon " + std::to_string(deltas.back()));
    return static_cast<Index>(std::lower_bound(deltas.begin(), deltas.end(), residual) - deltas.begin());
  }

  /// As bin_of, but residuals beyond Δ_m land in the last bin.
  Index clamped_bin_of(double residual) const {
    if (residual > deltas.back()) return size() - 1;
    return bin_of(residual);
  }

  bool operator==(const TimeGrid&) const = default;
};

/// Per-event, per-bin probability masses O_j(Δ_u); k x m.
struct PmfEstimate {
  Matrix values;
};

/// Cumulative incidence F_j(Δ_u) on a grid; k x m, rows nondecreasing.
struct CifEstimate {
  Matrix values;
  std::vector<double> grid;

  int k() const { return static_cast<int>(values.rows()); }

  /// Right-continuous step interpolation: value at the largest grid point <= delta,
  /// 0 below the first grid point. `event` is 1-based.
  double at(int event, double delta) const {
    const auto it = std::upper_bound(grid.begin(), grid.end(), delta);
    if (it == grid.begin()) return 0.0;
    const auto u = static_cast<Index>(it - grid.begin()) - 1;
    return values(event - 1, u);
  }

  /// Total mass for an event, read at the last grid point.
  double at_infinity(int event) const { return values(event - 1, values.cols() - 1); }
};

inline CifEstimate cif_from_pmf(const PmfEstimate& p, const TimeGrid& grid) {
  require(p.values.cols() == grid.size(), "cif_from_pmf: pmf has " + std::to_string(p.values.cols()) +
                                              " bins but the grid has " + std::to_string(grid.size()));
  CifEstimate cif;
  cif.grid = grid.deltas;
  cif.values = p.values;
  for (Index u = 1; u < cif.values.cols(); ++u) cif.values.col(u) += cif.values.col(u - 1);
  return cif;
}

struct LossWeights {
  double alpha = 1.0;  // ranking term
  double beta = 0.1;   // next-step prediction term

  void validate() const { require(alpha > 0.0 && beta > 0.0, "loss weights alpha and beta must be positive"); }
};

}  // namespace dcrkit
