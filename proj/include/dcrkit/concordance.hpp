#pragma once

// Score-level ranking metrics. Model-level wrappers live in metrics.hpp.

#include "dcrkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dcrkit {

/// Truncated time-dependent concordance for one event. Acceptable pairs (a, b):
/// event_a == event and t < time_a <= t + delta, and time_b > time_a. A pair is
/// concordant when score_a > score_b; tied scores count one half. Returns
/// nullopt when there is no acceptable pair.
inline std::optional<double> truncated_concordance(std::span<const double> scores, std::span<const double> times,
                                                   std::span<const int> events, int event, double t, double delta) {
  const auto n = scores.size();
  require(times.size() == n && events.size() == n, "concordance: input lengths differ");
  // Sorting candidates b by time lets each a count its comparable partners with
  // a binary search instead of a full scan.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return times[x] < times[y]; });
  std::vector<double> sorted_times(n);
  for (std::size_t i = 0; i < n; ++i) sorted_times[i] = times[order[i]];

  double concordant = 0.0;
  double acceptable = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (events[a] != event || !(times[a] > t) || !(times[a] <= t + delta)) continue;
    const auto first = static_cast<std::size_t>(std::upper_bound(sorted_times.begin(), sorted_times.end(), times[a]) -
                                                sorted_times.begin());
    for (std::size_t r = first; r < n; ++r) {
      const double sb = scores[order[r]];
      acceptable += 1.0;
      if (scores[a] > sb) {
        concordant += 1.0;
      } else if (scores[a] == sb) {
        concordant += 0.5;
      }
    }
  }
  if (acceptable == 0.0) return std::nullopt;
  return concordant / acceptable;
}

/// Mann-Whitney AUROC: probability that a random positive scores above a
/// random negative, ties counting one half. nullopt unless both classes occur.
inline std::optional<double> rank_auroc(std::span<const double> scores, std::span<const int> positive) {
  const auto n = scores.size();
  require(positive.size() == n, "auroc: input lengths differ");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });
  // Midranks over tie groups.
  double rank_sum = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t r = i; r < j; ++r) {
      if (positive[order[r]] != 0) {
        rank_sum += midrank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

/// Threshold sweep from the highest score down; one point per distinct score,
/// starting at (0, 0) and ending at (1, 1).
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> positive) {
  const auto n = scores.size();
  require(positive.size() == n, "roc: input lengths differ");
  double n_pos = 0.0;
  for (int p : positive) n_pos += p != 0 ? 1.0 : 0.0;
  const double n_neg = static_cast<double>(n) - n_pos;
  require(n_pos > 0.0 && n_neg > 0.0, "roc: both classes must be present");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  std::vector<RocPoint> points{{0.0, 0.0}};
  double tp = 0.0;
  double fp = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (positive[order[j]] != 0) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++j;
    }
    points.push_back({fp / n_neg, tp / n_pos});
    i = j;
  }
  return points;
}

inline double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace dcrkit
