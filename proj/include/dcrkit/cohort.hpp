#pragma once

#include "dcrkit/core.hpp"
#include "dcrkit/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dcrkit {

/// Variable-length multivariate trajectory. Rows are time steps, columns are
/// features. Unobserved cells hold 0 and are flagged false in `observed`.
struct TimeSeries {
  Matrix features;      // L x d
  Vector timestamps;    // L, hours, strictly increasing
  BoolVector static_mask;  // d
  BoolMatrix observed;     // L x d

  Index length() const { return features.rows(); }
  Index width() const { return features.cols(); }
  double last_time() const { return timestamps(timestamps.size() - 1); }

  static TimeSeries fully_observed(Matrix features, Vector timestamps) {
    TimeSeries z;
    z.static_mask = BoolVector::Constant(features.cols(), false);
    z.observed = BoolMatrix::Constant(features.rows(), features.cols(), true);
    z.features = std::move(features);
    z.timestamps = std::move(timestamps);
    return z;
  }

  void validate() const {
    require(features.rows() >= 1, "time series must have at least one step");
    require(timestamps.size() == features.rows(), "timestamps length must equal the number of feature rows");
    require(static_mask.size() == features.cols(), "static_mask length must equal the feature count");
    require(observed.rows() == features.rows() && observed.cols() == features.cols(),
            "missing mask must have the same shape as the feature matrix");
    for (Index l = 1; l < timestamps.size(); ++l) {
      require(timestamps(l) > timestamps(l - 1), "timestamps must be strictly increasing");
    }
    for (Index c = 0; c < features.cols(); ++c) {
      bool seen = false;
      double value = 0.0;
      for (Index l = 0; l < features.rows(); ++l) {
        if (!observed(l, c)) {
          require(features(l, c) == 0.0, "unobserved cells must hold the 0 sentinel");
          continue;
        }
        if (!static_mask(c)) continue;
        if (seen) {
          require(features(l, c) == value, "static column " + std::to_string(c) + " varies over time");
        } else {
          seen = true;
          value = features(l, c);
        }
      }
    }
  }

  /// Steps with timestamp <= t. Returns an empty (L = 0) series when none qualify.
  TimeSeries truncated(double t) const {
    Index keep = 0;
    while (keep < timestamps.size() && timestamps(keep) <= t) ++keep;
    TimeSeries out;
    out.features = features.topRows(keep);
    out.timestamps = timestamps.head(keep);
    out.static_mask = static_mask;
    out.observed = observed.topRows(keep);
    return out;
  }

  bool operator==(const TimeSeries& o) const {
    return features.rows() == o.features.rows() && features.cols() == o.features.cols() &&
           timestamps.size() == o.timestamps.size() && features == o.features && timestamps == o.timestamps &&
           (static_mask == o.static_mask).all() && (observed == o.observed).all();
  }
};

struct EventRecord {
  int event = 0;      // 0 = censored, otherwise 1..k
  double time = 0.0;  // hours

  bool operator==(const EventRecord&) const = default;
};

struct Subject {
  TimeSeries series;
  EventRecord outcome;

  /// Time from the last observed step to the event or censoring.
  double residual() const { return outcome.time - series.last_time(); }

  bool operator==(const Subject&) const = default;
};

struct Cohort {
  std::vector<Subject> subjects;
  int k = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> risk_names;

  std::size_t size() const { return subjects.size(); }
  bool empty() const { return subjects.empty(); }
  Index width() const { return static_cast<Index>(feature_names.size()); }

  void validate() const {
    require(k >= 1, "cohort risk count k must be positive");
    require(static_cast<int>(risk_names.size()) == k, "risk_names must have k entries");
    require(!subjects.empty(), "cohort must contain at least one subject");
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      const auto& s = subjects[i];
      const auto where = " (subject " + std::to_string(i) + ")";
      s.series.validate();
      require(s.series.width() == width(), "feature width differs from cohort header" + where);
      require(s.outcome.event >= 0 && s.outcome.event <= k, "event indicator out of range" + where);
      require(s.outcome.time >= s.series.last_time(), "event time precedes the last timestamp" + where);
    }
  }

  std::vector<int> event_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(k) + 1, 0);
    for (const auto& s : subjects) ++counts[static_cast<std::size_t>(s.outcome.event)];
    return counts;
  }

  Cohort with_subjects(std::vector<Subject> subset) const {
    Cohort c;
    c.subjects = std::move(subset);
    c.k = k;
    c.feature_names = feature_names;
    c.risk_names = risk_names;
    return c;
  }

  Cohort select(const std::vector<std::size_t>& indices) const {
    std::vector<Subject> subset;
    subset.reserve(indices.size());
    for (auto i : indices) subset.push_back(subjects.at(i));
    return with_subjects(std::move(subset));
  }

  bool operator==(const Cohort&) const = default;
};

namespace detail {

/// Type-7 quantile (linear interpolation between order statistics) of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

inline constexpr int kSummaryStatistics = 6;
inline constexpr std::array<const char*, kSummaryStatistics> kSummaryNames = {"min", "max", "mean",
                                                                              "p25", "median", "p75"};

/// Downsamples a per-second stream (rows = seconds, cols = q features) to hourly
/// summary features.
///
/// Seconds are first averaged over consecutive non-overlapping 60-row blocks; a
/// trailing partial minute is dropped. Each block of up to 60 minutes then yields
/// min, max, mean, 25th percentile, median and 75th percentile per feature
/// (columns ordered feature-major), so d = 6q. A trailing partial hour is
/// summarized over the minutes it has. Timestamps are 0, 1, 2, ... hours.
inline TimeSeries ingest_stream(const Matrix& raw) {
  require(raw.cols() >= 1, "ingest: stream must have at least one feature column");
  require(raw.rows() >= 60, "ingest: stream has " + std::to_string(raw.rows()) +
                                " seconds; at least 60 are required");
  const Index q = raw.cols();
  const Index minutes = raw.rows() / 60;
  Matrix per_minute(minutes, q);
  for (Index m = 0; m < minutes; ++m) per_minute.row(m) = raw.middleRows(m * 60, 60).colwise().mean();

  const Index hours = (minutes + 59) / 60;
  Matrix out(hours, q * kSummaryStatistics);
  std::vector<double> block;
  for (Index h = 0; h < hours; ++h) {
    const Index begin = h * 60;
    const Index count = std::min<Index>(60, minutes - begin);
    for (Index f = 0; f < q; ++f) {
      block.assign(per_minute.col(f).data() + begin, per_minute.col(f).data() + begin + count);
      std::sort(block.begin(), block.end());
      double sum = 0.0;
      for (double v : block) sum += v;
      const Index c = f * kSummaryStatistics;
      out(h, c + 0) = block.front();
      out(h, c + 1) = block.back();
      out(h, c + 2) = sum / static_cast<double>(count);
      out(h, c + 3) = detail::quantile_sorted(block, 0.25);
      out(h, c + 4) = detail::quantile_sorted(block, 0.50);
      out(h, c + 5) = detail::quantile_sorted(block, 0.75);
    }
  }
  return TimeSeries::fully_observed(std::move(out), Vector::LinSpaced(hours, 0.0, static_cast<double>(hours - 1)));
}

inline std::vector<std::string> summary_feature_names(const std::vector<std::string>& stream_names) {
  std::vector<std::string> names;
  for (const auto& n : stream_names) {
    for (const char* stat : kSummaryNames) names.push_back(n + "_" + stat);
  }
  return names;
}

/// Keeps only the risks in `keep` (1-based), renumbered contiguously in
/// ascending order. Subjects whose event was dropped become censored at the
/// same time.
inline Cohort relabel_for_ablation(const Cohort& c, const std::set<int>& keep) {
  require(!keep.empty(), "relabel: keep set must be nonempty");
  std::map<int, int> renumber;
  for (int j : keep) {
    require(j >= 1 && j <= c.k, "relabel: risk index " + std::to_string(j) + " outside 1.." + std::to_string(c.k));
    renumber.emplace(j, static_cast<int>(renumber.size()) + 1);
  }
  Cohort out = c;
  out.k = static_cast<int>(keep.size());
  out.risk_names.clear();
  for (int j : keep) out.risk_names.push_back(c.risk_names[static_cast<std::size_t>(j - 1)]);
  for (auto& s : out.subjects) {
    const auto it = renumber.find(s.outcome.event);
    s.outcome.event = it == renumber.end() ? 0 : it->second;
  }
  return out;
}

/// Subjects still at risk at t (event time > t), each restricted to steps with
/// timestamp <= t. May be empty.
inline Cohort truncate_at(const Cohort& c, double t) {
  require(t >= 0.0, "truncate: t must be nonnegative");
  std::vector<Subject> kept;
  for (const auto& s : c.subjects) {
    if (s.outcome.time <= t) continue;
    auto z = s.series.truncated(t);
    if (z.length() == 0) continue;
    kept.push_back({std::move(z), s.outcome});
  }
  return c.with_subjects(std::move(kept));
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Random split preserving the fraction of each event indicator value: each
/// event group contributes round(fraction * group size) subjects to `test`.
inline Split stratified_split(const Cohort& c, double test_fraction, std::uint64_t seed, std::uint64_t stream = 0) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "split fraction must lie in (0, 1)");
  CounterRng rng(seed, 0x5b117000ULL + stream);
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(c.k) + 1);
  for (std::size_t i = 0; i < c.size(); ++i) groups[static_cast<std::size_t>(c.subjects[i].outcome.event)].push_back(i);
  Split split;
  for (auto& g : groups) {
    rng.shuffle(g);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(g.size())));
    split.test.insert(split.test.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), g.begin() + static_cast<std::ptrdiff_t>(n_test), g.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace dcrkit
