#include "dcrkit/metrics.hpp"
#include "dcrkit/simulator.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dcrkit;

namespace {

/// Direct pair enumeration of the truncated c-index.
std::optional<double> brute_c_index(const std::vector<double>& s, const std::vector<double>& y,
                                    const std::vector<int>& e, int event, double t, double delta) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (e[a] == event && y[a] > t && y[a] <= t + delta && y[b] > y[a]) {
        den += 1.0;
        num += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
    }
  }
  if (den == 0.0) return std::nullopt;
  return num / den;
}

double brute_auroc(const std::vector<double>& s, const std::vector<int>& pos) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (pos[a] == 1 && pos[b] == 0) {
        den += 1.0;
        num += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
    }
  }
  return num / den;
}

}  // namespace

TEST(CIndex, SingleConcordantPair) {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<double> y{16, 56};
  const std::vector<int> e{1, 0};
  EXPECT_EQ(truncated_concordance(s, y, e, 1, 6.0, 24.0), 1.0);
}

TEST(CIndex, AllTiedScoresGiveOneHalf) {
  const std::vector<double> s(6, 0.3);
  const std::vector<double> y{7, 9, 12, 20, 30, 40};
  const std::vector<int> e{1, 2, 1, 0, 1, 1};
  EXPECT_EQ(truncated_concordance(s, y, e, 1, 6.0, 24.0), 0.5);
}

TEST(CIndex, NoAcceptablePairIsUndefined) {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<double> y{60, 56};
  const std::vector<int> e{1, 0};
  EXPECT_FALSE(truncated_concordance(s, y, e, 1, 6.0, 24.0).has_value());
  EXPECT_FALSE(truncated_concordance(s, y, e, 2, 6.0, 100.0).has_value());
}

TEST(CIndex, FiveSubjectHandCohort) {
  // Reference value from exhaustive pair enumeration in a separate script.
  const std::vector<double> s{0.7, 0.2, 0.4, 0.4, 0.1};
  const std::vector<double> y{5, 8, 3, 14, 9};
  const std::vector<int> e{1, 0, 1, 2, 1};
  EXPECT_EQ(truncated_concordance(s, y, e, 1, 2.0, 10.0), 0.6875);
}

TEST(CIndex, MatchesPairEnumerationOnRandomCohorts) {
  CounterRng rng(91, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 20;
    std::vector<double> s(n);
    std::vector<double> y(n);
    std::vector<int> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 8.0) / 8.0;  // coarse scores create ties
      y[i] = std::round(rng.uniform(6.0, 80.0));     // integer times create ties
      e[i] = rng.uniform_int(0, 3);
    }
    for (int j = 1; j <= 3; ++j) {
      for (double delta : {24.0, 48.0}) {
        const auto fast = truncated_concordance(s, y, e, j, 6.0, delta);
        const auto slow = brute_c_index(s, y, e, j, 6.0, delta);
        ASSERT_EQ(fast.has_value(), slow.has_value());
        if (fast) {
          EXPECT_EQ(*fast, *slow);
        }
      }
    }
  }
}

TEST(CIndex, InvariantUnderIncreasingTransformAndReversedBySign) {
  CounterRng rng(92, 0);
  const std::size_t n = 60;
  std::vector<double> s(n);
  std::vector<double> y(n);
  std::vector<int> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform();
    y[i] = rng.uniform(6.0, 100.0);
    e[i] = rng.uniform_int(0, 2);
  }
  std::vector<double> transformed(n);
  std::vector<double> reversed(n);
  for (std::size_t i = 0; i < n; ++i) {
    transformed[i] = std::exp(3.0 * s[i]) + 2.0;
    reversed[i] = -s[i];
  }
  const double c = *truncated_concordance(s, y, e, 1, 6.0, 48.0);
  EXPECT_EQ(*truncated_concordance(transformed, y, e, 1, 6.0, 48.0), c);
  EXPECT_NEAR(*truncated_concordance(reversed, y, e, 1, 6.0, 48.0), 1.0 - c, 1e-12);
}

TEST(Auroc, PerfectSeparationIsOne) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  const std::vector<int> pos{1, 1, 0, 0};
  EXPECT_EQ(rank_auroc(s, pos), 1.0);
  EXPECT_FALSE(rank_auroc(s, std::vector<int>{1, 1, 1, 1}).has_value());
}

TEST(Auroc, MatchesPairCountingWithTies) {
  CounterRng rng(93, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(20);
    std::vector<int> pos(20);
    for (std::size_t i = 0; i < 20; ++i) {
      s[i] = std::round(rng.uniform() * 5.0);
      pos[i] = i < 2 ? static_cast<int>(i) : (rng.bernoulli(0.4) ? 1 : 0);
    }
    EXPECT_NEAR(*rank_auroc(s, pos), brute_auroc(s, pos), 1e-12);
  }
}

TEST(Auroc, RandomLabelsGiveOneHalf) {
  CounterRng rng(94, 0);
  std::vector<double> s(500);
  std::vector<int> pos(500);
  for (std::size_t i = 0; i < 500; ++i) {
    s[i] = rng.uniform();
    pos[i] = i % 2 == 0;
  }
  rng.shuffle(pos);
  EXPECT_NEAR(*rank_auroc(s, pos), 0.5, 0.05);
}

TEST(Roc, PerfectSeparatorPoints) {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<int> pos{1, 0};
  const auto pts = roc_curve(s, pos);
  EXPECT_EQ(pts, (std::vector<RocPoint>{{0, 0}, {0, 1}, {1, 1}}));
}

TEST(Roc, IdenticalScoresGiveDiagonal) {
  const std::vector<double> s(5, 0.4);
  const std::vector<int> pos{1, 0, 0, 1, 0};
  const auto pts = roc_curve(s, pos);
  EXPECT_EQ(pts, (std::vector<RocPoint>{{0, 0}, {1, 1}}));
  EXPECT_EQ(*rank_auroc(s, pos), 0.5);
  EXPECT_EQ(trapezoid_area(pts), 0.5);
}

TEST(Roc, TrapezoidAreaEqualsAuroc) {
  CounterRng rng(95, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 60));
    std::vector<double> s(n);
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 == 0 ? rng.uniform() : std::round(rng.uniform() * 4.0);
      pos[i] = i < 2 ? static_cast<int>(i) : (rng.bernoulli(0.5) ? 1 : 0);
    }
    const auto pts = roc_curve(s, pos);
    EXPECT_NEAR(trapezoid_area(pts), *rank_auroc(s, pos), 1e-12);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_GE(pts[i].fpr, pts[i - 1].fpr);
      EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
    }
    EXPECT_EQ(pts.back(), (RocPoint{1, 1}));
  }
}

TEST(Roc, PlottedFloor) {
  EXPECT_EQ(plotted_fpr(0.0), 1e-3);
  EXPECT_EQ(plotted_fpr(0.02), 0.02);
}

TEST(DeathRatio, EdgeCases) {
  CifEstimate c;
  c.grid = {24};
  c.values = (Matrix(2, 1) << 0.2, 0.1).finished();
  EXPECT_EQ(death_ratio(c, 24), 0.5);
  c.values << 0.0, 0.1;
  EXPECT_TRUE(std::isinf(death_ratio(c, 24)));
  c.values << 0.0, 0.0;
  EXPECT_EQ(death_ratio(c, 24), 1.0);
}

TEST(ClassifierScores, RestrictsToAwakeningAndDeath) {
  AtRiskPredictions p;
  p.t = 6.0;
  CifEstimate c;
  c.grid = {24};
  c.values = (Matrix(3, 1) << 0.2, 0.1, 0.3).finished();
  p.cifs = {c, c, c, c};
  p.times = {10, 90, 20, 30};
  p.events = {1, 2, 3, 0};
  const auto s = classifier_scores(p, 24.0);
  EXPECT_EQ(s.positive, (std::vector<int>{0, 1}));
  // Eventual outcome labels: the death at hour 90 is outside (6, 30] but still counts.
  const auto h = classifier_scores(p, 24.0, AurocLabel::horizon);
  EXPECT_EQ(h.positive, (std::vector<int>{0}));
}

TEST(ModelMetrics, FineGrayOnInformativeCohort) {
  const auto cfg = dcrkit::testing::informative_config(96);
  const Cohort train = simulate(cfg, 1000);
  auto test_cfg = cfg;
  test_cfg.seed = 97;
  const Cohort test = simulate(test_cfg, 300);
  const TrainedModel model(FineGrayModel{fit_finegray(train)}, train.feature_names, train.risk_names);
  const auto c = c_index(model, test, 1, 6.0, 24.0);
  ASSERT_TRUE(c.has_value());
  EXPECT_GT(*c, 0.65);
  const auto a = auroc(model, test, 6.0, 24.0);
  ASSERT_TRUE(a.has_value());
  EXPECT_GT(*a, 0.65);

  // Same numbers through the precomputed path.
  const auto p = predict_at_risk(model, test, 6.0);
  EXPECT_EQ(c_index(p, 1, 24.0), c);
  const auto roc = classifier_roc(p, 24.0);
  ASSERT_TRUE(roc.has_value());
  EXPECT_NEAR(trapezoid_area(*roc), *a, 1e-12);

  Cohort narrow = test;
  narrow.feature_names.pop_back();
  for (auto& s : narrow.subjects) {
    s.series.features.conservativeResize(Eigen::NoChange, 5);
    s.series.observed.conservativeResize(Eigen::NoChange, 5);
    s.series.static_mask.conservativeResize(5);
  }
  EXPECT_THROW(c_index(model, narrow, 1, 6.0, 24.0), CompatibilityError);
}
