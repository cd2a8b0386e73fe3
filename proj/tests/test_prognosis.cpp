#include "dcrkit/metrics.hpp"
#include "dcrkit/prognosis.hpp"
#include "dcrkit/simulator.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

using namespace dcrkit;

namespace {

/// Three-risk CIF on grid {24, 48, 72, 96}; the last column plays ∞.
CifEstimate cif3(std::vector<double> f1, std::vector<double> f2, std::vector<double> f3) {
  CifEstimate c;
  c.grid = {24, 48, 72, 96};
  c.values.resize(3, 4);
  for (Index u = 0; u < 4; ++u) {
    c.values(0, u) = f1[static_cast<std::size_t>(u)];
    c.values(1, u) = f2[static_cast<std::size_t>(u)];
    c.values(2, u) = f3[static_cast<std::size_t>(u)];
  }
  return c;
}

CifEstimate oracle_cif(const GenerativeConfig& cfg, const TimeSeries& z) {
  const std::vector<double> grid{24, 48, 72, INFINITY};
  const auto truth = true_cif(cfg, z, z.last_time(), grid);
  return {truth.with_censoring, grid};
}

TrainedModel finegray_model(std::uint64_t seed, std::size_t n) {
  const Cohort c = simulate(dcrkit::testing::informative_config(seed), n);
  return TrainedModel(FineGrayModel{fit_finegray(c)}, c.feature_names, c.risk_names);
}

}  // namespace

TEST(PAwaken, AllNonWithdrawalMassIsAwakening) {
  const auto c = cif3({0.5, 0.5, 0.5, 0.5}, {0, 0, 0, 0}, {0.1, 0.2, 0.3, 0.4});
  EXPECT_NEAR(p_awaken(c, 24), 1.0, 1e-12);
  EXPECT_NEAR(p_death(c, 24), 0.0, 1e-12);
}

TEST(PAwaken, DirectSubstitution) {
  const auto c = cif3({0.2, 0.3, 0.4, 0.5}, {0.1, 0.2, 0.25, 0.3}, {0, 0, 0, 0});
  EXPECT_NEAR(p_awaken(c, 24), 0.25, 1e-12);
  EXPECT_NEAR(p_death(c, 24), 0.125, 1e-12);
  // Step interpolation between grid points.
  EXPECT_NEAR(p_awaken(c, 47.9), 0.25, 1e-12);
  EXPECT_NEAR(p_awaken(c, 48), 0.375, 1e-12);
  EXPECT_EQ(p_awaken(c, 10), 0.0);
}

TEST(PDeath, MirroredExamples) {
  const auto a = cif3({0, 0, 0, 0}, {0.5, 0.5, 0.5, 0.5}, {0.1, 0.2, 0.3, 0.4});
  EXPECT_NEAR(p_death(a, 24), 1.0, 1e-12);
  const auto b = cif3({0.1, 0.2, 0.25, 0.3}, {0.2, 0.3, 0.4, 0.5}, {0, 0, 0, 0});
  EXPECT_NEAR(p_death(b, 24), 0.25, 1e-12);
}

TEST(PAwaken, SymmetricOracleIsOneHalf) {
  const auto cfg = GenerativeConfig::uninformative(3, 2, 0.04, 0.01, 71);
  const Cohort c = simulate(cfg, 20);
  for (const auto& s : c.subjects) {
    const auto cif = oracle_cif(cfg, s.series);
    EXPECT_NEAR(p_awaken(cif, INFINITY), 0.5, 1e-12);
    EXPECT_NEAR(p_death(cif, INFINITY), 0.5, 1e-12);
  }
}

TEST(PAwaken, DegenerateDenominatorIsRejected) {
  const auto c = cif3({0, 0, 0, 0}, {0, 0, 0, 0}, {0.2, 0.4, 0.6, 0.8});
  try {
    p_awaken(c, 24);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
  EXPECT_THROW(p_death(c, 24), InputError);
}

TEST(Classify, RatioRule) {
  EXPECT_EQ(classify(0.25, 0.10), Prognosis::awaken);
  EXPECT_EQ(classify(0.3, 0.3), Prognosis::death);
  EXPECT_EQ(classify(0.3, 0.3, 1.0000001), Prognosis::awaken);
  EXPECT_EQ(classify(0.0, 0.2), Prognosis::death);
  EXPECT_THROW(classify(0.0, 0.0), InputError);
  EXPECT_EQ(classify(0.25, 0.10, 0.3), Prognosis::death);
}

TEST(Classify, InvariantUnderCommonScaling) {
  CounterRng rng(72, 0);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform();
    const double d = rng.uniform();
    const double scale = std::exp(rng.uniform(-5, 5));
    const double thr = rng.uniform(0.2, 3.0);
    EXPECT_EQ(classify(a, d, thr), classify(a * scale, d * scale, thr));
  }
}

TEST(Unconditional, AlphaExamples) {
  const auto c = cif3({0.2, 0.3, 0.4, 0.5}, {0.1, 0.2, 0.25, 0.3}, {0.4, 0.45, 0.5, 0.55});
  EXPECT_EQ(p_awaken_unconditional(c, 24, {0.0, {}}), 0.2);
  EXPECT_NEAR(p_awaken_unconditional(c, 24, {1.0, {}}), 0.6, 1e-15);
  EXPECT_NEAR(p_death_unconditional(c, 24, {0.25, {}}), 0.1 + 0.4 * 0.75, 1e-15);
  EXPECT_NEAR(p_death_unconditional(c, 24, {0.25, 0.5}), 0.1 + 0.4 * 0.5, 1e-15);
  EXPECT_THROW(p_awaken_unconditional(c, 24, {1.5, {}}), InputError);
  double prev = -1.0;
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double v = p_awaken_unconditional(c, 48, {a, {}});
    EXPECT_GE(v, prev);
    prev = v;
  }
  // Affine in alpha.
  const double v0 = p_awaken_unconditional(c, 72, {0.0, {}});
  const double v1 = p_awaken_unconditional(c, 72, {1.0, {}});
  EXPECT_NEAR(p_awaken_unconditional(c, 72, {0.3, {}}), v0 + 0.3 * (v1 - v0), 1e-15);
}

TEST(Unconditional, NeedsWithdrawalRisk) {
  CifEstimate c;
  c.grid = {24};
  c.values = (Matrix(2, 1) << 0.2, 0.3).finished();
  EXPECT_THROW(p_awaken_unconditional(c, 24, {}), InputError);
}

TEST(Prognosis, PropertiesOverRandomModelOutputs) {
  const auto model = finegray_model(73, 400);
  const Cohort test = simulate(dcrkit::testing::informative_config(74), 1000);
  CounterRng rng(75, 0);
  for (const auto& s : test.subjects) {
    const double t = std::floor(rng.uniform(0.0, s.series.last_time() + 1.0));
    const auto cif = model.predict_cif(s.series, t);
    double prev_a = -1.0;
    double prev_d = -1.0;
    for (double delta : {24.0, 48.0, 72.0}) {
      const double a = p_awaken(cif, delta);
      const double d = p_death(cif, delta);
      EXPECT_GE(a, prev_a);
      EXPECT_GE(d, prev_d);
      EXPECT_LE(a + d, 1.0 + 1e-9);
      prev_a = a;
      prev_d = d;
    }
  }
}

TEST(Prognosis, ModelOverloadsAgreeWithCifForm) {
  const auto model = finegray_model(76, 300);
  const Cohort test = simulate(dcrkit::testing::informative_config(77), 10);
  const PredictionQuery q{5.0, 48.0};
  for (const auto& s : test.subjects) {
    const auto cif = model.predict_cif(s.series, 5.0);
    EXPECT_EQ(p_awaken(model, s.series, q), p_awaken(cif, 48.0));
    EXPECT_EQ(p_death(model, s.series, q), p_death(cif, 48.0));
    EXPECT_EQ(classify(model, s.series, q), classify(cif, 48.0));
  }
  EXPECT_THROW(p_awaken(model, test.subjects[0].series, PredictionQuery{5.0, 0.0}), InputError);
}

TEST(Heatmap, DefaultShapeMonotoneAndDeterministic) {
  const auto model = finegray_model(78, 400);
  TimeSeries z = simulate(dcrkit::testing::informative_config(79), 1).subjects[0].series;
  const HeatmapGrid defaults;
  const auto g = heatmap_grid(model, z, defaults.t_values, defaults.delta_values);
  ASSERT_EQ(g.values.rows(), 3);
  ASSERT_EQ(g.values.cols(), 12);
  for (Index c = 0; c < 12; ++c) {
    EXPECT_LE(g.values(0, c), g.values(1, c));
    EXPECT_LE(g.values(1, c), g.values(2, c));
  }
  const auto again = heatmap_grid(model, z, defaults.t_values, defaults.delta_values);
  EXPECT_EQ(g.values, again.values);
  const auto alpha = heatmap_grid(model, z, defaults.t_values, defaults.delta_values, HeatmapVariant::alpha, {0.0, {}});
  EXPECT_EQ(alpha.values(1, 4), model.predict_cif(z, 5.0).at(1, 48.0));
}

TEST(Heatmap, InvalidTimeIsNamed) {
  const auto model = finegray_model(80, 300);
  TimeSeries z = dcrkit::testing::hourly(Matrix::Zero(4, 6));
  z.timestamps.array() += 2.0;
  try {
    heatmap_grid(model, z, {1.0, 2.0}, {24});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("t = 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(heatmap_grid(model, z, {3.0, 2.5}, {24}), InputError);
}

TEST(Heatmap, FileRoundTrip) {
  HeatmapGrid g;
  g.t_values = {1, 2, 3};
  g.delta_values = {24, 48};
  g.values = (Matrix(2, 3) << 0.1, 0.2, 1.0 / 3.0, 0.4, 0.5, 2.0 / 3.0).finished();
  const std::string text = format_heatmap(g);
  EXPECT_EQ(text.substr(0, text.find('\n')), "delta,1,2,3");
  const auto back = parse_heatmap(text);
  EXPECT_EQ(back.values, g.values);
  EXPECT_EQ(back.t_values, g.t_values);
  EXPECT_EQ(back.delta_values, g.delta_values);
  EXPECT_THROW(parse_heatmap("delta,1,2\n24,0.1\n"), InputError);
  EXPECT_THROW(parse_heatmap("t,1\n24,0.1\n"), InputError);
}

TEST(Classify, ThresholdSweepReproducesRoc) {
  const auto model = finegray_model(81, 600);
  const Cohort test = simulate(dcrkit::testing::informative_config(82), 200);
  const double t = 6.0;
  const double delta = 48.0;
  const auto p = predict_at_risk(model, test, t);
  const auto roc = classifier_roc(p, delta);
  ASSERT_TRUE(roc.has_value());

  std::vector<double> ratios;
  std::vector<int> labels;
  std::vector<CifEstimate> cifs;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.events[i] != 1 && p.events[i] != 2) continue;
    cifs.push_back(p.cifs[i]);
    labels.push_back(p.events[i] == 2);
    ratios.push_back(p_death(p.cifs[i], delta) / p_awaken(p.cifs[i], delta));
  }
  std::vector<double> thresholds = ratios;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(labels.size()) - pos;

  ASSERT_EQ(roc->size(), thresholds.size() + 1);
  EXPECT_EQ((*roc)[0].fpr, 0.0);
  EXPECT_EQ((*roc)[0].tpr, 0.0);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t i = 0; i < cifs.size(); ++i) {
      if (classify(cifs[i], delta, thresholds[k]) == Prognosis::death) (labels[i] ? tp : fp) += 1.0;
    }
    EXPECT_NEAR((*roc)[k + 1].tpr, tp / pos, 1e-12) << k;
    EXPECT_NEAR((*roc)[k + 1].fpr, fp / neg, 1e-12) << k;
  }
}
