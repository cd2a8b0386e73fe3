#include "dcrkit/simulator.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dcrkit;

TEST(Simulate, SameSeedSameCohort) {
  const auto cfg = dcrkit::testing::informative_config(21);
  EXPECT_EQ(simulate(cfg, 50), simulate(cfg, 50));
  auto other = cfg;
  other.seed = 22;
  EXPECT_NE(simulate(cfg, 50), simulate(other, 50));
}

TEST(Simulate, PrefixStable) {
  const auto cfg = dcrkit::testing::informative_config(23);
  const Cohort big = simulate(cfg, 40);
  const Cohort small = simulate(cfg, 10);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small.subjects[i], big.subjects[i]);
}

TEST(Simulate, ShapesAndStaticColumns) {
  const auto cfg = dcrkit::testing::informative_config(24);
  const Cohort c = simulate(cfg, 200);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.width(), 6);
  for (const auto& s : c.subjects) {
    EXPECT_GE(s.series.length(), cfg.length_min);
    EXPECT_LE(s.series.length(), cfg.length_max);
    EXPECT_TRUE(s.series.static_mask(4) && s.series.static_mask(5));
    EXPECT_FALSE(s.series.static_mask(0));
    EXPECT_GT(s.outcome.time, s.series.last_time());
  }
}

TEST(Simulate, HugeCensoringRateCensorsNearlyEveryone) {
  auto cfg = GenerativeConfig::uninformative(3, 2, 0.02, 1e6, 25);
  const Cohort c = simulate(cfg, 2000);
  EXPECT_GE(c.event_counts()[0], 0.99 * 2000);
}

TEST(Simulate, SymmetricRisksSplitEvenly) {
  const auto cfg = GenerativeConfig::uninformative(3, 2, 0.05, 0.0, 26);
  const auto counts = simulate(cfg, 10000).event_counts();
  EXPECT_EQ(counts[0], 0);
  for (int j = 1; j <= 3; ++j) EXPECT_NEAR(counts[static_cast<std::size_t>(j)] / 10000.0, 1.0 / 3.0, 0.03);
}

TEST(Simulate, RejectsInvalidConfig) {
  auto cfg = dcrkit::testing::informative_config(27);
  cfg.censor_rate = -1.0;
  EXPECT_THROW(simulate(cfg, 10), InputError);
  cfg = dcrkit::testing::informative_config(27);
  cfg.rates.pop_back();
  EXPECT_THROW(simulate(cfg, 10), InputError);
  cfg = dcrkit::testing::informative_config(27);
  cfg.betas[1].push_back(0.0);
  EXPECT_THROW(simulate(cfg, 10), InputError);
}

TEST(TrueCif, FourSymmetricRisksAtInfinity) {
  // Four equal rates, no censoring: each risk takes a quarter.
  const auto cfg = GenerativeConfig::uninformative(4, 1, 0.1, 0.0, 1);
  const auto z = dcrkit::testing::hourly(Matrix::Zero(3, 1));
  const auto cif = true_cif(cfg, z, 2.0, {INFINITY});
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(cif.with_censoring(j, 0), 0.25, 1e-15);
}

TEST(TrueCif, SingleRiskClosedForm) {
  auto cfg = GenerativeConfig::uninformative(1, 1, 0.03, 0.01, 1);
  const auto z = dcrkit::testing::hourly(Matrix::Zero(2, 1));
  const auto cif = true_cif(cfg, z, 1.0, {24.0});
  EXPECT_NEAR(cif.with_censoring(0, 0), 0.03 / 0.04 * (1.0 - std::exp(-0.04 * 24.0)), 1e-15);
  EXPECT_NEAR(cif.without_censoring(0, 0), 1.0 - std::exp(-0.03 * 24.0), 1e-15);
}

TEST(TrueCif, FeatureDependentRates) {
  auto cfg = GenerativeConfig::uninformative(2, 1, 0.02, 0.0, 1);
  cfg.betas = {{0.5}, {-0.5}};
  const auto z = dcrkit::testing::hourly((Matrix(3, 1) << 1.0, 2.0, 3.0).finished());
  const auto cif = true_cif(cfg, z, 2.0, {1e9});
  const double r1 = 0.02 * std::exp(1.0);
  const double r2 = 0.02 * std::exp(-1.0);
  EXPECT_NEAR(cif.rates(0), r1, 1e-15);
  EXPECT_NEAR(cif.with_censoring(0, 0), r1 / (r1 + r2), 1e-12);
}

TEST(TrueCif, PolicyTiesWithdrawalToDeathRisk) {
  auto cfg = GenerativeConfig::uninformative(3, 1, 0.02, 0.0, 1);
  cfg.betas = {{0.0}, {0.4}, {0.1}};
  cfg.policy = 2.0;
  const auto z = dcrkit::testing::hourly(Matrix::Constant(2, 1, 1.0));
  const auto cif = true_cif(cfg, z, 1.0, {24.0});
  EXPECT_NEAR(cif.rates(2), 0.02 * std::exp(0.1 + 2.0 * 0.4), 1e-15);
}

TEST(TrueCif, MassesSumToOne) {
  const auto cfg = dcrkit::testing::informative_config(28);
  const Cohort c = simulate(cfg, 100);
  for (const auto& s : c.subjects) {
    const auto cif = true_cif(cfg, s.series, s.series.last_time(), {INFINITY});
    EXPECT_NEAR(cif.with_censoring.col(0).sum() + cif.censoring_mass, 1.0, 1e-12);
    EXPECT_NEAR(cif.without_censoring.col(0).sum(), 1.0, 1e-12);
  }
}

TEST(TrueCif, MonotoneFromZero) {
  const auto cfg = dcrkit::testing::informative_config(29);
  const Cohort c = simulate(cfg, 30);
  std::vector<double> deltas;
  for (int u = 0; u <= 200; ++u) deltas.push_back(u * 0.75);
  for (const auto& s : c.subjects) {
    const auto cif = true_cif(cfg, s.series, s.series.last_time(), deltas);
    for (int j = 0; j < cfg.k; ++j) {
      EXPECT_EQ(cif.with_censoring(j, 0), 0.0);
      for (Index u = 1; u < cif.with_censoring.cols(); ++u) {
        EXPECT_GE(cif.with_censoring(j, u), cif.with_censoring(j, u - 1));
      }
    }
  }
}

TEST(TrueCif, MemorylessAcrossPredictionTimes) {
  const auto cfg = dcrkit::testing::informative_config(30);
  const Cohort c = simulate(cfg, 10);
  for (const auto& s : c.subjects) {
    const double t0 = s.series.last_time();
    const auto a = true_cif(cfg, s.series, t0, {24, 48, 72});
    const auto b = true_cif(cfg, s.series, t0 + 7.5, {24, 48, 72});
    EXPECT_EQ(a.with_censoring, b.with_censoring);
  }
}

TEST(TrueCif, RejectsTimeBeforeEndOfSeries) {
  const auto cfg = GenerativeConfig::uninformative(1, 1, 0.1, 0.0, 1);
  const auto z = dcrkit::testing::hourly(Matrix::Zero(5, 1));
  EXPECT_THROW(true_cif(cfg, z, 3.0, {24}), InputError);
  EXPECT_THROW(true_cif(cfg, z, 4.0, {24, 12}), InputError);
}

TEST(TrueCif, AgreesWithMonteCarloOnHeterogeneousCohort) {
  // Mean of (1[event j by Δ] - F_j(Δ)) over subjects has expectation zero.
  const auto cfg = dcrkit::testing::informative_config(31);
  const std::size_t n = 20000;
  const Cohort c = simulate(cfg, n);
  const std::vector<double> deltas{24, 48, 72};
  Matrix sum = Matrix::Zero(cfg.k, 3);
  Matrix sq = Matrix::Zero(cfg.k, 3);
  for (const auto& s : c.subjects) {
    const auto cif = true_cif(cfg, s.series, s.series.last_time(), deltas);
    for (int j = 0; j < cfg.k; ++j) {
      for (Index u = 0; u < 3; ++u) {
        const double hit = s.outcome.event == j + 1 && s.residual() <= deltas[static_cast<std::size_t>(u)];
        const double r = hit - cif.with_censoring(j, u);
        sum(j, u) += r;
        sq(j, u) += r * r;
      }
    }
  }
  for (int j = 0; j < cfg.k; ++j) {
    for (Index u = 0; u < 3; ++u) {
      const double mean = sum(j, u) / n;
      const double se = std::sqrt((sq(j, u) / n - mean * mean) / n);
      EXPECT_LT(std::abs(mean), 4.0 * se) << "risk " << j + 1 << " delta " << deltas[static_cast<std::size_t>(u)];
    }
  }
}

TEST(TrueCif, EmpiricalCurvesWithinKolmogorovBound) {
  const auto cfg = GenerativeConfig::uninformative(3, 1, 0.02, 0.005, 32);
  const std::size_t n = 100000;
  const Cohort c = simulate(cfg, n);
  std::vector<double> deltas;
  for (int u = 1; u <= 100; ++u) deltas.push_back(u * 3.0);
  const auto z = dcrkit::testing::hourly(Matrix::Zero(1, 1));
  const auto cif = true_cif(cfg, z, 0.0, deltas);
  Matrix counts = Matrix::Zero(3, static_cast<Index>(deltas.size()));
  for (const auto& s : c.subjects) {
    if (s.outcome.event == 0) continue;
    for (std::size_t u = 0; u < deltas.size(); ++u) {
      if (s.residual() <= deltas[u]) counts(s.outcome.event - 1, static_cast<Index>(u)) += 1.0;
    }
  }
  const double worst = (counts / static_cast<double>(n) - cif.with_censoring).cwiseAbs().maxCoeff();
  EXPECT_LT(worst, 0.02);
}
