#pragma once

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dcrkit {

/// Generative process with competing exponential latent durations.
///
/// Features: `d_dynamic` Gaussian random-walk columns (start ~ N(0,1), increments
/// ~ N(0, walk_sd^2)) followed by `d_static` columns drawn once from N(0,1).
/// Length L ~ Uniform{length_min..length_max}; step ℓ is at (ℓ-1) * step_hours.
///
/// Subject summary s(Z) = column means of the full feature matrix (for static
/// columns that is the value itself). Event rates are
///   r_j = rate_j * exp(beta_j . s(Z))                     j = 1..k
/// except that with `policy != 0` and k >= 3 the withdrawal rate becomes
///   r_3 = rate_3 * exp(beta_3 . s(Z) + policy * beta_2 . s(Z)),
/// tying withdrawal to the death risk. Censoring has constant rate `censor_rate`.
struct GenerativeConfig {
  int k = 3;
  int d_static = 0;
  int d_dynamic = 4;
  int length_min = 6;
  int length_max = 12;
  double step_hours = 1.0;
  double walk_sd = 0.3;
  std::vector<double> rates;               // k baseline rates
  std::vector<std::vector<double>> betas;  // k x (d_dynamic + d_static)
  double censor_rate = 0.01;
  double policy = 0.0;
  std::uint64_t seed = 1;

  int width() const { return d_dynamic + d_static; }

  void validate() const {
    require(k >= 1, "k must be >= 1");
    require(d_static >= 0 && d_dynamic >= 0 && width() >= 1, "feature dimensions must be nonnegative with d >= 1");
    require(length_min >= 1 && length_max >= length_min, "length bounds must satisfy 1 <= length_min <= length_max");
    require(step_hours > 0.0, "step_hours must be positive");
    require(walk_sd >= 0.0, "walk_sd must be nonnegative");
    require(static_cast<int>(rates.size()) == k, "rates must have k entries");
    for (double r : rates) require(r > 0.0 && std::isfinite(r), "rates must be positive and finite");
    require(static_cast<int>(betas.size()) == k, "betas must have k rows");
    for (const auto& b : betas) require(static_cast<int>(b.size()) == width(), "each beta row must have d entries");
    require(censor_rate >= 0.0 && std::isfinite(censor_rate), "censor_rate must be nonnegative and finite");
  }

  /// Symmetric, feature-free configuration (all betas zero).
  static GenerativeConfig uninformative(int k, int d_dynamic, double rate, double censor_rate, std::uint64_t seed) {
    GenerativeConfig cfg;
    cfg.k = k;
    cfg.d_dynamic = d_dynamic;
    cfg.rates.assign(static_cast<std::size_t>(k), rate);
    cfg.betas.assign(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(d_dynamic), 0.0));
    cfg.censor_rate = censor_rate;
    cfg.seed = seed;
    return cfg;
  }
};

inline Vector subject_summary(const TimeSeries& z) { return z.features.colwise().mean().transpose(); }

/// Per-risk rates r_1..r_k for a subject summary.
inline Vector event_rates(const GenerativeConfig& cfg, const Vector& summary) {
  Vector linear(cfg.k);
  for (int j = 0; j < cfg.k; ++j) {
    linear(j) = Eigen::Map<const Vector>(cfg.betas[static_cast<std::size_t>(j)].data(), cfg.width()).dot(summary);
  }
  if (cfg.k >= 3 && cfg.policy != 0.0) linear(2) += cfg.policy * linear(1);
  Vector r(cfg.k);
  for (int j = 0; j < cfg.k; ++j) r(j) = cfg.rates[static_cast<std::size_t>(j)] * std::exp(linear(j));
  return r;
}

inline std::vector<std::string> default_risk_names(int k) {
  if (k == 3) return {"awakening", "death", "withdrawal"};
  std::vector<std::string> names;
  for (int j = 1; j <= k; ++j) names.push_back("risk" + std::to_string(j));
  return names;
}

/// One subject's draw; a pure function of (cfg, index).
inline Subject simulate_subject(const GenerativeConfig& cfg, std::size_t index) {
  CounterRng rng(cfg.seed, index);
  const int L = rng.uniform_int(cfg.length_min, cfg.length_max);
  const int d = cfg.width();
  Matrix x(L, d);
  for (int c = 0; c < cfg.d_dynamic; ++c) {
    x(0, c) = rng.normal();
    for (int l = 1; l < L; ++l) x(l, c) = x(l - 1, c) + rng.normal(0.0, cfg.walk_sd);
  }
  for (int c = cfg.d_dynamic; c < d; ++c) x.col(c).setConstant(rng.normal());

  Subject s;
  s.series = TimeSeries::fully_observed(std::move(x), Vector::LinSpaced(L, 0.0, cfg.step_hours * (L - 1)));
  for (int c = cfg.d_dynamic; c < d; ++c) s.series.static_mask(c) = true;

  const Vector r = event_rates(cfg, subject_summary(s.series));
  int event = 0;
  double best = rng.exponential(cfg.censor_rate);
  for (int j = 0; j < cfg.k; ++j) {
    const double xi = rng.exponential(r(j));
    if (xi < best) {
      best = xi;
      event = j + 1;
    }
  }
  s.outcome = {event, s.series.last_time() + best};
  return s;
}

inline Cohort simulate(const GenerativeConfig& cfg, std::size_t n) {
  cfg.validate();
  require(n >= 1, "simulate: n must be >= 1");
  Cohort c;
  c.k = cfg.k;
  c.risk_names = default_risk_names(cfg.k);
  for (int f = 0; f < cfg.d_dynamic; ++f) c.feature_names.push_back("x" + std::to_string(f + 1));
  for (int f = 0; f < cfg.d_static; ++f) c.feature_names.push_back("s" + std::to_string(f + 1));
  c.subjects.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.subjects.push_back(simulate_subject(cfg, i));
  return c;
}

/// Analytic cumulative incidence under the generative model, conditioned on
/// Y > t. Both variants are k x |deltas|.
struct TrueCif {
  Matrix with_censoring;     // (r_j / (R + c)) (1 - exp(-(R + c) Δ))
  Matrix without_censoring;  // (r_j / R) (1 - exp(-R Δ))
  double censoring_mass = 0.0;  // c / (R + c), the Δ -> ∞ probability of censoring first
  Vector rates;
};

inline TrueCif true_cif(const GenerativeConfig& cfg, const TimeSeries& z, double t, const std::vector<double>& deltas) {
  require(t >= z.last_time(), "true_cif: t = " + std::to_string(t) + " precedes the end of the series (" +
                                  std::to_string(z.last_time()) + ")");
  for (std::size_t u = 0; u < deltas.size(); ++u) {
    require(deltas[u] >= 0.0, "true_cif: deltas must be nonnegative");
    require(u == 0 || deltas[u] >= deltas[u - 1], "true_cif: deltas must be ascending");
  }
  TrueCif out;
  out.rates = event_rates(cfg, subject_summary(z));
  const double R = out.rates.sum();
  const double total = R + cfg.censor_rate;
  const auto m = static_cast<Index>(deltas.size());
  out.with_censoring.resize(cfg.k, m);
  out.without_censoring.resize(cfg.k, m);
  for (Index u = 0; u < m; ++u) {
    const double delta = deltas[static_cast<std::size_t>(u)];
    // -expm1 keeps small-Δ values accurate; Δ = inf gives exactly 1.
    const double reach_all = -std::expm1(-total * delta);
    const double reach_events = -std::expm1(-R * delta);
    for (int j = 0; j < cfg.k; ++j) {
      out.with_censoring(j, u) = out.rates(j) / total * reach_all;
      out.without_censoring(j, u) = out.rates(j) / R * reach_events;
    }
  }
  out.censoring_mass = cfg.censor_rate / total;
  return out;
}

}  // namespace dcrkit
