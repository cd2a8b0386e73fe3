#pragma once

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/survival.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace dcrkit {

/// Product-limit estimate of the censoring survival G, stored as the
/// left-continuous step function G(s-) over the distinct censoring times.
struct CensoringSurvival {
  std::vector<double> times;     // distinct censoring times, ascending
  std::vector<double> survival;  // G(times[i]), i.e. after the drop at times[i]

  /// G(s-): product over censoring times strictly below s.
  double left_limit(double s) const {
    const auto it = std::lower_bound(times.begin(), times.end(), s);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// `durations` with `censored` flags; subjects tied with a censoring time are
  /// at risk for it.
  static CensoringSurvival estimate(const std::vector<double>& durations, const std::vector<bool>& censored) {
    std::vector<std::size_t> order(durations.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return durations[a] < durations[b]; });
    CensoringSurvival g;
    double surv = 1.0;
    std::size_t i = 0;
    const auto n = order.size();
    while (i < n) {
      const double t = durations[order[i]];
      std::size_t j = i;
      double drops = 0.0;
      while (j < n && durations[order[j]] == t) {
        if (censored[order[j]]) drops += 1.0;
        ++j;
      }
      if (drops > 0.0) {
        surv *= 1.0 - drops / static_cast<double>(n - i);
        g.times.push_back(t);
        g.survival.push_back(surv);
      }
      i = j;
    }
    return g;
  }
};

struct FineGrayEventFit {
  Vector coef_standardized;
  Vector coef;  // original feature scale
  std::vector<double> times;   // distinct event times (residual hours)
  std::vector<double> cumhaz;  // baseline cumulative subdistribution hazard at `times`
  int iterations = 0;
  double score_norm = 0.0;  // max |weighted score| at the returned coefficients

  /// Λ_0(Δ), right-continuous step.
  double baseline(double delta) const {
    const auto it = std::upper_bound(times.begin(), times.end(), delta);
    if (it == times.begin()) return 0.0;
    return cumhaz[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

struct FineGrayFit {
  int k = 0;
  Index width = 0;              // raw feature width d
  std::vector<Index> columns;   // non-constant columns used as covariates
  Vector mean;                  // per used column
  Vector scale;                 // per used column, > 0
  std::vector<FineGrayEventFit> events;
  CensoringSurvival censoring;

  /// Sorted union of all events' baseline step times.
  std::vector<double> step_grid() const {
    std::vector<double> grid;
    for (const auto& e : events) grid.insert(grid.end(), e.times.begin(), e.times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
  }

  Vector standardize(const Vector& raw) const {
    Vector x(static_cast<Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto i = static_cast<Index>(c);
      x(i) = (raw(columns[c]) - mean(i)) / scale(i);
    }
    return x;
  }
};

enum class BaselineTransform {
  exponential,       // F = 1 - exp(-Λ_0 e^{xβ})
  product_integral,  // F = 1 - Π (1 - dΛ_0 e^{xβ}), factors clamped at 0
};

namespace detail {

struct FgData {
  Matrix x;  // n x p standardized
  std::vector<double> duration;
  std::vector<int> event;
  std::vector<std::size_t> order;  // ascending duration
  std::vector<double> inv_g;       // 1 / G(duration_i -)
};

struct FgEvaluation {
  double loglik = 0.0;
  Vector score;
  Matrix information;  // negative Hessian
  std::vector<double> event_times;
  std::vector<double> denominators;
  std::vector<double> tie_counts;
};

/// Weighted partial likelihood for one event with Breslow ties. The
/// subdistribution risk set at τ holds everyone with duration >= τ at weight 1,
/// plus competing-event subjects with duration < τ at weight G(τ-)/G(duration-).
inline FgEvaluation fg_evaluate(const FgData& data, const CensoringSurvival& g, int event, const Vector& beta,
                                bool need_derivatives) {
  const Index p = data.x.cols();
  const auto n = data.order.size();
  const Vector lp = data.x * beta;
  const Vector risk = lp.array().exp().matrix();

  double total0 = 0.0;
  Vector total1 = Vector::Zero(p);
  Matrix total2 = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = data.x.row(static_cast<Index>(i)).transpose();
    total0 += risk(static_cast<Index>(i));
    if (need_derivatives) {
      total1 += risk(static_cast<Index>(i)) * xi;
      total2.noalias() += risk(static_cast<Index>(i)) * xi * xi.transpose();
    }
  }

  double gone0 = 0.0;  // everyone with duration < τ
  Vector gone1 = Vector::Zero(p);
  Matrix gone2 = Matrix::Zero(p, p);
  double comp0 = 0.0;  // competing events with duration < τ, weighted by 1/G(duration-)
  Vector comp1 = Vector::Zero(p);
  Matrix comp2 = Matrix::Zero(p, p);

  FgEvaluation out;
  out.score = Vector::Zero(p);
  out.information = Matrix::Zero(p, p);
  std::size_t r = 0;
  while (r < n) {
    const double tau = data.duration[data.order[r]];
    std::size_t stop = r;
    while (stop < n && data.duration[data.order[stop]] == tau) ++stop;

    double ties = 0.0;
    Vector tied_x = Vector::Zero(p);
    for (std::size_t q = r; q < stop; ++q) {
      const auto i = data.order[q];
      if (data.event[i] == event) {
        ties += 1.0;
        tied_x += data.x.row(static_cast<Index>(i)).transpose();
      }
    }
    if (ties > 0.0) {
      const double g_tau = g.left_limit(tau);
      const double s0 = (total0 - gone0) + g_tau * comp0;
      out.loglik += tied_x.dot(beta) - ties * std::log(s0);
      out.event_times.push_back(tau);
      out.denominators.push_back(s0);
      out.tie_counts.push_back(ties);
      if (need_derivatives) {
        const Vector s1 = (total1 - gone1) + g_tau * comp1;
        const Matrix s2 = (total2 - gone2) + g_tau * comp2;
        const Vector mean = s1 / s0;
        out.score += tied_x - ties * mean;
        out.information += ties * (s2 / s0 - mean * mean.transpose());
      }
    }

    for (std::size_t q = r; q < stop; ++q) {
      const auto i = data.order[q];
      const auto ii = static_cast<Index>(i);
      const double e = risk(ii);
      gone0 += e;
      const bool competing = data.event[i] != 0 && data.event[i] != event;
      if (competing) comp0 += e * data.inv_g[i];
      if (need_derivatives) {
        const auto xi = data.x.row(ii).transpose();
        gone1 += e * xi;
        gone2.noalias() += e * xi * xi.transpose();
        if (competing) {
          comp1 += e * data.inv_g[i] * xi;
          comp2.noalias() += e * data.inv_g[i] * xi * xi.transpose();
        }
      }
    }
    r = stop;
  }
  return out;
}

inline Vector last_row_at(const TimeSeries& z, double t) {
  Index row = -1;
  for (Index l = 0; l < z.length(); ++l) {
    if (z.timestamps(l) <= t) row = l;
  }
  require(row >= 0, "no observation at or before t = " + std::to_string(t));
  return z.features.row(row).transpose();
}

}  // namespace detail

/// Fits one Fine-Gray subdistribution hazards model per event on the last
/// observed step's features, with durations measured from that step.
///
/// Newton-Raphson on standardized covariates with step halving, stopping when
/// the weighted score's max-norm drops below 1e-8 (at most 50 iterations).
/// Baselines use the weighted Breslow estimator.
inline FineGrayFit fit_finegray(const Cohort& cohort) {
  cohort.validate();
  const auto n = cohort.size();
  const Index d = cohort.width();
  Matrix raw(static_cast<Index>(n), d);
  detail::FgData data;
  data.duration.resize(n);
  data.event.resize(n);
  std::vector<bool> censored(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = cohort.subjects[i];
    raw.row(static_cast<Index>(i)) = s.series.features.row(s.series.length() - 1);
    data.duration[i] = s.residual();
    data.event[i] = s.outcome.event;
    censored[i] = s.outcome.event == 0;
  }

  const auto counts = cohort.event_counts();
  for (int j = 1; j <= cohort.k; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) {
      throw TrainingError("fine-gray: no subject experienced event " + std::to_string(j) + " (" +
                          cohort.risk_names[static_cast<std::size_t>(j - 1)] + ")");
    }
  }

  FineGrayFit fit;
  fit.k = cohort.k;
  fit.width = d;
  for (Index c = 0; c < d; ++c) {
    if (raw.col(c).maxCoeff() > raw.col(c).minCoeff()) fit.columns.push_back(c);
  }
  const auto p = static_cast<Index>(fit.columns.size());
  fit.mean.resize(p);
  fit.scale.resize(p);
  data.x.resize(static_cast<Index>(n), p);
  for (Index c = 0; c < p; ++c) {
    const auto col = raw.col(fit.columns[static_cast<std::size_t>(c)]);
    fit.mean(c) = col.mean();
    fit.scale(c) = std::sqrt((col.array() - fit.mean(c)).square().sum() / static_cast<double>(n));
    data.x.col(c) = (col.array() - fit.mean(c)) / fit.scale(c);
  }

  if (p > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(data.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      std::string names;
      const auto perm = qr.colsPermutation().indices();
      for (Index r = qr.rank(); r < p; ++r) {
        const auto col = fit.columns[static_cast<std::size_t>(perm(r))];
        names += (names.empty() ? "" : ", ") + cohort.feature_names[static_cast<std::size_t>(col)];
      }
      throw InputError("fine-gray: feature matrix is rank deficient; linearly dependent columns: " + names);
    }
  }

  fit.censoring = CensoringSurvival::estimate(data.duration, censored);
  data.order.resize(n);
  std::iota(data.order.begin(), data.order.end(), std::size_t{0});
  std::stable_sort(data.order.begin(), data.order.end(),
                   [&](std::size_t a, std::size_t b) { return data.duration[a] < data.duration[b]; });
  data.inv_g.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.inv_g[i] = 1.0 / fit.censoring.left_limit(data.duration[i]);

  constexpr int kMaxIterations = 50;
  constexpr double kScoreTolerance = 1e-8;
  for (int j = 1; j <= cohort.k; ++j) {
    FineGrayEventFit ef;
    Vector beta = Vector::Zero(p);
    auto eval = detail::fg_evaluate(data, fit.censoring, j, beta, true);
    std::ostringstream trace;
    bool converged = p == 0 || eval.score.cwiseAbs().maxCoeff() < kScoreTolerance;
    int iter = 0;
    while (!converged && iter < kMaxIterations) {
      ++iter;
      const Vector direction = eval.information.ldlt().solve(eval.score);
      double step = 1.0;
      Vector candidate = beta + direction;
      auto next = detail::fg_evaluate(data, fit.censoring, j, candidate, true);
      int halvings = 0;
      // Rounding can leave loglik flat near the optimum; allow a relative slack.
      while (!(next.loglik >= eval.loglik - 1e-12 * std::abs(eval.loglik)) && halvings < 30) {
        step *= 0.5;
        ++halvings;
        candidate = beta + step * direction;
        next = detail::fg_evaluate(data, fit.censoring, j, candidate, true);
      }
      beta = candidate;
      eval = std::move(next);
      const double norm = eval.score.cwiseAbs().maxCoeff();
      trace << "  iter " << iter << ": loglik=" << eval.loglik << " |score|=" << norm << " step=" << step << '\n';
      converged = norm < kScoreTolerance;
      if (halvings == 30) break;
    }
    if (!converged) {
      throw TrainingError("fine-gray: Newton iterations did not converge for event " + std::to_string(j) + "\n" +
                          trace.str());
    }
    ef.iterations = iter;
    ef.score_norm = p == 0 ? 0.0 : eval.score.cwiseAbs().maxCoeff();
    ef.coef_standardized = beta;
    ef.coef = beta.cwiseQuotient(fit.scale);
    double cum = 0.0;
    for (std::size_t e = 0; e < eval.event_times.size(); ++e) {
      cum += eval.tie_counts[e] / eval.denominators[e];
      ef.times.push_back(eval.event_times[e]);
      ef.cumhaz.push_back(cum);
    }
    fit.events.push_back(std::move(ef));
  }
  return fit;
}

/// CIF at durations `deltas` after prediction time t, from the last step observed
/// at or before t.
inline CifEstimate predict_finegray(const FineGrayFit& fit, const TimeSeries& z, double t,
                                    const std::vector<double>& deltas,
                                    BaselineTransform transform = BaselineTransform::exponential) {
  if (z.width() != fit.width) {
    throw CompatibilityError("model expects " + std::to_string(fit.width) + " features, input has " +
                             std::to_string(z.width()));
  }
  const Vector x = fit.standardize(detail::last_row_at(z, t));
  CifEstimate cif;
  cif.grid = deltas;
  cif.values.resize(fit.k, static_cast<Index>(deltas.size()));
  for (int j = 0; j < fit.k; ++j) {
    const auto& ef = fit.events[static_cast<std::size_t>(j)];
    const double hr = std::exp(ef.coef_standardized.dot(x));
    for (std::size_t u = 0; u < deltas.size(); ++u) {
      double value = 0.0;
      if (transform == BaselineTransform::exponential) {
        value = -std::expm1(-ef.baseline(deltas[u]) * hr);
      } else {
        double surv = 1.0;
        double prev = 0.0;
        for (std::size_t s = 0; s < ef.times.size() && ef.times[s] <= deltas[u]; ++s) {
          surv *= std::max(0.0, 1.0 - (ef.cumhaz[s] - prev) * hr);
          prev = ef.cumhaz[s];
        }
        value = 1.0 - surv;
      }
      cif.values(j, static_cast<Index>(u)) = value;
    }
  }
  return cif;
}

/// CIF on the fit's own step grid (the union of baseline jump times).
inline CifEstimate predict_finegray(const FineGrayFit& fit, const TimeSeries& z, double t) {
  return predict_finegray(fit, z, t, fit.step_grid());
}

}  // namespace dcrkit
