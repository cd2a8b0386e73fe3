#pragma once

// Model-level evaluation at a prediction time t: truncated c-index per event,
// awaken/death AUROC on the restricted cohort, and ROC points.

#include "dcrkit/cohort.hpp"
#include "dcrkit/concordance.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/model.hpp"
#include "dcrkit/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace dcrkit {

/// FPR = 0 is drawn at this value on a log axis.
inline constexpr double kRocFprFloor = 1e-3;

/// CIFs of every subject at risk at t, computed once and reused across
/// events and horizons.
struct AtRiskPredictions {
  double t = 0.0;
  std::vector<CifEstimate> cifs;
  std::vector<double> times;
  std::vector<int> events;

  std::size_t size() const { return cifs.size(); }
};

template <class PredictFn>
AtRiskPredictions predict_at_risk(const Cohort& test, double t, PredictFn&& predict) {
  const Cohort at_risk = truncate_at(test, t);
  AtRiskPredictions out;
  out.t = t;
  for (const auto& s : at_risk.subjects) {
    out.cifs.push_back(predict(s.series, t));
    out.times.push_back(s.outcome.time);
    out.events.push_back(s.outcome.event);
  }
  return out;
}

inline AtRiskPredictions predict_at_risk(const TrainedModel& model, const Cohort& test, double t) {
  model.check_compatible(test);
  return predict_at_risk(test, t, [&model](const TimeSeries& z, double s) { return model.predict_cif(z, s); });
}

/// Truncated c-index for event j with scores F_j(Δ | z, t). nullopt when no
/// acceptable pair exists.
inline std::optional<double> c_index(const AtRiskPredictions& p, int event, double delta) {
  std::vector<double> scores(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) scores[i] = p.cifs[i].at(event, delta);
  return truncated_concordance(scores, p.times, p.events, event, p.t, delta);
}

inline std::optional<double> c_index(const TrainedModel& model, const Cohort& test, int event, double t, double delta) {
  require(event >= 1 && event <= test.k, "c_index: event index out of range");
  return c_index(predict_at_risk(model, test, t), event, delta);
}

/// Ranking score of the awaken/death classifier: F2(Δ) / F1(Δ), the same ratio
/// as p_death / p_awaken. A zero awakening mass scores +inf; 0/0 scores 1.
inline double death_ratio(const CifEstimate& cif, double delta) {
  const double a = cif.at(1, delta);
  const double d = cif.at(2, delta);
  if (a > 0.0) return d / a;
  return d > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

/// Which awaken/death subjects enter the classifier. eventual keeps every
/// subject at risk whose final event is 1 or 2; horizon keeps only those whose
/// event falls in (t, t + delta].
enum class AurocLabel { eventual, horizon };

/// Subjects at risk at t whose observed final event is awakening (1) or death
/// (2), with the classifier score and the death label.
struct ClassifierScores {
  std::vector<double> scores;
  std::vector<int> positive;
};

inline ClassifierScores classifier_scores(const AtRiskPredictions& p, double delta,
                                          AurocLabel label = AurocLabel::eventual) {
  ClassifierScores out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.events[i] != 1 && p.events[i] != 2) continue;
    if (label == AurocLabel::horizon && p.times[i] > p.t + delta) continue;
    out.scores.push_back(death_ratio(p.cifs[i], delta));
    out.positive.push_back(p.events[i] == 2 ? 1 : 0);
  }
  return out;
}

inline std::optional<double> auroc(const AtRiskPredictions& p, double delta,
                                   AurocLabel label = AurocLabel::eventual) {
  const auto s = classifier_scores(p, delta, label);
  return rank_auroc(s.scores, s.positive);
}

inline std::optional<double> auroc(const TrainedModel& model, const Cohort& test, double t, double delta,
                                   AurocLabel label = AurocLabel::eventual) {
  require(test.k >= 2, "auroc needs risks 1 (awakening) and 2 (death)");
  return auroc(predict_at_risk(model, test, t), delta, label);
}

/// nullopt when the restricted cohort has a single class.
inline std::optional<std::vector<RocPoint>> classifier_roc(const AtRiskPredictions& p, double delta,
                                                          AurocLabel label = AurocLabel::eventual) {
  const auto s = classifier_scores(p, delta, label);
  bool pos = false;
  bool neg = false;
  for (int y : s.positive) (y != 0 ? pos : neg) = true;
  if (!pos || !neg) return std::nullopt;
  return roc_curve(s.scores, s.positive);
}

inline double plotted_fpr(double fpr) { return std::max(fpr, kRocFprFloor); }

}  // namespace dcrkit
