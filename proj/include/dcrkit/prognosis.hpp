#pragma once

// Awaken/death classifiers derived from per-event CIFs, with risk 1 = awakening,
// 2 = death (not withdrawal), 3 = withdrawal.

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/model.hpp"
#include "dcrkit/survival.hpp"

#include <cmath>
#include <concepts>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dcrkit {

struct PredictionQuery {
  double t = 0.0;
  double delta = 24.0;

  void validate() const {
    require(std::isfinite(t) && t >= 0.0, "prediction time t must be >= 0");
    require(std::isfinite(delta) && delta > 0.0, "horizon delta must be positive");
  }
};

struct AlphaAssumption {
  double alpha = 0.5;
  std::optional<double> alpha_death;  // defaults to 1 - alpha

  void validate() const {
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
    if (alpha_death) require(*alpha_death >= 0.0 && *alpha_death <= 1.0, "alpha_death must lie in [0, 1]");
  }
  double death_share() const { return alpha_death.value_or(1.0 - alpha); }
};

enum class Prognosis { awaken, death };

inline const char* to_string(Prognosis p) { return p == Prognosis::awaken ? "awaken" : "death"; }

namespace detail {

inline void require_three_risks(const CifEstimate& cif) {
  require(cif.k() >= 2, "classifier needs risks 1 (awakening) and 2 (death)");
}

inline double non_withdrawal_mass(const CifEstimate& cif) {
  require_three_risks(cif);
  const double denom = cif.at_infinity(1) + cif.at_infinity(2);
  require(denom > 0.0, "degenerate model output: F1(inf) + F2(inf) = 0 for this subject");
  return denom;
}

}  // namespace detail

/// F1(Δ) / (F1(∞) + F2(∞)).
inline double p_awaken(const CifEstimate& cif, double delta) {
  const double denom = detail::non_withdrawal_mass(cif);
  return cif.at(1, delta) / denom;
}

/// F2(Δ) / (F1(∞) + F2(∞)).
inline double p_death(const CifEstimate& cif, double delta) {
  const double denom = detail::non_withdrawal_mass(cif);
  return cif.at(2, delta) / denom;
}

/// "awaken" iff p_death / p_awaken < threshold. p_awaken = 0 classifies as death
/// when p_death > 0 and is rejected when both vanish.
inline Prognosis classify(double p_awaken_value, double p_death_value, double threshold = 1.0) {
  if (p_awaken_value <= 0.0) {
    require(p_death_value > 0.0, "classify: p_awaken and p_death are both zero");
    return Prognosis::death;
  }
  return p_death_value / p_awaken_value < threshold ? Prognosis::awaken : Prognosis::death;
}

inline Prognosis classify(const CifEstimate& cif, double delta, double threshold = 1.0) {
  return classify(p_awaken(cif, delta), p_death(cif, delta), threshold);
}

/// F1(Δ) + F3(Δ) * alpha.
inline double p_awaken_unconditional(const CifEstimate& cif, double delta, const AlphaAssumption& a) {
  a.validate();
  require(cif.k() >= 3, "unconditional variant needs a withdrawal risk (k = 3)");
  return cif.at(1, delta) + cif.at(3, delta) * a.alpha;
}

/// F2(Δ) + F3(Δ) * alpha_death.
inline double p_death_unconditional(const CifEstimate& cif, double delta, const AlphaAssumption& a) {
  a.validate();
  require(cif.k() >= 3, "unconditional variant needs a withdrawal risk (k = 3)");
  return cif.at(2, delta) + cif.at(3, delta) * a.death_share();
}

inline CifEstimate predict_at(const TrainedModel& model, const TimeSeries& z, const PredictionQuery& q) {
  q.validate();
  return model.predict_cif(z, q.t);
}

inline double p_awaken(const TrainedModel& model, const TimeSeries& z, const PredictionQuery& q) {
  return p_awaken(predict_at(model, z, q), q.delta);
}

inline double p_death(const TrainedModel& model, const TimeSeries& z, const PredictionQuery& q) {
  return p_death(predict_at(model, z, q), q.delta);
}

inline Prognosis classify(const TrainedModel& model, const TimeSeries& z, const PredictionQuery& q,
                          double threshold = 1.0) {
  return classify(predict_at(model, z, q), q.delta, threshold);
}

inline double p_awaken_unconditional(const TrainedModel& model, const TimeSeries& z, const PredictionQuery& q,
                                     const AlphaAssumption& a) {
  return p_awaken_unconditional(predict_at(model, z, q), q.delta, a);
}

enum class HeatmapVariant { conditional, alpha };

struct HeatmapGrid {
  std::vector<double> t_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<double> delta_values{24, 48, 72};
  Matrix values;  // |delta_values| x |t_values|
};

/// Cell (Δ, t) holds p_awaken (or the alpha variant) after truncating z at t.
template <class PredictFn>
  requires std::invocable<PredictFn&, const TimeSeries&, double>
HeatmapGrid heatmap_grid(PredictFn&& predict, const TimeSeries& z, std::vector<double> t_values,
                         std::vector<double> delta_values, HeatmapVariant variant = HeatmapVariant::conditional,
                         const AlphaAssumption& a = {}) {
  require(!t_values.empty() && !delta_values.empty(), "heat map needs at least one t and one delta");
  for (std::size_t i = 1; i < t_values.size(); ++i) {
    require(t_values[i] > t_values[i - 1], "heat map t values must be ascending");
  }
  for (std::size_t i = 1; i < delta_values.size(); ++i) {
    require(delta_values[i] > delta_values[i - 1], "heat map delta values must be ascending");
  }
  HeatmapGrid grid;
  grid.values.resize(static_cast<Index>(delta_values.size()), static_cast<Index>(t_values.size()));
  for (std::size_t c = 0; c < t_values.size(); ++c) {
    const double t = t_values[c];
    if (!(std::isfinite(t) && t >= z.timestamps(0))) {
      std::ostringstream msg;
      msg << "heat map: t = " << t << " admits no observed step";
      throw InputError(msg.str());
    }
    const CifEstimate cif = predict(z, t);
    for (std::size_t r = 0; r < delta_values.size(); ++r) {
      const double d = delta_values[r];
      grid.values(static_cast<Index>(r), static_cast<Index>(c)) =
          variant == HeatmapVariant::conditional ? p_awaken(cif, d) : p_awaken_unconditional(cif, d, a);
    }
  }
  grid.t_values = std::move(t_values);
  grid.delta_values = std::move(delta_values);
  return grid;
}

inline HeatmapGrid heatmap_grid(const TrainedModel& model, const TimeSeries& z, std::vector<double> t_values,
                                std::vector<double> delta_values,
                                HeatmapVariant variant = HeatmapVariant::conditional, const AlphaAssumption& a = {}) {
  return heatmap_grid([&model](const TimeSeries& s, double t) { return model.predict_cif(s, t); }, z,
                      std::move(t_values), std::move(delta_values), variant, a);
}

/// Matrix file: header "delta,t1,t2,...", then one row per Δ. Values use
/// round-trip precision.
inline std::string format_heatmap(const HeatmapGrid& g) {
  std::ostringstream out;
  out.precision(17);
  out << "delta";
  for (double t : g.t_values) out << ',' << t;
  out << '\n';
  for (std::size_t r = 0; r < g.delta_values.size(); ++r) {
    out << g.delta_values[r];
    for (Index c = 0; c < g.values.cols(); ++c) out << ',' << g.values(static_cast<Index>(r), c);
    out << '\n';
  }
  return out.str();
}

inline HeatmapGrid parse_heatmap(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  HeatmapGrid g;
  g.t_values.clear();
  g.delta_values.clear();
  auto split = [](const std::string& s, int line_no) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw InputError("heat map line " + std::to_string(line_no) + ": expected comma-separated values");
    return cells;
  };
  auto number = [](const std::string& s, int line_no) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("heat map line " + std::to_string(line_no) + ": not a number: \"" + s + "\"");
    }
  };
  if (!std::getline(in, line)) throw InputError("heat map file is empty");
  const auto header = split(line, 1);
  if (header[0] != "delta") throw InputError("heat map line 1: header must start with \"delta\"");
  for (std::size_t i = 1; i < header.size(); ++i) g.t_values.push_back(number(header[i], 1));
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, line_no);
    if (cells.size() != header.size()) {
      throw InputError("heat map line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    }
    g.delta_values.push_back(number(cells[0], line_no));
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(number(cells[i], line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("heat map file has no data rows");
  g.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(g.t_values.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) g.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return g;
}

}  // namespace dcrkit
