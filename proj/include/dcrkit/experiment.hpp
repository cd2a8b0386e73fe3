#pragma once

// Repeated stratified-split experiments producing mean ± sd metric tables,
// and the ablation runner that relabels risks before repeating them.

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/metrics.hpp"
#include "dcrkit/model.hpp"
#include "dcrkit/rng.hpp"
#include "dcrkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dcrkit {

struct ExperimentOptions {
  std::vector<ModelKind> kinds{ModelKind::finegray, ModelKind::deephit, ModelKind::ddrsa};
  TrainOptions train;
  int splits = 5;
  double test_fraction = 0.2;
  std::vector<double> t_values{6.0, 12.0};
  std::vector<double> deltas{24.0, 48.0, 72.0};
  AurocLabel auroc_label = AurocLabel::eventual;
  std::uint64_t seed = 1;
};

/// One table cell across repeats. Undefined repeats are counted, not imputed.
struct CellStats {
  std::vector<double> values;
  int failed = 0;

  bool defined() const { return !values.empty(); }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  /// Sample standard deviation; 0 for a single value.
  double sd() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
  }
  void add(const std::optional<double>& v) {
    if (v) {
      values.push_back(*v);
    } else {
      ++failed;
    }
  }
};

struct CIndexRow {
  std::string model;
  int event = 0;
  double t = 0.0;
  std::vector<CellStats> cells;  // per delta
};

struct AurocRow {
  std::string model;
  double t = 0.0;
  std::vector<CellStats> cells;  // per delta
};

struct RocRecord {
  std::string model;
  double t = 0.0;
  double delta = 0.0;
  int split = 0;
  std::vector<RocPoint> points;
};

struct ExperimentReport {
  std::string tag;
  int k = 0;
  std::vector<std::string> risk_names;
  std::vector<std::string> models;
  std::vector<double> t_values;
  std::vector<double> deltas;
  int splits = 0;
  std::size_t subjects = 0;
  std::vector<CIndexRow> cindex;
  std::vector<AurocRow> auroc;
  std::vector<RocRecord> roc;

  int undefined_cells() const {
    int n = 0;
    for (const auto& r : cindex)
      for (const auto& c : r.cells) n += c.failed;
    for (const auto& r : auroc)
      for (const auto& c : r.cells) n += c.failed;
    return n;
  }
};

using ModelTrainer = std::function<TrainedModel(const Cohort&, ModelKind, const TrainOptions&)>;

inline TrainedModel default_trainer(const Cohort& c, ModelKind kind, const TrainOptions& options) {
  return train_model(c, kind, options);
}

inline ExperimentReport experiment_tables(const Cohort& cohort, const ExperimentOptions& options,
                                          const ModelTrainer& trainer = default_trainer) {
  cohort.validate();
  require(options.splits >= 1, "experiment needs at least one split");
  require(!options.kinds.empty(), "experiment needs at least one model kind");
  require(!options.t_values.empty() && !options.deltas.empty(), "experiment needs t values and horizons");

  ExperimentReport report;
  report.k = cohort.k;
  report.risk_names = cohort.risk_names;
  report.t_values = options.t_values;
  report.deltas = options.deltas;
  report.splits = options.splits;
  report.subjects = cohort.size();
  const auto nd = options.deltas.size();
  for (auto kind : options.kinds) {
    const std::string name = to_string(kind);
    report.models.push_back(name);
    for (int j = 1; j <= cohort.k; ++j) {
      for (double t : options.t_values) report.cindex.push_back({name, j, t, std::vector<CellStats>(nd)});
    }
    if (cohort.k >= 2) {
      for (double t : options.t_values) report.auroc.push_back({name, t, std::vector<CellStats>(nd)});
    }
  }

  for (int split = 0; split < options.splits; ++split) {
    const auto parts = stratified_split(cohort, options.test_fraction, options.seed, 0xE5B17000ULL + split);
    const Cohort train = cohort.select(parts.train);
    const Cohort test = cohort.select(parts.test);
    TrainOptions to = options.train;
    to.seed = splitmix64(options.seed ^ (0x7EA1ULL + static_cast<std::uint64_t>(split)));
    std::size_t ci = 0;
    std::size_t ai = 0;
    for (std::size_t mi = 0; mi < options.kinds.size(); ++mi) {
      const TrainedModel model = trainer(train, options.kinds[mi], to);
      std::vector<AtRiskPredictions> preds;
      for (double t : options.t_values) preds.push_back(predict_at_risk(model, test, t));
      for (int j = 1; j <= cohort.k; ++j) {
        for (std::size_t ti = 0; ti < options.t_values.size(); ++ti, ++ci) {
          for (std::size_t di = 0; di < nd; ++di) {
            report.cindex[ci].cells[di].add(c_index(preds[ti], j, options.deltas[di]));
          }
        }
      }
      if (cohort.k >= 2) {
        for (std::size_t ti = 0; ti < options.t_values.size(); ++ti, ++ai) {
          for (std::size_t di = 0; di < nd; ++di) {
            report.auroc[ai].cells[di].add(auroc(preds[ti], options.deltas[di], options.auroc_label));
            if (auto roc = classifier_roc(preds[ti], options.deltas[di], options.auroc_label)) {
              report.roc.push_back(
                  {report.models[mi], options.t_values[ti], options.deltas[di], split, std::move(*roc)});
            }
          }
        }
      }
    }
  }
  return report;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

inline std::string cell_text(const CellStats& c, int splits) {
  if (!c.defined()) return "n/a (" + std::to_string(c.failed) + "/" + std::to_string(splits) + " failed)";
  std::string s = fixed(c.mean(), 3) + " ± " + fixed(c.sd(), 3);
  if (c.failed > 0) s += " (" + std::to_string(c.failed) + " n/a)";
  return s;
}

/// best[i][di]: whether row i holds the maximum mean among rows sharing its key.
template <class Row, class Key>
std::vector<std::vector<bool>> best_marks(const std::vector<Row>& rows, std::size_t nd, Key&& key) {
  std::vector<std::vector<bool>> best(rows.size(), std::vector<bool>(nd, false));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t di = 0; di < nd; ++di) {
      if (!rows[i].cells[di].defined()) continue;
      bool top = true;
      for (std::size_t o = 0; o < rows.size() && top; ++o) {
        if (o == i || key(rows[o]) != key(rows[i]) || !rows[o].cells[di].defined()) continue;
        if (rows[o].cells[di].mean() > rows[i].cells[di].mean()) top = false;
      }
      best[i][di] = top;
    }
  }
  return best;
}

inline auto cindex_key(const CIndexRow& r) { return std::make_pair(r.event, r.t); }
inline auto auroc_key(const AurocRow& r) { return r.t; }

}  // namespace detail

/// Delimited table: one line per (table, model, event, t, Δ) cell.
inline std::string format_report_tsv(const ExperimentReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "setting\ttable\tmodel\tevent\tt\tdelta\tmean\tsd\trepeats\tfailed\tbest\n";
  const auto nd = r.deltas.size();
  const auto cbest = detail::best_marks(r.cindex, nd, detail::cindex_key);
  for (std::size_t i = 0; i < r.cindex.size(); ++i) {
    const auto& row = r.cindex[i];
    for (std::size_t di = 0; di < nd; ++di) {
      const auto& c = row.cells[di];
      out << r.tag << "\tc-index\t" << row.model << '\t' << r.risk_names[static_cast<std::size_t>(row.event - 1)]
          << '\t' << row.t << '\t' << r.deltas[di] << '\t';
      if (c.defined()) {
        out << c.mean() << '\t' << c.sd();
      } else {
        out << "n/a\tn/a";
      }
      out << '\t' << c.values.size() << '\t' << c.failed << '\t' << (cbest[i][di] ? 1 : 0) << '\n';
    }
  }
  const auto abest = detail::best_marks(r.auroc, nd, detail::auroc_key);
  for (std::size_t i = 0; i < r.auroc.size(); ++i) {
    const auto& row = r.auroc[i];
    for (std::size_t di = 0; di < nd; ++di) {
      const auto& c = row.cells[di];
      out << r.tag << "\tauroc\t" << row.model << "\t-\t" << row.t << '\t' << r.deltas[di] << '\t';
      if (c.defined()) {
        out << c.mean() << '\t' << c.sd();
      } else {
        out << "n/a\tn/a";
      }
      out << '\t' << c.values.size() << '\t' << c.failed << '\t' << (abest[i][di] ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

/// Human-readable tables; the best mean per (event, t, Δ) is wrapped in **.
inline std::string format_report_text(const ExperimentReport& r) {
  std::ostringstream out;
  const auto nd = r.deltas.size();
  auto header = [&](const std::string& first) {
    out << first;
    for (double d : r.deltas) out << " | Δ=" << detail::number(d);
    out << '\n';
  };
  out << "Setting: " << r.tag << " (k = " << r.k << ", " << r.subjects << " subjects, " << r.splits
      << " repeats, mean ± sd)\n\n";
  out << "Concordance index\n";
  header("model | event | t");
  const auto cbest = detail::best_marks(r.cindex, nd, detail::cindex_key);
  for (std::size_t i = 0; i < r.cindex.size(); ++i) {
    const auto& row = r.cindex[i];
    out << row.model << " | " << r.risk_names[static_cast<std::size_t>(row.event - 1)] << " | "
        << detail::number(row.t);
    for (std::size_t di = 0; di < nd; ++di) {
      const auto text = detail::cell_text(row.cells[di], r.splits);
      out << " | " << (cbest[i][di] ? "**" + text + "**" : text);
    }
    out << '\n';
  }
  if (!r.auroc.empty()) {
    out << "\nAUROC (death vs awakening)\n";
    header("model | t");
    const auto abest = detail::best_marks(r.auroc, nd, detail::auroc_key);
    for (std::size_t i = 0; i < r.auroc.size(); ++i) {
      const auto& row = r.auroc[i];
      out << row.model << " | " << detail::number(row.t);
      for (std::size_t di = 0; di < nd; ++di) {
        const auto text = detail::cell_text(row.cells[di], r.splits);
        out << " | " << (abest[i][di] ? "**" + text + "**" : text);
      }
      out << '\n';
    }
  }
  return out.str();
}

/// ROC points, one line per point: model, t, delta, split, fpr, tpr.
inline std::string format_roc_points(const ExperimentReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "model,t,delta,split,fpr,tpr\n";
  for (const auto& rec : r.roc) {
    for (const auto& p : rec.points) {
      out << rec.model << ',' << rec.t << ',' << rec.delta << ',' << rec.split << ',' << p.fpr << ',' << p.tpr << '\n';
    }
  }
  return out.str();
}

struct AblationSetting {
  std::string tag;
  std::set<int> keep;
};

inline std::vector<AblationSetting> default_ablation_settings() {
  return {{"3-risk", {1, 2, 3}}, {"2-risk", {1, 2}}, {"1-risk", {1}}};
}

inline std::vector<ExperimentReport> run_ablation(const Cohort& cohort, const ExperimentOptions& options,
                                                  const ModelTrainer& trainer = default_trainer) {
  require(cohort.k == 3, "ablation expects a k = 3 cohort");
  std::vector<ExperimentReport> reports;
  for (const auto& s : default_ablation_settings()) {
    auto report = experiment_tables(relabel_for_ablation(cohort, s.keep), options, trainer);
    report.tag = s.tag;
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace dcrkit
