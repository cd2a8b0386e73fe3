#pragma once

// Standalone SVG emitters for per-subject heat maps and ROC curves. Output is
// a pure function of the input so files can be compared byte for byte.

#include "dcrkit/concordance.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/metrics.hpp"
#include "dcrkit/prognosis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace dcrkit {

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// Single-hue ramp: 0 -> near white, 1 -> dark blue.
inline std::string ramp(double p) {
  p = std::clamp(p, 0.0, 1.0);
  auto mix = [p](int lo, int hi) { return static_cast<int>(std::lround(lo + (hi - lo) * p)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(0xf7, 0x08), mix(0xfb, 0x30), mix(0xff, 0x6b));
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace svg

/// One <rect class="cell"> per (Δ, t), Δ increasing downwards, with the value
/// printed inside and a 0..1 color legend on the right.
inline std::string heatmap_svg(const HeatmapGrid& g, const std::string& title = "P(awaken)") {
  const auto rows = static_cast<int>(g.delta_values.size());
  const auto cols = static_cast<int>(g.t_values.size());
  require(rows >= 1 && cols >= 1 && g.values.rows() == rows && g.values.cols() == cols,
          "heat map: value matrix does not match its axes");
  const double cw = 48.0;
  const double ch = 36.0;
  const double left = 70.0;
  const double top = 40.0;
  const double grid_w = cw * cols;
  const double grid_h = ch * rows;
  const double legend_x = left + grid_w + 30.0;
  const double width = legend_x + 70.0;
  const double height = top + grid_h + 50.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width) << "\" height=\""
      << svg::num(height) << "\" viewBox=\"0 0 " << svg::num(width) << ' ' << svg::num(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
      << "<stop offset=\"0\" stop-color=\"" << svg::ramp(0.0) << "\"/>"
      << "<stop offset=\"1\" stop-color=\"" << svg::ramp(1.0) << "\"/></linearGradient></defs>\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << svg::num(width) << "\" height=\"" << svg::num(height)
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << svg::num(left + grid_w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
      << svg::escape(title) << "</text>\n";
  for (int r = 0; r < rows; ++r) {
    const double y = top + ch * r;
    out << "<text x=\"" << svg::num(left - 8) << "\" y=\"" << svg::num(y + ch / 2 + 4)
        << "\" text-anchor=\"end\">Δ=" << svg::label(g.delta_values[static_cast<std::size_t>(r)]) << "h</text>\n";
    for (int c = 0; c < cols; ++c) {
      const double x = left + cw * c;
      const double v = g.values(r, c);
      out << "<rect class=\"cell\" x=\"" << svg::num(x) << "\" y=\"" << svg::num(y) << "\" width=\"" << svg::num(cw)
          << "\" height=\"" << svg::num(ch) << "\" fill=\"" << svg::ramp(v) << "\" stroke=\"white\"/>\n";
      out << "<text x=\"" << svg::num(x + cw / 2) << "\" y=\"" << svg::num(y + ch / 2 + 4)
          << "\" text-anchor=\"middle\" fill=\"" << (v > 0.55 ? "white" : "black") << "\">" << svg::num(v)
          << "</text>\n";
    }
  }
  for (int c = 0; c < cols; ++c) {
    out << "<text x=\"" << svg::num(left + cw * c + cw / 2) << "\" y=\"" << svg::num(top + grid_h + 16)
        << "\" text-anchor=\"middle\">" << svg::label(g.t_values[static_cast<std::size_t>(c)]) << "</text>\n";
  }
  out << "<text x=\"" << svg::num(left + grid_w / 2) << "\" y=\"" << svg::num(top + grid_h + 36)
      << "\" text-anchor=\"middle\">prediction time t (hours)</text>\n";
  out << "<g class=\"legend\">\n";
  out << "<rect x=\"" << svg::num(legend_x) << "\" y=\"" << svg::num(top) << "\" width=\"16\" height=\""
      << svg::num(grid_h) << "\" fill=\"url(#ramp)\" stroke=\"#888\"/>\n";
  for (double tick : {0.0, 0.5, 1.0}) {
    out << "<text x=\"" << svg::num(legend_x + 22) << "\" y=\"" << svg::num(top + grid_h * (1.0 - tick) + 4)
        << "\">" << svg::num(tick) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

/// One ROC curve per repeat, grouped into named series.
struct RocSeries {
  std::string name;
  std::vector<std::vector<RocPoint>> repeats;
};

/// Parses "fpr,tpr" files, optionally with model, t, delta and split columns
/// (the layout written by the evaluate command). Rows sharing (model, t, delta)
/// form one series; split separates repeats.
inline std::vector<RocSeries> parse_roc_points(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("ROC file is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int fpr_col = column("fpr");
  const int tpr_col = column("tpr");
  if (fpr_col < 0 || tpr_col < 0) throw InputError("ROC file line 1: header must contain fpr and tpr columns");
  const int model_col = column("model");
  const int t_col = column("t");
  const int delta_col = column("delta");
  const int split_col = column("split");

  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::vector<RocPoint>>> groups;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InputError("ROC file line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields");
    }
    auto value = [&](int col) {
      const auto& s = cells[static_cast<std::size_t>(col)];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size()) {
        throw InputError("ROC file line " + std::to_string(line_no) + ": not a number: \"" + s + "\"");
      }
      return v;
    };
    RocPoint p{value(fpr_col), value(tpr_col)};
    if (!(p.fpr >= 0.0 && p.fpr <= 1.0 && p.tpr >= 0.0 && p.tpr <= 1.0)) {
      throw InputError("ROC file line " + std::to_string(line_no) + ": rates must lie in [0, 1]");
    }
    std::string name;
    if (model_col >= 0) name += cells[static_cast<std::size_t>(model_col)];
    if (t_col >= 0) name += (name.empty() ? "" : " ") + std::string("t=") + cells[static_cast<std::size_t>(t_col)];
    if (delta_col >= 0) {
      name += (name.empty() ? "" : " ") + std::string("Δ=") + cells[static_cast<std::size_t>(delta_col)];
    }
    if (name.empty()) name = "ROC";
    const std::string rep = split_col >= 0 ? cells[static_cast<std::size_t>(split_col)] : "0";
    if (groups.count(name) == 0) order.push_back(name);
    groups[name][rep].push_back(p);
  }
  if (order.empty()) throw InputError("ROC file has no points");
  std::vector<RocSeries> out;
  for (const auto& name : order) {
    RocSeries s{name, {}};
    for (auto& [rep, pts] : groups[name]) s.repeats.push_back(pts);
    out.push_back(std::move(s));
  }
  return out;
}

namespace svg {

/// Highest TPR reached at FPR <= x along a curve.
inline double tpr_at(const std::vector<RocPoint>& curve, double x) {
  double best = 0.0;
  for (const auto& p : curve) {
    if (p.fpr <= x) best = std::max(best, p.tpr);
  }
  return best;
}

}  // namespace svg

/// ROC plot with a log FPR axis from 1e-3 to 1 (FPR = 0 drawn at the floor).
/// A single repeat is drawn as its polyline; several repeats as the mean TPR
/// on a log-spaced FPR grid with a ±1 sd band.
inline std::string roc_svg(const std::vector<RocSeries>& series, const std::string& title = "ROC") {
  require(!series.empty(), "ROC plot needs at least one curve");
  const double left = 60.0;
  const double top = 40.0;
  const double pw = 360.0;
  const double ph = 300.0;
  const double width = left + pw + 170.0;
  const double height = top + ph + 50.0;
  const double lmin = std::log10(kRocFprFloor);
  auto px = [&](double fpr) { return left + pw * (std::log10(plotted_fpr(fpr)) - lmin) / (0.0 - lmin); };
  auto py = [&](double tpr) { return top + ph * (1.0 - tpr); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width) << "\" height=\""
      << svg::num(height) << "\" viewBox=\"0 0 " << svg::num(width) << ' ' << svg::num(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << svg::num(width) << "\" height=\"" << svg::num(height)
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << svg::num(left + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
      << svg::escape(title) << "</text>\n";
  out << "<rect class=\"frame\" x=\"" << svg::num(left) << "\" y=\"" << svg::num(top) << "\" width=\"" << svg::num(pw)
      << "\" height=\"" << svg::num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = -3; e <= 0; ++e) {
    const double x = px(std::pow(10.0, e));
    out << "<line x1=\"" << svg::num(x) << "\" y1=\"" << svg::num(top) << "\" x2=\"" << svg::num(x) << "\" y2=\""
        << svg::num(top + ph) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << svg::num(x) << "\" y=\"" << svg::num(top + ph + 16) << "\" text-anchor=\"middle\">1e"
        << e << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double tpr = 0.25 * i;
    out << "<text x=\"" << svg::num(left - 6) << "\" y=\"" << svg::num(py(tpr) + 4) << "\" text-anchor=\"end\">"
        << svg::num(tpr) << "</text>\n";
  }
  out << "<text x=\"" << svg::num(left + pw / 2) << "\" y=\"" << svg::num(top + ph + 36)
      << "\" text-anchor=\"middle\">false positive rate (log scale, 0 drawn at 1e-3)</text>\n";
  out << "<text x=\"16\" y=\"" << svg::num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << svg::num(top + ph / 2) << ")\">true positive rate</text>\n";

  // Log-spaced evaluation grid for averaged curves.
  std::vector<double> xs;
  for (int i = 0; i <= 60; ++i) xs.push_back(std::pow(10.0, lmin + (0.0 - lmin) * i / 60.0));

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sr = series[s];
    const char* color = palette[s % (sizeof palette / sizeof palette[0])];
    if (sr.repeats.size() == 1) {
      auto pts = sr.repeats.front();
      std::stable_sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
      });
      out << "<polyline class=\"roc\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        out << (i ? " " : "") << svg::num(px(pts[i].fpr)) << ',' << svg::num(py(pts[i].tpr));
      }
      out << "\"/>\n";
    } else {
      std::vector<double> mean(xs.size());
      std::vector<double> sd(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        double sum = 0.0;
        double sq = 0.0;
        for (const auto& rep : sr.repeats) {
          const double v = svg::tpr_at(rep, xs[i]);
          sum += v;
          sq += v * v;
        }
        const double n = static_cast<double>(sr.repeats.size());
        mean[i] = sum / n;
        sd[i] = std::sqrt(std::max(0.0, (sq - n * mean[i] * mean[i]) / (n - 1.0)));
      }
      out << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < xs.size(); ++i) {
        out << (i ? " " : "") << svg::num(px(xs[i])) << ',' << svg::num(py(std::min(1.0, mean[i] + sd[i])));
      }
      for (std::size_t i = xs.size(); i-- > 0;) {
        out << ' ' << svg::num(px(xs[i])) << ',' << svg::num(py(std::max(0.0, mean[i] - sd[i])));
      }
      out << "\"/>\n";
      out << "<polyline class=\"roc\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < xs.size(); ++i) {
        out << (i ? " " : "") << svg::num(px(xs[i])) << ',' << svg::num(py(mean[i]));
      }
      out << "\"/>\n";
    }
    const double ly = top + 12.0 + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << svg::num(left + pw + 12) << "\" y1=\"" << svg::num(ly) << "\" x2=\""
        << svg::num(left + pw + 30) << "\" y2=\"" << svg::num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << svg::num(left + pw + 34) << "\" y=\"" << svg::num(ly + 4) << "\">" << svg::escape(sr.name)
        << (sr.repeats.size() > 1 ? " (n=" + std::to_string(sr.repeats.size()) + ")" : "") << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace dcrkit
