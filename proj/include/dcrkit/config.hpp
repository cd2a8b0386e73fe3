#pragma once

// Flat "key = value" configuration files. '#' starts a comment; lists are
// comma-separated. Every command declares the keys it accepts, so typos are
// reported instead of silently ignored.

#include "dcrkit/core.hpp"
#include "dcrkit/experiment.hpp"
#include "dcrkit/model.hpp"
#include "dcrkit/simulator.hpp"
#include "dcrkit/training.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dcrkit {

class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw InputError("config line " + std::to_string(line_no) + ": missing key");
      if (c.entries_.count(key) != 0) {
        throw InputError("config line " + std::to_string(line_no) + ": duplicate key \"" + key + "\"");
      }
      c.entries_[key] = {trim(line.substr(eq + 1)), line_no};
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) { return parse(read_file(path)); }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) { entries_[key] = {value, 0}; }

  /// Rejects keys outside `allowed`, naming the first offender.
  void check_keys(const std::set<std::string>& allowed) const {
    for (const auto& [key, e] : entries_) {
      if (allowed.count(key) == 0) throw InputError(where(key) + ": unknown key \"" + key + "\"");
    }
  }

  double real(const std::string& key, double fallback) const {
    const double v = has(key) ? parse_real(key, entries_.at(key).value) : fallback;
    echo(key, format(v));
    return v;
  }

  long long integer(const std::string& key, long long fallback) const {
    long long v = fallback;
    if (has(key)) {
      const auto& s = entries_.at(key).value;
      std::size_t used = 0;
      try {
        v = std::stoll(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size()) throw InputError(where(key) + ": " + key + " must be an integer, got \"" + s + "\"");
    }
    echo(key, std::to_string(v));
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const std::string v = has(key) ? entries_.at(key).value : fallback;
    echo(key, v);
    return v;
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const {
    std::vector<double> v = fallback;
    if (has(key)) {
      v.clear();
      for (const auto& item : split(entries_.at(key).value)) v.push_back(parse_real(key, item));
      if (v.empty()) throw InputError(where(key) + ": " + key + " must list at least one value");
    }
    std::string shown;
    for (std::size_t i = 0; i < v.size(); ++i) shown += (i ? ", " : "") + format(v[i]);
    echo(key, shown);
    return v;
  }

  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& fallback) const {
    std::vector<std::string> v = has(key) ? split(entries_.at(key).value) : fallback;
    std::string shown;
    for (std::size_t i = 0; i < v.size(); ++i) shown += (i ? ", " : "") + v[i];
    echo(key, shown);
    return v;
  }

  /// Throws InputError naming `key` unless `ok`.
  void check(bool ok, const std::string& key, const std::string& message) const {
    if (!ok) throw InputError(where(key) + ": " + key + " " + message);
  }

  /// Every key read so far with its resolved value, defaults included.
  std::string effective() const {
    std::ostringstream out;
    for (const auto& [key, value] : echo_) out << key << " = " << value << '\n';
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static std::string format(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
  }

  std::string where(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end() || it->second.line == 0) return "config";
    return "config line " + std::to_string(it->second.line);
  }

  double parse_real(const std::string& key, const std::string& s) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InputError(where(key) + ": " + key + " must be a number, got \"" + s + "\"");
    return v;
  }

  void echo(const std::string& key, const std::string& value) const { echo_[key] = value; }

  std::map<std::string, Entry> entries_;
  mutable std::map<std::string, std::string> echo_;
};

inline const std::set<std::string>& simulate_keys() {
  static const std::set<std::string> keys{"n",        "k",          "d_static", "d_dynamic",   "length_min",
                                          "length_max", "step_hours", "walk_sd", "rates",       "censor_rate",
                                          "policy",   "seed",       "beta_1",   "beta_2",      "beta_3",
                                          "beta_4",   "beta_5",     "beta_6",   "beta_7",      "beta_8"};
  return keys;
}

inline const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys{
      "learning_rate", "alpha",     "beta",         "dropout",    "hidden",      "attention_width",
      "head_width",    "decoder_width", "grid_bins", "grid_step",  "grid_horizon", "batch_size",
      "max_epochs",    "patience",  "sigma",        "validation_fraction", "eval_deltas", "seed"};
  return keys;
}

inline const std::set<std::string>& experiment_keys() {
  static const std::set<std::string> keys = [] {
    auto k = train_keys();
    k.insert({"models", "splits", "test_fraction", "t_values", "deltas", "auroc_label"});
    return k;
  }();
  return keys;
}

/// Reads a simulation config; `n` (subject count) is returned separately.
inline GenerativeConfig generative_config(const Config& c, long long* n = nullptr) {
  GenerativeConfig g;
  const auto count = c.integer("n", 1000);
  c.check(count >= 1, "n", "must be >= 1");
  if (n != nullptr) *n = count;
  g.k = static_cast<int>(c.integer("k", 3));
  c.check(g.k >= 1 && g.k <= 8, "k", "must lie in 1..8");
  g.d_static = static_cast<int>(c.integer("d_static", 0));
  c.check(g.d_static >= 0, "d_static", "must be >= 0");
  g.d_dynamic = static_cast<int>(c.integer("d_dynamic", 4));
  c.check(g.d_dynamic >= 0 && g.width() >= 1, "d_dynamic", "must be >= 0 with d_static + d_dynamic >= 1");
  g.length_min = static_cast<int>(c.integer("length_min", 6));
  c.check(g.length_min >= 1, "length_min", "must be >= 1");
  g.length_max = static_cast<int>(c.integer("length_max", 12));
  c.check(g.length_max >= g.length_min, "length_max", "must be >= length_min");
  g.step_hours = c.real("step_hours", 1.0);
  c.check(g.step_hours > 0.0, "step_hours", "must be positive");
  g.walk_sd = c.real("walk_sd", 0.3);
  c.check(g.walk_sd >= 0.0, "walk_sd", "must be >= 0");
  g.rates = c.reals("rates", std::vector<double>(static_cast<std::size_t>(g.k), 0.02));
  c.check(static_cast<int>(g.rates.size()) == g.k, "rates", "must list k values");
  for (double r : g.rates) c.check(r > 0.0 && std::isfinite(r), "rates", "must be positive and finite");
  for (int j = 1; j <= g.k; ++j) {
    const std::string key = "beta_" + std::to_string(j);
    auto b = c.reals(key, std::vector<double>(static_cast<std::size_t>(g.width()), 0.0));
    c.check(static_cast<int>(b.size()) == g.width(), key, "must list d_dynamic + d_static values");
    g.betas.push_back(std::move(b));
  }
  g.censor_rate = c.real("censor_rate", 0.01);
  c.check(g.censor_rate >= 0.0 && std::isfinite(g.censor_rate), "censor_rate", "must be >= 0 and finite");
  g.policy = c.real("policy", 0.0);
  g.seed = static_cast<std::uint64_t>(c.integer("seed", 1));
  g.validate();
  return g;
}

inline TrainOptions train_options(const Config& c) {
  TrainOptions o;
  o.grid.learning_rates = c.reals("learning_rate", o.grid.learning_rates);
  for (double v : o.grid.learning_rates) c.check(v > 0.0, "learning_rate", "must be positive");
  o.grid.alphas = c.reals("alpha", o.grid.alphas);
  for (double v : o.grid.alphas) c.check(v > 0.0, "alpha", "must be positive");
  o.grid.betas = c.reals("beta", o.grid.betas);
  for (double v : o.grid.betas) c.check(v > 0.0, "beta", "must be positive");
  o.grid.dropouts = c.reals("dropout", o.grid.dropouts);
  for (double v : o.grid.dropouts) c.check(v >= 0.0 && v < 1.0, "dropout", "must lie in [0, 1)");
  o.hidden = c.integer("hidden", o.hidden);
  c.check(o.hidden >= 1, "hidden", "must be >= 1");
  o.attention_width = c.integer("attention_width", 0);
  c.check(o.attention_width >= 0, "attention_width", "must be >= 0 (0 = hidden)");
  o.head_width = c.integer("head_width", 0);
  c.check(o.head_width >= 0, "head_width", "must be >= 0 (0 = 2 * grid bins)");
  o.decoder_width = c.integer("decoder_width", 0);
  c.check(o.decoder_width >= 0, "decoder_width", "must be >= 0 (0 = hidden)");
  o.grid_bins = c.integer("grid_bins", o.grid_bins);
  c.check(o.grid_bins >= 1, "grid_bins", "must be >= 1");
  const double step = c.real("grid_step", 0.0);
  c.check(step >= 0.0, "grid_step", "must be >= 0 (0 = equal-width bins)");
  const double horizon = c.real("grid_horizon", 0.0);
  c.check(horizon >= 0.0, "grid_horizon", "must be >= 0 (0 = from the data)");
  c.check(!(horizon > 0.0 && step == 0.0), "grid_horizon", "requires grid_step");
  if (step > 0.0) {
    c.check(horizon > 0.0, "grid_step", "requires grid_horizon");
    o.time_grid = TimeGrid::stepped(step, horizon);
  }
  o.batch_size = static_cast<int>(c.integer("batch_size", o.batch_size));
  c.check(o.batch_size >= 1, "batch_size", "must be >= 1");
  o.max_epochs = static_cast<int>(c.integer("max_epochs", o.max_epochs));
  c.check(o.max_epochs >= 1, "max_epochs", "must be >= 1");
  o.patience = static_cast<int>(c.integer("patience", o.patience));
  c.check(o.patience >= 1, "patience", "must be >= 1");
  o.sigma = c.real("sigma", o.sigma);
  c.check(o.sigma > 0.0, "sigma", "must be positive");
  o.validation_fraction = c.real("validation_fraction", o.validation_fraction);
  c.check(o.validation_fraction > 0.0 && o.validation_fraction < 1.0, "validation_fraction", "must lie in (0, 1)");
  o.eval_deltas = c.reals("eval_deltas", o.eval_deltas);
  for (double v : o.eval_deltas) c.check(v > 0.0, "eval_deltas", "must be positive");
  o.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<long long>(o.seed)));
  return o;
}

inline ExperimentOptions experiment_options(const Config& c) {
  ExperimentOptions e;
  e.train = train_options(c);
  e.seed = e.train.seed;
  e.kinds.clear();
  for (const auto& name : c.words("models", {"finegray", "deephit", "ddrsa"})) {
    try {
      e.kinds.push_back(parse_model_kind(name));
    } catch (const InputError& err) {
      c.check(false, "models", std::string("entry invalid: ") + err.what());
    }
  }
  c.check(!e.kinds.empty(), "models", "must name at least one model kind");
  e.splits = static_cast<int>(c.integer("splits", e.splits));
  c.check(e.splits >= 1, "splits", "must be >= 1");
  e.test_fraction = c.real("test_fraction", e.test_fraction);
  c.check(e.test_fraction > 0.0 && e.test_fraction < 1.0, "test_fraction", "must lie in (0, 1)");
  e.t_values = c.reals("t_values", e.t_values);
  for (double v : e.t_values) c.check(v >= 0.0, "t_values", "must be >= 0");
  e.deltas = c.reals("deltas", e.deltas);
  for (double v : e.deltas) c.check(v > 0.0, "deltas", "must be positive");
  const std::string label = c.text("auroc_label", "eventual");
  c.check(label == "eventual" || label == "horizon", "auroc_label", "must be \"eventual\" or \"horizon\"");
  e.auroc_label = label == "horizon" ? AurocLabel::horizon : AurocLabel::eventual;
  return e;
}

}  // namespace dcrkit
