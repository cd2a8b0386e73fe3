// dcrkit command-line front end.
//
//   dcrkit simulate  --config sim.cfg --out cohort.jsonl
//   dcrkit ingest    --input stream.txt [--input ...] --out cohort.jsonl
//   dcrkit train     --cohort c.jsonl --model deephit --config train.cfg --out model.dcr
//   dcrkit predict   --model model.dcr --cohort c.jsonl --t 6 --deltas 24,48,72 --out pred.csv
//   dcrkit evaluate  --model model.dcr --cohort test.jsonl --out-dir eval/
//   dcrkit evaluate  --cohort c.jsonl --config exp.cfg --out-dir eval/   (repeated splits)
//   dcrkit ablate    --cohort c.jsonl --config exp.cfg --out-dir ablate/
//   dcrkit plot      --input heat.csv --kind heatmap --out heat.svg
//
// Exit codes: 0 success, 2 input/config error, 3 training error, 4 model/data
// incompatibility.

#include "dcrkit/cohort_io.hpp"
#include "dcrkit/config.hpp"
#include "dcrkit/experiment.hpp"
#include "dcrkit/metrics.hpp"
#include "dcrkit/model.hpp"
#include "dcrkit/prognosis.hpp"
#include "dcrkit/simulator.hpp"
#include "dcrkit/svg.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dcrkit;

namespace {

std::optional<std::uint64_t> seed_override;

Config load_config(const std::string& path) {
  Config c = path.empty() ? Config{} : Config::load(path);
  if (seed_override) c.set("seed", std::to_string(*seed_override));
  return c;
}

void echo_config(const Config& c) {
  std::cout << "# effective config\n" << c.effective();
}

std::string number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InputError(flag + ": not a number: \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw InputError(flag + " must list at least one value");
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& out, std::optional<long long> n_flag) {
  Config c = load_config(config_path);
  c.check_keys(simulate_keys());
  long long n = 0;
  const GenerativeConfig g = generative_config(c, &n);
  if (n_flag) n = *n_flag;
  if (n < 1) throw InputError("--n must be >= 1");
  echo_config(c);
  write_cohort(simulate(g, static_cast<std::size_t>(n)), out);
  std::cout << "wrote " << n << " subjects to " << out << '\n';
  return 0;
}

int cmd_ingest(const std::vector<std::string>& inputs, const std::vector<std::string>& outcomes, int k,
               const std::vector<std::string>& stream_names, const std::string& out) {
  require(!inputs.empty(), "ingest needs at least one --input");
  require(outcomes.empty() || outcomes.size() == inputs.size(), "give one --outcome per --input or none");
  require(k >= 1, "--k must be >= 1");
  Cohort c;
  c.k = k;
  c.risk_names = default_risk_names(k);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Subject s;
    s.series = ingest_stream(parse_stream_matrix(read_file(inputs[i])));
    if (i == 0) {
      std::vector<std::string> names = stream_names;
      const auto q = s.series.width() / kSummaryStatistics;
      if (names.empty()) {
        for (Index f = 0; f < q; ++f) names.push_back("f" + std::to_string(f + 1));
      }
      require(static_cast<Index>(names.size()) == q, "--names must list one name per stream column");
      c.feature_names = summary_feature_names(names);
    }
    s.outcome = {0, s.series.last_time()};
    if (!outcomes.empty()) {
      const auto& o = outcomes[i];
      const auto colon = o.find(':');
      require(colon != std::string::npos, "--outcome must look like EVENT:TIME, got \"" + o + "\"");
      try {
        s.outcome.event = std::stoi(o.substr(0, colon));
        s.outcome.time = std::stod(o.substr(colon + 1));
      } catch (const std::exception&) {
        throw InputError("--outcome must look like EVENT:TIME, got \"" + o + "\"");
      }
    }
    c.subjects.push_back(std::move(s));
  }
  c.validate();
  write_cohort(c, out);
  std::cout << "wrote " << c.size() << " subjects (d = " << c.width() << ") to " << out << '\n';
  return 0;
}

int cmd_train(const std::string& cohort_path, const std::string& kind_name, const std::string& config_path,
              const std::string& out, std::string log_path) {
  const Cohort cohort = read_cohort(cohort_path);
  const ModelKind kind = parse_model_kind(kind_name);
  Config c = load_config(config_path);
  c.check_keys(train_keys());
  const TrainOptions options = train_options(c);
  echo_config(c);
  TrainReport report;
  const TrainedModel model = train_model(cohort, kind, options, &report);
  for (const auto& notice : report.notices) std::cout << "notice: " << notice << '\n';
  save_model(model, out);
  if (log_path.empty()) log_path = out + ".log";
  std::ostringstream log;
  log << "epoch\ttrain_loss\tvalidation_cindex\n";
  for (const auto& e : report.log) {
    log << e.epoch << '\t' << number(e.train_loss) << '\t'
        << (std::isfinite(e.validation_score) ? number(e.validation_score) : "n/a") << '\n';
  }
  if (!report.scores.empty()) {
    log << "# learning_rate\talpha\tbeta\tdropout\tvalidation_score\n";
    for (const auto& [h, s] : report.scores) {
      log << "# " << number(h.learning_rate) << '\t' << number(h.alpha) << '\t' << number(h.beta) << '\t'
          << number(h.dropout) << '\t' << number(s) << '\n';
    }
  }
  write_file_atomic(log_path, log.str());
  std::cout << "wrote " << to_string(kind) << " model to " << out << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& cohort_path, double t, const std::string& deltas_text,
                const std::string& variant, std::optional<double> alpha, std::optional<double> alpha_death,
                std::optional<long long> heatmap_subject, const std::string& t_values_text, const std::string& out) {
  const TrainedModel model = load_model(model_path);
  const Cohort cohort = read_cohort(cohort_path);
  model.check_compatible(cohort);
  require(variant == "conditional" || variant == "alpha", "--variant must be conditional or alpha");
  AlphaAssumption a;
  if (variant == "alpha") {
    require(alpha.has_value(), "--variant alpha requires --alpha");
    a.alpha = *alpha;
    a.alpha_death = alpha_death;
    a.validate();
  }
  const std::vector<double> deltas = parse_list(deltas_text, "--deltas");

  if (heatmap_subject) {
    require(*heatmap_subject >= 0 && *heatmap_subject < static_cast<long long>(cohort.size()),
            "--heatmap subject index out of range");
    std::vector<double> t_values = t_values_text.empty() ? HeatmapGrid{}.t_values : parse_list(t_values_text, "--t-values");
    const auto& z = cohort.subjects[static_cast<std::size_t>(*heatmap_subject)].series;
    const auto grid = heatmap_grid(model, z, t_values, deltas,
                                   variant == "alpha" ? HeatmapVariant::alpha : HeatmapVariant::conditional, a);
    write_file_atomic(out, format_heatmap(grid));
    std::cout << "wrote heat map for subject " << *heatmap_subject << " to " << out << '\n';
    return 0;
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "subject,t,delta";
  for (const auto& r : cohort.risk_names) csv << ",F_" << r;
  csv << (variant == "conditional" ? ",p_awaken,p_death,label\n" : ",p_awaken_alpha,p_death_alpha\n");
  std::size_t written = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& z = cohort.subjects[i].series;
    if (z.timestamps(0) > t) continue;
    const CifEstimate cif = model.predict_cif(z, t);
    if (written == 0 && model.kind() != ModelKind::finegray) {
      for (double d : deltas) {
        if (d > cif.grid.back()) {
          std::cerr << "warning: delta " << d << " lies beyond the model horizon " << cif.grid.back()
                    << "; the CIF is held at its last grid value\n";
        }
      }
    }
    for (double d : deltas) {
      csv << i << ',' << t << ',' << d;
      for (int j = 1; j <= cif.k(); ++j) csv << ',' << cif.at(j, d);
      if (variant == "conditional") {
        const double pa = p_awaken(cif, d);
        const double pd = p_death(cif, d);
        csv << ',' << pa << ',' << pd << ',' << to_string(classify(pa, pd));
      } else {
        csv << ',' << p_awaken_unconditional(cif, d, a) << ',' << p_death_unconditional(cif, d, a);
      }
      csv << '\n';
    }
    ++written;
  }
  write_file_atomic(out, csv.str());
  std::cout << "wrote predictions for " << written << " subjects to " << out << '\n';
  return 0;
}

void write_report(const ExperimentReport& r, const fs::path& dir, const std::string& stem) {
  write_file_atomic(dir / (stem + ".tsv"), format_report_tsv(r));
  write_file_atomic(dir / (stem + ".txt"), format_report_text(r));
  write_file_atomic(dir / (stem + "_roc.csv"), format_roc_points(r));
}

int cmd_evaluate(const std::string& model_path, const std::string& cohort_path, const std::string& config_path,
                 const std::string& out_dir) {
  const Cohort cohort = read_cohort(cohort_path);
  fs::create_directories(out_dir);
  Config c = load_config(config_path);
  c.check_keys(experiment_keys());
  const ExperimentOptions options = experiment_options(c);
  echo_config(c);
  if (model_path.empty()) {
    const auto report = experiment_tables(cohort, options);
    write_report(report, out_dir, "report");
    std::cout << format_report_text(report);
    return 0;
  }
  // A fixed model scored once on the given cohort.
  const TrainedModel model = load_model(model_path);
  model.check_compatible(cohort);
  std::ostringstream tsv;
  tsv.precision(17);
  tsv << "metric\tevent\tt\tdelta\tvalue\n";
  std::ostringstream roc;
  roc.precision(17);
  roc << "model,t,delta,split,fpr,tpr\n";
  for (double t : options.t_values) {
    const auto preds = predict_at_risk(model, cohort, t);
    for (int j = 1; j <= cohort.k; ++j) {
      for (double d : options.deltas) {
        const auto v = c_index(preds, j, d);
        tsv << "c-index\t" << cohort.risk_names[static_cast<std::size_t>(j - 1)] << '\t' << t << '\t' << d << '\t'
            << (v ? number(*v) : "n/a") << '\n';
      }
    }
    if (cohort.k < 2) continue;
    for (double d : options.deltas) {
      const auto v = auroc(preds, d, options.auroc_label);
      tsv << "auroc\t-\t" << t << '\t' << d << '\t' << (v ? number(*v) : "n/a") << '\n';
      if (const auto points = classifier_roc(preds, d, options.auroc_label)) {
        for (const auto& p : *points) {
          roc << to_string(model.kind()) << ',' << t << ',' << d << ",0," << p.fpr << ',' << p.tpr << '\n';
        }
      }
    }
  }
  write_file_atomic(fs::path(out_dir) / "metrics.tsv", tsv.str());
  write_file_atomic(fs::path(out_dir) / "roc.csv", roc.str());
  std::cout << tsv.str();
  return 0;
}

int cmd_ablate(const std::string& cohort_path, const std::string& config_path, const std::string& out_dir) {
  const Cohort cohort = read_cohort(cohort_path);
  require(cohort.k == 3, "ablate expects a cohort with k = 3 risks");
  Config c = load_config(config_path);
  c.check_keys(experiment_keys());
  const ExperimentOptions options = experiment_options(c);
  echo_config(c);
  fs::create_directories(out_dir);
  std::string combined;
  for (const auto& report : run_ablation(cohort, options)) {
    write_report(report, out_dir, report.tag);
    combined += format_report_text(report) + "\n";
  }
  write_file_atomic(fs::path(out_dir) / "ablation.txt", combined);
  std::cout << combined;
  return 0;
}

int cmd_plot(const std::string& input, const std::string& kind, const std::string& out, const std::string& title) {
  const std::string text = read_file(input);
  if (kind == "heatmap") {
    write_file_atomic(out, heatmap_svg(parse_heatmap(text), title.empty() ? "P(awaken)" : title));
  } else if (kind == "roc") {
    write_file_atomic(out, roc_svg(parse_roc_points(text), title.empty() ? "ROC" : title));
  } else {
    throw InputError("--kind must be heatmap or roc");
  }
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcrkit: dynamic competing-risks survival toolkit"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "overrides the config seed"); };

  std::string config, out, cohort_path, model_path, out_dir, input;
  auto* sim = app.add_subcommand("simulate", "draw a synthetic cohort");
  std::optional<long long> n;
  sim->add_option("--config", config, "simulation config")->required();
  sim->add_option("--out", out, "cohort file to write")->required();
  sim->add_option("--n", n, "subject count (overrides config)");
  add_seed(sim);

  auto* ing = app.add_subcommand("ingest", "downsample per-second streams into hourly summary features");
  std::vector<std::string> inputs, outcomes, names_list;
  int k = 3;
  ing->add_option("--input", inputs, "stream file (header \"q seconds\"), one per subject")->required();
  ing->add_option("--outcome", outcomes, "EVENT:TIME per input (default censored at the last hour)");
  ing->add_option("--k", k, "declared risk count");
  ing->add_option("--names", names_list, "stream column names")->delimiter(',');
  ing->add_option("--out", out, "cohort file to write")->required();
  add_seed(ing);

  auto* tr = app.add_subcommand("train", "fit a model");
  std::string kind_name, log_path;
  tr->add_option("--cohort", cohort_path)->required();
  tr->add_option("--model", kind_name, "finegray, deephit or ddrsa")->required();
  tr->add_option("--config", config, "training config");
  tr->add_option("--out", out, "model file to write")->required();
  tr->add_option("--log", log_path, "training log (default: <out>.log)");
  add_seed(tr);

  auto* pr = app.add_subcommand("predict", "per-subject CIFs and classifier probabilities");
  double t = 0.0;
  std::string deltas = "24,48,72", variant = "conditional", t_values;
  std::optional<double> alpha, alpha_death;
  std::optional<long long> heatmap;
  pr->add_option("--model", model_path)->required();
  pr->add_option("--cohort", cohort_path)->required();
  pr->add_option("--t", t, "prediction time (hours)");
  pr->add_option("--deltas", deltas, "comma-separated horizons");
  pr->add_option("--variant", variant, "conditional or alpha");
  pr->add_option("--alpha", alpha, "withdrawal-to-awakening share for the alpha variant");
  pr->add_option("--alpha-death", alpha_death, "withdrawal-to-death share (default 1 - alpha)");
  pr->add_option("--heatmap", heatmap, "write the heat-map matrix for this subject index instead");
  pr->add_option("--t-values", t_values, "heat-map prediction times (default 1..12)");
  pr->add_option("--out", out)->required();
  add_seed(pr);

  auto* ev = app.add_subcommand("evaluate", "metric tables for a model, or repeated-split experiments");
  ev->add_option("--model", model_path, "score this model once instead of running repeated splits");
  ev->add_option("--cohort", cohort_path)->required();
  ev->add_option("--config", config, "experiment config");
  ev->add_option("--out-dir", out_dir)->required();
  add_seed(ev);

  auto* ab = app.add_subcommand("ablate", "repeat experiments with 3, 2 and 1 risks");
  ab->add_option("--cohort", cohort_path)->required();
  ab->add_option("--config", config, "experiment config");
  ab->add_option("--out-dir", out_dir)->required();
  add_seed(ab);

  auto* pl = app.add_subcommand("plot", "render a heat map or ROC file as SVG");
  std::string plot_kind, title;
  pl->add_option("--input", input)->required();
  pl->add_option("--kind", plot_kind, "heatmap or roc")->required();
  pl->add_option("--out", out)->required();
  pl->add_option("--title", title);
  add_seed(pl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  seed_override = seed;

  try {
    if (*sim) return cmd_simulate(config, out, n);
    if (*ing) return cmd_ingest(inputs, outcomes, k, names_list, out);
    if (*tr) return cmd_train(cohort_path, kind_name, config, out, log_path);
    if (*pr) return cmd_predict(model_path, cohort_path, t, deltas, variant, alpha, alpha_death, heatmap, t_values, out);
    if (*ev) return cmd_evaluate(model_path, cohort_path, config, out_dir);
    if (*ab) return cmd_ablate(cohort_path, config, out_dir);
    if (*pl) return cmd_plot(input, plot_kind, out, title);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return 3;
  } catch (const CompatibilityError& e) {
    std::cerr << "incompatible: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
