#pragma once

// Uniform handle over the three fitted model kinds plus the model file format:
//
//   line 1  "dcrkit-model 1"
//   line 2  JSON header: kind tag, d, k, names, hyperparameters, seed, layout
//   rest    tagged binary section: "PARAMS\0\0", u64 count, then per tensor
//           u32 name length, name bytes, u64 rows, u64 cols, rows*cols
//           little-endian doubles in column-major order
//
// Every double the predictions depend on lives in the binary section, so a
// reloaded model predicts bit-identically.

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/finegray.hpp"
#include "dcrkit/network.hpp"
#include "dcrkit/survival.hpp"
#include "dcrkit/training.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dcrkit {

enum class ModelKind { finegray, deephit, ddrsa };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::finegray: return "finegray";
    case ModelKind::deephit: return "deephit";
    case ModelKind::ddrsa: return "ddrsa";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "finegray") return ModelKind::finegray;
  if (s == "deephit") return ModelKind::deephit;
  if (s == "ddrsa") return ModelKind::ddrsa;
  throw InputError("unknown model kind \"" + s + "\" (expected finegray, deephit or ddrsa)");
}

template <class Net>
struct NeuralModel {
  Net network;
  Hyperparameters hyperparameters;
  std::uint64_t seed = 0;
  double validation_score = 0.0;
};

struct FineGrayModel {
  FineGrayFit fit;
};

class TrainedModel {
 public:
  using Variant = std::variant<FineGrayModel, NeuralModel<DeepHitNetwork>, NeuralModel<DdrsaNetwork>>;

  TrainedModel() = default;
  TrainedModel(Variant model, std::vector<std::string> feature_names, std::vector<std::string> risk_names)
      : model_(std::move(model)), feature_names_(std::move(feature_names)), risk_names_(std::move(risk_names)) {}

  ModelKind kind() const { return static_cast<ModelKind>(model_.index()); }
  const Variant& variant() const { return model_; }
  int k() const { return static_cast<int>(risk_names_.size()); }
  Index width() const { return static_cast<Index>(feature_names_.size()); }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& risk_names() const { return risk_names_; }

  /// Per-event CIF at prediction time t on the model's own grid: the TimeGrid
  /// for neural kinds, the baseline step times for Fine-Gray.
  CifEstimate predict_cif(const TimeSeries& z, double t) const {
    if (z.width() != width()) {
      throw CompatibilityError("model expects d = " + std::to_string(width()) + " features, input has d = " +
                               std::to_string(z.width()));
    }
    return std::visit(
        [&](const auto& m) -> CifEstimate {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, FineGrayModel>) {
            return predict_finegray(m.fit, z, t);
          } else {
            return m.network.predict_cif(z, t);
          }
        },
        model_);
  }

  void check_compatible(const Cohort& c) const {
    if (c.width() != width() || c.k != k()) {
      throw CompatibilityError("model has d = " + std::to_string(width()) + ", k = " + std::to_string(k()) +
                               " but cohort has d = " + std::to_string(c.width()) + ", k = " + std::to_string(c.k));
    }
  }

 private:
  Variant model_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> risk_names_;
};

struct TrainReport {
  std::vector<EpochRecord> log;
  std::vector<std::pair<Hyperparameters, double>> scores;
  std::vector<std::string> notices;
};

inline TrainedModel train_model(const Cohort& cohort, ModelKind kind, const TrainOptions& options,
                                TrainReport* report = nullptr) {
  auto wrap = [&](auto&& result) {
    using Net = std::decay_t<decltype(result.network)>;
    if (report != nullptr) {
      report->log = result.log;
      report->scores = result.scores;
    }
    NeuralModel<Net> m{std::move(result.network), result.selected, options.seed, result.validation_score};
    return TrainedModel(std::move(m), cohort.feature_names, cohort.risk_names);
  };
  switch (kind) {
    case ModelKind::finegray: {
      if (report != nullptr) {
        report->notices.push_back("finegray has no hyperparameters; neural training options are ignored");
      }
      return TrainedModel(FineGrayModel{fit_finegray(cohort)}, cohort.feature_names, cohort.risk_names);
    }
    case ModelKind::deephit: return wrap(train_network<DeepHitNetwork>(cohort, options));
    case ModelKind::ddrsa: return wrap(train_network<DdrsaNetwork>(cohort, options));
  }
  throw InputError("unknown model kind");
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

using TensorMap = std::map<std::string, Matrix>;

inline Matrix column(const std::vector<double>& v) {
  return Eigen::Map<const Matrix>(v.data(), static_cast<Index>(v.size()), 1);
}

inline std::vector<double> to_vector(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

template <class T>
void put(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw InputError("model file: truncated binary section");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

inline void write_tensors(std::string& out, const std::vector<std::pair<std::string, Matrix>>& tensors) {
  out.append("PARAMS\0\0", 8);
  put(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put(out, static_cast<std::uint64_t>(m.rows()));
    put(out, static_cast<std::uint64_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
}

inline TensorMap read_tensors(const std::string& in, std::size_t pos) {
  if (in.compare(pos, 8, std::string("PARAMS\0\0", 8)) != 0) throw InputError("model file: missing PARAMS section");
  pos += 8;
  const auto count = take<std::uint64_t>(in, pos);
  TensorMap tensors;
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto len = take<std::uint32_t>(in, pos);
    if (pos + len > in.size()) throw InputError("model file: truncated tensor name");
    std::string name = in.substr(pos, len);
    pos += len;
    const auto rows = static_cast<Index>(take<std::uint64_t>(in, pos));
    const auto cols = static_cast<Index>(take<std::uint64_t>(in, pos));
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (pos + bytes > in.size()) throw InputError("model file: truncated tensor " + name);
    Matrix m(rows, cols);
    std::memcpy(m.data(), in.data() + pos, bytes);
    pos += bytes;
    tensors.emplace(std::move(name), std::move(m));
  }
  return tensors;
}

inline const Matrix& tensor(const TensorMap& t, const std::string& name) {
  const auto it = t.find(name);
  if (it == t.end()) throw InputError("model file: missing tensor " + name);
  return it->second;
}

template <class Net>
void serialize_neural(const NeuralModel<Net>& m, nlohmann::json& header,
                      std::vector<std::pair<std::string, Matrix>>& tensors) {
  const auto& net = m.network;
  const auto& s = net.shape();
  const auto& h = m.hyperparameters;
  header["shape"] = {{"hidden", s.hidden},         {"attention_width", s.attention_width},
                     {"head_width", s.head_width}, {"decoder_width", s.decoder_width},
                     {"m", s.m}};
  header["hyperparameters"] = {
      {"learning_rate", h.learning_rate}, {"alpha", h.alpha}, {"beta", h.beta}, {"dropout", h.dropout}};
  header["seed"] = m.seed;
  header["validation_score"] = m.validation_score;
  header["grid"] = net.grid().deltas;
  header["masked_columns"] = net.encoding().masked_columns;
  tensors.emplace_back("meta.grid", column(net.grid().deltas));
  tensors.emplace_back("meta.hyperparameters", column({h.learning_rate, h.alpha, h.beta, h.dropout}));
  tensors.emplace_back("meta.validation_score", column({m.validation_score}));
  tensors.emplace_back("encoding.mean", net.encoding().mean);
  tensors.emplace_back("encoding.scale", net.encoding().scale);
  const auto& ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i) tensors.emplace_back(ps.name(i), ps.value(i));
}

template <class Net>
NeuralModel<Net> deserialize_neural(const nlohmann::json& header, const TensorMap& tensors) {
  NetworkShape shape;
  const auto& js = header.at("shape");
  shape.hidden = js.at("hidden").get<Index>();
  shape.attention_width = js.at("attention_width").get<Index>();
  shape.head_width = js.at("head_width").get<Index>();
  shape.decoder_width = js.at("decoder_width").get<Index>();
  shape.k = header.at("k").get<int>();
  FeatureEncoding enc;
  enc.mean = tensor(tensors, "encoding.mean");
  enc.scale = tensor(tensors, "encoding.scale");
  enc.masked_columns = header.at("masked_columns").get<std::vector<Index>>();
  shape.features = enc.raw_width();
  shape.step_width = enc.step_width();
  TimeGrid grid{to_vector(tensor(tensors, "meta.grid"))};
  shape.m = grid.size();
  NeuralModel<Net> m;
  m.network = Net::from_parts(shape, std::move(enc), grid);
  auto& ps = m.network.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Matrix& v = tensor(tensors, ps.name(i));
    if (v.rows() != ps.value(i).rows() || v.cols() != ps.value(i).cols()) {
      throw InputError("model file: tensor " + ps.name(i) + " has the wrong shape");
    }
    ps.value(i) = v;
  }
  const auto hp = to_vector(tensor(tensors, "meta.hyperparameters"));
  m.hyperparameters = {hp.at(0), hp.at(1), hp.at(2), hp.at(3)};
  m.seed = header.at("seed").get<std::uint64_t>();
  m.validation_score = tensor(tensors, "meta.validation_score")(0, 0);
  return m;
}

}  // namespace detail

inline std::string format_model(const TrainedModel& model) {
  nlohmann::json header;
  header["kind"] = to_string(model.kind());
  header["d"] = model.width();
  header["k"] = model.k();
  header["feature_names"] = model.feature_names();
  header["risk_names"] = model.risk_names();
  std::vector<std::pair<std::string, Matrix>> tensors;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, FineGrayModel>) {
          const auto& fit = m.fit;
          header["columns"] = fit.columns;
          std::vector<int> iterations;
          for (const auto& e : fit.events) iterations.push_back(e.iterations);
          header["iterations"] = iterations;
          tensors.emplace_back("mean", fit.mean);
          tensors.emplace_back("scale", fit.scale);
          tensors.emplace_back("censoring.times", detail::column(fit.censoring.times));
          tensors.emplace_back("censoring.survival", detail::column(fit.censoring.survival));
          for (std::size_t j = 0; j < fit.events.size(); ++j) {
            const auto& e = fit.events[j];
            const auto prefix = "event" + std::to_string(j + 1) + ".";
            tensors.emplace_back(prefix + "coef_standardized", e.coef_standardized);
            tensors.emplace_back(prefix + "coef", e.coef);
            tensors.emplace_back(prefix + "times", detail::column(e.times));
            tensors.emplace_back(prefix + "cumhaz", detail::column(e.cumhaz));
            tensors.emplace_back(prefix + "score_norm", detail::column({e.score_norm}));
          }
        } else {
          detail::serialize_neural(m, header, tensors);
        }
      },
      model.variant());
  std::string out = "dcrkit-model 1\n";
  out += header.dump();
  out += '\n';
  detail::write_tensors(out, tensors);
  return out;
}

namespace detail {

inline TrainedModel parse_model_unchecked(const std::string& bytes) {
  const std::string magic = "dcrkit-model 1\n";
  if (bytes.compare(0, magic.size(), magic) != 0) throw InputError("not a dcrkit model file");
  const auto header_end = bytes.find('\n', magic.size());
  if (header_end == std::string::npos) throw InputError("model file: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(magic.size(), header_end - magic.size()));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file header: ") + e.what());
  }
  const auto tensors = detail::read_tensors(bytes, header_end + 1);
  const auto kind = parse_model_kind(header.at("kind").get<std::string>());
  auto features = header.at("feature_names").get<std::vector<std::string>>();
  auto risks = header.at("risk_names").get<std::vector<std::string>>();
  switch (kind) {
    case ModelKind::finegray: {
      FineGrayFit fit;
      fit.k = header.at("k").get<int>();
      fit.width = header.at("d").get<Index>();
      fit.columns = header.at("columns").get<std::vector<Index>>();
      fit.mean = detail::tensor(tensors, "mean");
      fit.scale = detail::tensor(tensors, "scale");
      fit.censoring.times = detail::to_vector(detail::tensor(tensors, "censoring.times"));
      fit.censoring.survival = detail::to_vector(detail::tensor(tensors, "censoring.survival"));
      const auto iterations = header.at("iterations").get<std::vector<int>>();
      for (int j = 1; j <= fit.k; ++j) {
        const auto prefix = "event" + std::to_string(j) + ".";
        FineGrayEventFit e;
        e.coef_standardized = detail::tensor(tensors, prefix + "coef_standardized");
        e.coef = detail::tensor(tensors, prefix + "coef");
        e.times = detail::to_vector(detail::tensor(tensors, prefix + "times"));
        e.cumhaz = detail::to_vector(detail::tensor(tensors, prefix + "cumhaz"));
        e.score_norm = detail::tensor(tensors, prefix + "score_norm")(0, 0);
        e.iterations = iterations.at(static_cast<std::size_t>(j - 1));
        fit.events.push_back(std::move(e));
      }
      return {FineGrayModel{std::move(fit)}, std::move(features), std::move(risks)};
    }
    case ModelKind::deephit:
      return {deserialize_neural<DeepHitNetwork>(header, tensors), std::move(features), std::move(risks)};
    case ModelKind::ddrsa:
      return {deserialize_neural<DdrsaNetwork>(header, tensors), std::move(features), std::move(risks)};
  }
  throw InputError("unknown model kind");
}

}  // namespace detail

inline TrainedModel parse_model(const std::string& bytes) {
  try {
    return detail::parse_model_unchecked(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file header: ") + e.what());
  }
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, format_model(model));
}

inline TrainedModel load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace dcrkit
