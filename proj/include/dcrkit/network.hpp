#pragma once

// Shared encoder for the neural DCR models: per-step inputs (standardized
// features, missingness indicators, gap to the next step) feed a GRU whose
// states are pooled by attention into a context vector. A decoder turns the
// context into k*m logits, and one softmax over all of them yields the pmf.
// A separate MLP predicts the next step's features from (H^(ℓ), gap).

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/diffcore.hpp"
#include "dcrkit/survival.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dcrkit {

/// Column standardization plus missingness indicators for the time-varying
/// columns. Unobserved cells encode as 0 (the standardized mean).
struct FeatureEncoding {
  Vector mean;
  Vector scale;
  std::vector<Index> masked_columns;

  Index raw_width() const { return mean.size(); }
  Index step_width() const { return raw_width() + static_cast<Index>(masked_columns.size()); }

  static FeatureEncoding fit(const Cohort& c) {
    const Index d = c.width();
    Vector sum = Vector::Zero(d);
    Vector sq = Vector::Zero(d);
    Vector count = Vector::Zero(d);
    BoolVector is_static = BoolVector::Constant(d, true);
    for (const auto& s : c.subjects) {
      const auto& z = s.series;
      is_static = is_static && z.static_mask;
      for (Index l = 0; l < z.length(); ++l) {
        for (Index f = 0; f < d; ++f) {
          if (!z.observed(l, f)) continue;
          sum(f) += z.features(l, f);
          sq(f) += z.features(l, f) * z.features(l, f);
          count(f) += 1.0;
        }
      }
    }
    FeatureEncoding enc;
    enc.mean = Vector::Zero(d);
    enc.scale = Vector::Ones(d);
    for (Index f = 0; f < d; ++f) {
      if (count(f) > 0.0) {
        enc.mean(f) = sum(f) / count(f);
        const double var = sq(f) / count(f) - enc.mean(f) * enc.mean(f);
        if (var > 1e-12) enc.scale(f) = std::sqrt(var);
      }
      if (!is_static(f)) enc.masked_columns.push_back(f);
    }
    return enc;
  }

  /// L x step_width.
  Matrix encode(const TimeSeries& z) const {
    require(z.width() == raw_width(), "feature width " + std::to_string(z.width()) + " does not match the model's " +
                                          std::to_string(raw_width()));
    Matrix out = Matrix::Zero(z.length(), step_width());
    for (Index l = 0; l < z.length(); ++l) {
      for (Index f = 0; f < raw_width(); ++f) {
        if (z.observed(l, f)) out(l, f) = (z.features(l, f) - mean(f)) / scale(f);
      }
      for (std::size_t i = 0; i < masked_columns.size(); ++i) {
        out(l, raw_width() + static_cast<Index>(i)) = z.observed(l, masked_columns[i]) ? 1.0 : 0.0;
      }
    }
    return out;
  }
};

struct NetworkShape {
  Index features = 0;        // raw feature width d
  Index step_width = 0;      // encoded width (features + mask columns)
  Index hidden = 16;         // encoder state width p
  Index attention_width = 0; // 0 -> p
  Index head_width = 0;      // 0 -> 2m
  Index decoder_width = 0;   // 0 -> p
  int k = 3;
  Index m = 30;

  Index attention() const { return attention_width > 0 ? attention_width : hidden; }
  Index head() const { return head_width > 0 ? head_width : 2 * m; }
  Index decoder() const { return decoder_width > 0 ? decoder_width : hidden; }
};

/// k cause-specific MLPs, one hidden tanh layer each, m outputs each.
struct MlpHeads {
  static constexpr const char* kind = "deephit";

  std::vector<Mlp> heads;

  struct Cache {
    std::vector<MlpCache> heads;
  };

  static MlpHeads create(ParamStore& ps, const NetworkShape& shape) {
    MlpHeads h;
    for (int j = 0; j < shape.k; ++j) {
      h.heads.push_back(Mlp::create(ps, "head" + std::to_string(j + 1), shape.hidden, {shape.head()}, shape.m));
    }
    return h;
  }

  Vector forward(const ParamStore& ps, const Vector& context, Index m, Dropout* dropout, Cache& cache) const {
    const auto k = static_cast<Index>(heads.size());
    cache.heads.resize(heads.size());
    Vector logits(k * m);
    for (Index j = 0; j < k; ++j) {
      logits.segment(j * m, m) = heads[static_cast<std::size_t>(j)].forward(ps, context, dropout,
                                                                          cache.heads[static_cast<std::size_t>(j)]);
    }
    return logits;
  }

  Vector backward(const ParamStore& ps, const Cache& cache, const Vector& dlogits, Index m, Gradients& g) const {
    Vector dcontext = Vector::Zero(heads.front().input_dim());
    for (std::size_t j = 0; j < heads.size(); ++j) {
      dcontext += heads[j].backward(ps, cache.heads[j], dlogits.segment(static_cast<Index>(j) * m, m), g);
    }
    return dcontext;
  }
};

/// One GRU decoder per event, unrolled m steps from a zero state. The input at
/// each step is (context, previous decoder state); a linear readout gives one
/// logit per step.
struct RecurrentDecoders {
  static constexpr const char* kind = "ddrsa";

  std::vector<Gru> cells;
  std::vector<Dense> readouts;

  struct Cache {
    std::vector<std::vector<GruStepCache>> steps;
    std::vector<Matrix> states;  // per event, m x q
  };

  static RecurrentDecoders create(ParamStore& ps, const NetworkShape& shape) {
    RecurrentDecoders d;
    const Index q = shape.decoder();
    for (int j = 0; j < shape.k; ++j) {
      const auto name = "decoder" + std::to_string(j + 1);
      d.cells.push_back(Gru::create(ps, name + ".gru", shape.hidden + q, q));
      d.readouts.push_back(Dense::create(ps, name + ".readout", q, 1));
    }
    return d;
  }

  Vector forward(const ParamStore& ps, const Vector& context, Index m, Dropout* /*dropout*/, Cache& cache) const {
    const auto k = static_cast<Index>(cells.size());
    cache.steps.assign(cells.size(), {});
    cache.states.assign(cells.size(), {});
    Vector logits(k * m);
    const Index p = context.size();
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const Gru& cell = cells[j];
      const Index q = cell.hidden;
      auto& steps = cache.steps[j];
      steps.resize(static_cast<std::size_t>(m));
      cache.states[j].resize(m, q);
      Vector h = Vector::Zero(q);
      Vector x(p + q);
      x.head(p) = context;
      for (Index u = 0; u < m; ++u) {
        x.tail(q) = h;
        h = cell.step(ps, x, h, steps[static_cast<std::size_t>(u)]);
        cache.states[j].row(u) = h.transpose();
        logits(static_cast<Index>(j) * m + u) = readouts[j].forward(ps, h)(0);
      }
    }
    return logits;
  }

  Vector backward(const ParamStore& ps, const Cache& cache, const Vector& dlogits, Index m, Gradients& g) const {
    const Index p = cells.front().in - cells.front().hidden;
    Vector dcontext = Vector::Zero(p);
    Vector dy(1);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const Gru& cell = cells[j];
      const Index q = cell.hidden;
      Vector carry = Vector::Zero(q);
      for (Index u = m - 1; u >= 0; --u) {
        dy(0) = dlogits(static_cast<Index>(j) * m + u);
        Vector dh = readouts[j].backward(ps, cache.states[j].row(u).transpose(), dy, g) + carry;
        carry.setZero();
        const Vector dx = cell.step_backward(ps, cache.steps[j][static_cast<std::size_t>(u)], dh, g, carry);
        dcontext += dx.head(p);
        carry += dx.tail(q);
      }
    }
    return dcontext;
  }
};

/// Everything a reverse pass over one subject needs.
template <class Decoder>
struct SubjectPass {
  Matrix steps;       // L x step_width, encoded
  Matrix rnn_inputs;  // L x (step_width + 1), after input dropout
  std::vector<GruStepCache> gru;
  EncoderState state;
  AttentionCache attention;
  typename Decoder::Cache decoder;
  Vector pmf;  // k*m, event-major
  std::vector<MlpCache> next_step;
  Matrix next_prediction;  // (L-1) x d, standardized
};

template <class Decoder>
class DcrNetwork {
 public:
  using DecoderType = Decoder;
  static constexpr const char* kind = Decoder::kind;

  DcrNetwork() = default;

  DcrNetwork(const NetworkShape& shape, FeatureEncoding encoding, const TimeGrid& grid, std::uint64_t seed)
      : shape_(shape), encoding_(std::move(encoding)), grid_(grid) {
    grid_.validate();
    shape_.m = grid_.size();
    shape_.features = encoding_.raw_width();
    shape_.step_width = encoding_.step_width();
    build();
    params_.initialize(seed);
  }

  const NetworkShape& shape() const { return shape_; }
  const FeatureEncoding& encoding() const { return encoding_; }
  const TimeGrid& grid() const { return grid_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Re-creates the layer layout; used after loading shape/encoding/grid from a file.
  static DcrNetwork from_parts(const NetworkShape& shape, FeatureEncoding encoding, const TimeGrid& grid) {
    DcrNetwork net;
    net.shape_ = shape;
    net.encoding_ = std::move(encoding);
    net.grid_ = grid;
    net.build();
    return net;
  }

  SubjectPass<Decoder> forward_pass(const TimeSeries& z, Dropout* dropout) const {
    require(z.length() >= 1, "model input must have at least one step");
    if (z.width() != shape_.features) {
      throw CompatibilityError("model expects " + std::to_string(shape_.features) + " features, input has " +
                               std::to_string(z.width()));
    }
    SubjectPass<Decoder> pass;
    const Index L = z.length();
    const Index w = shape_.step_width;
    pass.steps = encoding_.encode(z);
    pass.rnn_inputs.resize(L, w + 1);
    pass.rnn_inputs.leftCols(w) = pass.steps;
    for (Index l = 0; l < L; ++l) {
      pass.rnn_inputs(l, w) = l + 1 < L ? z.timestamps(l + 1) - z.timestamps(l) : 0.0;
    }
    if (dropout != nullptr && dropout->rate() > 0.0) {
      for (Index l = 0; l < L; ++l) {
        pass.rnn_inputs.row(l).head(w) = pass.rnn_inputs.row(l).head(w).cwiseProduct(dropout->mask(w).transpose());
      }
    }
    const Matrix hidden = encoder_.forward(params_, pass.rnn_inputs, pass.gru);
    pass.state = attention_.forward(params_, hidden, pass.steps.row(L - 1).transpose(), dropout, pass.attention);
    const Vector logits = decoder_.forward(params_, pass.state.context, shape_.m, dropout, pass.decoder);
    pass.pmf = softmax(logits);

    pass.next_step.resize(static_cast<std::size_t>(L > 1 ? L - 1 : 0));
    pass.next_prediction.resize(L > 1 ? L - 1 : 0, shape_.features);
    Vector input(shape_.hidden + 1);
    for (Index l = 0; l + 1 < L; ++l) {
      input.head(shape_.hidden) = hidden.row(l).transpose();
      input(shape_.hidden) = pass.rnn_inputs(l, w);
      pass.next_prediction.row(l) =
          next_step_.forward(params_, input, dropout, pass.next_step[static_cast<std::size_t>(l)]).transpose();
    }
    return pass;
  }

  /// dpmf: dLoss/dpmf (k*m); dprediction: dLoss/dnext_prediction.
  void backward_pass(const SubjectPass<Decoder>& pass, const Vector& dpmf, const Matrix& dprediction,
                     Gradients& g) const {
    const Vector dlogits = softmax_backward(pass.pmf, dpmf);
    const Vector dcontext = decoder_.backward(params_, pass.decoder, dlogits, shape_.m, g);
    Matrix dH = attention_.backward(params_, pass.state, pass.attention, dcontext, g);
    for (Index l = 0; l < dprediction.rows(); ++l) {
      const Vector dinput =
          next_step_.backward(params_, pass.next_step[static_cast<std::size_t>(l)], dprediction.row(l).transpose(), g);
      dH.row(l) += dinput.head(shape_.hidden).transpose();
    }
    encoder_.backward(params_, pass.gru, dH, g);
  }

  PmfEstimate predict_pmf(const TimeSeries& z) const {
    const auto pass = forward_pass(z, nullptr);
    PmfEstimate out;
    out.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        pass.pmf.data(), shape_.k, shape_.m);
    return out;
  }

  /// CIF at prediction time t from the steps observed up to t.
  CifEstimate predict_cif(const TimeSeries& z, double t) const {
    const auto truncated = z.truncated(t);
    require(truncated.length() >= 1, "prediction time " + std::to_string(t) + " precedes the first observation");
    return cif_from_pmf(predict_pmf(truncated), grid_);
  }

  EncoderState encode(const TimeSeries& z) const { return forward_pass(z, nullptr).state; }

 private:
  void build() {
    params_ = ParamStore{};
    const Index p = shape_.hidden;
    encoder_ = Gru::create(params_, "encoder", shape_.step_width + 1, p);
    attention_ = Attention::create(params_, "attention", p, shape_.step_width, shape_.attention());
    decoder_ = Decoder::create(params_, shape_);
    next_step_ = Mlp::create(params_, "next_step", p + 1, {p}, shape_.features);
  }

  NetworkShape shape_;
  FeatureEncoding encoding_;
  TimeGrid grid_;
  ParamStore params_;
  Gru encoder_;
  Attention attention_;
  Decoder decoder_;
  Mlp next_step_;
};

using DeepHitNetwork = DcrNetwork<MlpHeads>;
using DdrsaNetwork = DcrNetwork<RecurrentDecoders>;

}  // namespace dcrkit
