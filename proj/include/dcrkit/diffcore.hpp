#pragma once

// Differentiable building blocks with hand-written reverse passes: dense
// layers, tanh MLPs, a GRU cell, softmax and attention pooling. Forward calls
// record what the reverse pass needs in small cache structs; reverse calls
// accumulate parameter gradients into a Gradients buffer and return the
// gradient with respect to their input.

#include "dcrkit/core.hpp"
#include "dcrkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dcrkit {

using Gradients = std::vector<Matrix>;

/// Named trainable tensors with matching gradient buffers.
class ParamStore {
 public:
  std::size_t add(std::string name, Index rows, Index cols, Index fan_in) {
    names_.push_back(std::move(name));
    values_.push_back(Matrix::Zero(rows, cols));
    grads_.push_back(Matrix::Zero(rows, cols));
    fan_in_.push_back(fan_in);
    return values_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  Gradients& grads() { return grads_; }
  const Gradients& grads() const { return grads_; }
  const std::vector<Matrix>& values() const { return values_; }
  std::vector<Matrix>& values() { return values_; }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  Gradients zeros_like() const {
    Gradients g;
    g.reserve(values_.size());
    for (const auto& v : values_) g.push_back(Matrix::Zero(v.rows(), v.cols()));
    return g;
  }

  void zero_grad() {
    for (auto& g : grads_) g.setZero();
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; parameter i draws from stream i.
  void initialize(std::uint64_t seed) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      CounterRng rng(seed, 0xA11CE000ULL + i);
      const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in_[i], 1)));
      for (Index e = 0; e < values_[i].size(); ++e) values_[i].data()[e] = rng.uniform(-bound, bound);
    }
  }

  void set_zero() {
    for (auto& v : values_) v.setZero();
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](const Matrix& m) { return m.allFinite(); });
  }

  bool same_layout(const ParamStore& o) const {
    if (size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (names_[i] != o.names_[i] || values_[i].rows() != o.values_[i].rows() ||
          values_[i].cols() != o.values_[i].cols())
        return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<Matrix> grads_;
  std::vector<Index> fan_in_;
};

/// Inverted dropout: kept units are scaled by 1 / (1 - rate).
class Dropout {
 public:
  Dropout(double rate, std::uint64_t seed, std::uint64_t stream) : rate_(rate), rng_(seed, stream) {}

  Vector mask(Index n) {
    Vector m(n);
    const double keep_scale = 1.0 / (1.0 - rate_);
    for (Index i = 0; i < n; ++i) m(i) = rng_.uniform() > rate_ ? keep_scale : 0.0;
    return m;
  }

  double rate() const { return rate_; }

 private:
  double rate_;
  CounterRng rng_;
};

inline Vector sigmoid(const Vector& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

/// Softmax with max-subtraction.
inline Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

/// Gradient with respect to the logits given the gradient with respect to
/// y = softmax(logits).
inline Vector softmax_backward(const Vector& y, const Vector& dy) {
  return (y.array() * (dy.array() - y.dot(dy))).matrix();
}

struct Dense {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Index in = 0;
  Index out = 0;

  static Dense create(ParamStore& ps, const std::string& name, Index in, Index out) {
    Dense d;
    d.in = in;
    d.out = out;
    d.weight = ps.add(name + ".weight", out, in, in);
    d.bias = ps.add(name + ".bias", out, 1, in);
    return d;
  }

  Vector forward(const ParamStore& ps, const Vector& x) const {
    return ps.value(weight) * x + ps.value(bias).col(0);
  }

  Vector backward(const ParamStore& ps, const Vector& x, const Vector& dy, Gradients& g) const {
    g[weight].noalias() += dy * x.transpose();
    g[bias].col(0) += dy;
    return ps.value(weight).transpose() * dy;
  }
};

struct MlpCache {
  std::vector<Vector> inputs;       // input to each layer
  std::vector<Vector> activations;  // tanh output of each hidden layer, before dropout
  std::vector<Vector> masks;        // dropout mask per hidden layer (empty when off)
};

/// Feed-forward net: tanh hidden layers (optionally dropped out), linear output.
struct Mlp {
  std::vector<Dense> layers;

  static Mlp create(ParamStore& ps, const std::string& name, Index in, const std::vector<Index>& hidden, Index out) {
    Mlp m;
    Index prev = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      m.layers.push_back(Dense::create(ps, name + ".hidden" + std::to_string(i), prev, hidden[i]));
      prev = hidden[i];
    }
    m.layers.push_back(Dense::create(ps, name + ".out", prev, out));
    return m;
  }

  Index input_dim() const { return layers.front().in; }
  Index output_dim() const { return layers.back().out; }

  Vector forward(const ParamStore& ps, const Vector& x, Dropout* dropout, MlpCache& cache) const {
    cache.inputs.clear();
    cache.activations.clear();
    cache.masks.clear();
    Vector h = x;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      cache.inputs.push_back(h);
      Vector a = layers[i].forward(ps, h).array().tanh().matrix();
      cache.activations.push_back(a);
      if (dropout != nullptr && dropout->rate() > 0.0) {
        cache.masks.push_back(dropout->mask(a.size()));
        h = a.cwiseProduct(cache.masks.back());
      } else {
        cache.masks.emplace_back();
        h = std::move(a);
      }
    }
    cache.inputs.push_back(h);
    return layers.back().forward(ps, h);
  }

  Vector forward(const ParamStore& ps, const Vector& x) const {
    MlpCache scratch;
    return forward(ps, x, nullptr, scratch);
  }

  Vector backward(const ParamStore& ps, const MlpCache& cache, const Vector& dy, Gradients& g) const {
    Vector dh = layers.back().backward(ps, cache.inputs.back(), dy, g);
    for (std::size_t i = layers.size() - 1; i-- > 0;) {
      if (cache.masks[i].size() > 0) dh = dh.cwiseProduct(cache.masks[i]);
      const Vector& a = cache.activations[i];
      const Vector dpre = (dh.array() * (1.0 - a.array().square())).matrix();
      dh = layers[i].backward(ps, cache.inputs[i], dpre, g);
    }
    return dh;
  }
};

struct GruStepCache {
  Vector x;
  Vector h_prev;
  Vector z;
  Vector r;
  Vector c;
};

/// Gated recurrent unit. Gates are stacked [update; reset; candidate] in the
/// input weights (3p x in), recurrent weights (3p x p) and bias (3p):
///   z = σ(W_z x + U_z h + b_z),  r = σ(W_r x + U_r h + b_r)
///   c = tanh(W_c x + U_c (r ⊙ h) + b_c),  h' = (1 - z) ⊙ h + z ⊙ c
struct Gru {
  std::size_t input_weight = 0;
  std::size_t recurrent_weight = 0;
  std::size_t bias = 0;
  Index in = 0;
  Index hidden = 0;

  static Gru create(ParamStore& ps, const std::string& name, Index in, Index hidden) {
    Gru g;
    g.in = in;
    g.hidden = hidden;
    g.input_weight = ps.add(name + ".input_weight", 3 * hidden, in, in);
    g.recurrent_weight = ps.add(name + ".recurrent_weight", 3 * hidden, hidden, hidden);
    g.bias = ps.add(name + ".bias", 3 * hidden, 1, hidden);
    return g;
  }

  Vector step(const ParamStore& ps, const Vector& x, const Vector& h, GruStepCache& cache) const {
    const Index p = hidden;
    const Matrix& U = ps.value(recurrent_weight);
    const Vector ax = ps.value(input_weight) * x + ps.value(bias).col(0);
    cache.x = x;
    cache.h_prev = h;
    cache.z = sigmoid(ax.segment(0, p) + U.middleRows(0, p) * h);
    cache.r = sigmoid(ax.segment(p, p) + U.middleRows(p, p) * h);
    const Vector rh = cache.r.cwiseProduct(h);
    cache.c = (ax.segment(2 * p, p) + U.middleRows(2 * p, p) * rh).array().tanh().matrix();
    return h + cache.z.cwiseProduct(cache.c - h);
  }

  /// Returns dx; adds the gradient with respect to the previous state to dh_prev.
  Vector step_backward(const ParamStore& ps, const GruStepCache& cache, const Vector& dh_next, Gradients& g,
                       Vector& dh_prev) const {
    const Index p = hidden;
    const Matrix& U = ps.value(recurrent_weight);
    const Vector& h = cache.h_prev;
    const Vector& z = cache.z;
    const Vector& r = cache.r;
    const Vector& c = cache.c;

    Vector dpre(3 * p);
    const Vector dz = dh_next.cwiseProduct(c - h);
    const Vector dc = dh_next.cwiseProduct(z);
    Vector dh = dh_next.cwiseProduct(Vector::Ones(p) - z);

    dpre.segment(2 * p, p) = (dc.array() * (1.0 - c.array().square())).matrix();
    dpre.segment(0, p) = (dz.array() * z.array() * (1.0 - z.array())).matrix();
    const Vector drh = U.middleRows(2 * p, p).transpose() * dpre.segment(2 * p, p);
    dpre.segment(p, p) = (drh.array() * h.array() * r.array() * (1.0 - r.array())).matrix();
    dh += drh.cwiseProduct(r);
    dh.noalias() += U.middleRows(0, p).transpose() * dpre.segment(0, p);
    dh.noalias() += U.middleRows(p, p).transpose() * dpre.segment(p, p);

    Matrix& gU = g[recurrent_weight];
    gU.middleRows(0, p).noalias() += dpre.segment(0, p) * h.transpose();
    gU.middleRows(p, p).noalias() += dpre.segment(p, p) * h.transpose();
    gU.middleRows(2 * p, p).noalias() += dpre.segment(2 * p, p) * r.cwiseProduct(h).transpose();
    g[input_weight].noalias() += dpre * cache.x.transpose();
    g[bias].col(0) += dpre;

    dh_prev += dh;
    return ps.value(input_weight).transpose() * dpre;
  }

  /// Runs over the rows of `inputs` from a zero state; row ℓ of the result is H^(ℓ).
  Matrix forward(const ParamStore& ps, const Matrix& inputs, std::vector<GruStepCache>& caches) const {
    require(inputs.cols() == in, "gru: input width " + std::to_string(inputs.cols()) + " does not match " +
                                     std::to_string(in));
    const Index L = inputs.rows();
    caches.resize(static_cast<std::size_t>(L));
    Matrix hs(L, hidden);
    Vector h = Vector::Zero(hidden);
    for (Index l = 0; l < L; ++l) {
      h = step(ps, inputs.row(l).transpose(), h, caches[static_cast<std::size_t>(l)]);
      hs.row(l) = h.transpose();
    }
    return hs;
  }

  Matrix forward(const ParamStore& ps, const Matrix& inputs) const {
    std::vector<GruStepCache> caches;
    return forward(ps, inputs, caches);
  }

  /// dH holds dLoss/dH^(ℓ) for every step; returns dLoss/dinputs.
  Matrix backward(const ParamStore& ps, const std::vector<GruStepCache>& caches, const Matrix& dH,
                  Gradients& g) const {
    const auto L = static_cast<Index>(caches.size());
    Matrix dinputs(L, in);
    Vector carry = Vector::Zero(hidden);
    for (Index l = L - 1; l >= 0; --l) {
      const Vector dh = dH.row(l).transpose() + carry;
      carry.setZero();
      dinputs.row(l) = step_backward(ps, caches[static_cast<std::size_t>(l)], dh, g, carry).transpose();
    }
    return dinputs;
  }
};

/// Output of attention pooling over an encoded sequence.
struct EncoderState {
  Matrix hidden_seq;   // L x p
  Vector context;      // p
  Vector attn_weights; // L, nonnegative, sums to 1
};

struct AttentionCache {
  std::vector<MlpCache> scorer;
};

/// Scores each step with an MLP over (H^(ℓ), last-step features), normalizes the
/// scores with a softmax and returns the weighted sum of the hidden states.
struct Attention {
  Mlp scorer;
  Index hidden_dim = 0;
  Index feature_dim = 0;

  static Attention create(ParamStore& ps, const std::string& name, Index hidden_dim, Index feature_dim,
                          Index scorer_width) {
    Attention a;
    a.hidden_dim = hidden_dim;
    a.feature_dim = feature_dim;
    a.scorer = Mlp::create(ps, name + ".scorer", hidden_dim + feature_dim, {scorer_width}, 1);
    return a;
  }

  EncoderState forward(const ParamStore& ps, const Matrix& hidden_seq, const Vector& last_features, Dropout* dropout,
                       AttentionCache& cache) const {
    require(hidden_seq.rows() >= 1, "attention: empty hidden sequence");
    require(hidden_seq.cols() == hidden_dim && last_features.size() == feature_dim, "attention: shape mismatch");
    const Index L = hidden_seq.rows();
    cache.scorer.resize(static_cast<std::size_t>(L));
    Vector logits(L);
    Vector input(hidden_dim + feature_dim);
    input.tail(feature_dim) = last_features;
    for (Index l = 0; l < L; ++l) {
      input.head(hidden_dim) = hidden_seq.row(l).transpose();
      logits(l) = scorer.forward(ps, input, dropout, cache.scorer[static_cast<std::size_t>(l)])(0);
    }
    EncoderState state;
    state.attn_weights = softmax(logits);
    state.context = hidden_seq.transpose() * state.attn_weights;
    state.hidden_seq = hidden_seq;
    return state;
  }

  EncoderState forward(const ParamStore& ps, const Matrix& hidden_seq, const Vector& last_features) const {
    AttentionCache scratch;
    return forward(ps, hidden_seq, last_features, nullptr, scratch);
  }

  /// Returns dLoss/dH given dLoss/dcontext.
  Matrix backward(const ParamStore& ps, const EncoderState& state, const AttentionCache& cache, const Vector& dcontext,
                  Gradients& g) const {
    const Index L = state.hidden_seq.rows();
    const Vector& a = state.attn_weights;
    Matrix dH = a * dcontext.transpose();
    const Vector da = state.hidden_seq * dcontext;
    const Vector dlogits = softmax_backward(a, da);
    Vector dy(1);
    for (Index l = 0; l < L; ++l) {
      dy(0) = dlogits(l);
      const Vector dinput = scorer.backward(ps, cache.scorer[static_cast<std::size_t>(l)], dy, g);
      dH.row(l) += dinput.head(hidden_dim).transpose();
    }
    return dH;
  }
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  std::string worst;
  std::string diagnostic;
};

/// Loss evaluated at the store's current values. When `grads` is non-null the
/// reverse-mode gradient is accumulated into it.
using LossFunction = std::function<double(const ParamStore&, Gradients*)>;

/// Compares reverse-mode gradients with central finite differences on up to
/// `samples` randomly chosen scalars (all of them when there are fewer).
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckReport grad_check(const LossFunction& loss, ParamStore& ps, double tolerance, std::size_t samples,
                                  std::uint64_t seed, double step = 1e-5) {
  GradCheckReport report;
  Gradients analytic = ps.zeros_like();
  const double base = loss(ps, &analytic);
  if (!std::isfinite(base)) {
    report.diagnostic = "loss is not finite at the given parameters";
    return report;
  }

  std::vector<std::pair<std::size_t, Index>> coords;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    for (Index e = 0; e < ps.value(p).size(); ++e) coords.emplace_back(p, e);
  }
  if (coords.size() > samples) {
    CounterRng rng(seed, 0x6C4ECULL);
    rng.shuffle(coords);
    coords.resize(samples);
  }

  for (const auto& [p, e] : coords) {
    double& v = ps.value(p).data()[e];
    const double saved = v;
    v = saved + step;
    const double up = loss(ps, nullptr);
    v = saved - step;
    const double down = loss(ps, nullptr);
    v = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      report.diagnostic = "loss is not finite when perturbing " + ps.name(p) + "[" + std::to_string(e) + "]";
      report.passed = false;
      return report;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[p].data()[e];
    // Denominator floor: 1e5 times the rounding error of the central difference.
    const double rounding = std::numeric_limits<double>::epsilon() * std::max({std::abs(up), std::abs(down), 1.0}) / step;
    const double floor = std::max(1e-8, 1e5 * rounding);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    ++report.checked;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      char buf[96];
      std::snprintf(buf, sizeof buf, "] analytic=%.6e numeric=%.6e", a, numeric);
      report.worst = ps.name(p) + "[" + std::to_string(e) + buf;
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace dcrkit
