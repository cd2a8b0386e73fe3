#pragma once

#include "dcrkit/cohort.hpp"
#include "dcrkit/concordance.hpp"
#include "dcrkit/core.hpp"
#include "dcrkit/loss.hpp"
#include "dcrkit/network.hpp"
#include "dcrkit/survival.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dcrkit {

struct Hyperparameters {
  double learning_rate = 1e-3;
  double alpha = 1.0;
  double beta = 0.1;
  double dropout = 0.2;

  bool operator==(const Hyperparameters&) const = default;
};

struct HyperparameterGrid {
  std::vector<double> learning_rates{1e-4, 5e-4, 1e-3};
  std::vector<double> alphas{0.5, 1.0, 5.0};
  std::vector<double> betas{0.05, 0.1, 0.5};
  std::vector<double> dropouts{0.2, 0.4};

  std::vector<Hyperparameters> combinations() const {
    std::vector<Hyperparameters> out;
    for (double lr : learning_rates)
      for (double a : alphas)
        for (double b : betas)
          for (double d : dropouts) out.push_back({lr, a, b, d});
    return out;
  }

  static HyperparameterGrid single(const Hyperparameters& h) {
    return {{h.learning_rate}, {h.alpha}, {h.beta}, {h.dropout}};
  }
};

struct TrainOptions {
  HyperparameterGrid grid;
  Index hidden = 16;
  Index attention_width = 0;
  Index head_width = 0;
  Index decoder_width = 0;
  std::optional<TimeGrid> time_grid;  // default: TimeGrid::for_cohort(train+validation, grid_bins)
  Index grid_bins = 30;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  double sigma = 0.1;
  double validation_fraction = 0.2;
  std::vector<double> eval_deltas{24.0, 48.0, 72.0};
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_score = 0.0;  // NaN when every c-index cell was undefined
};

template <class Net>
struct TrainingResult {
  Net network;
  Hyperparameters selected;
  double validation_score = 0.0;
  std::vector<EpochRecord> log;  // for the selected combination
  std::vector<std::pair<Hyperparameters, double>> scores;
};

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(const ParamStore& ps, double learning_rate) : lr_(learning_rate), m_(ps.zeros_like()), v_(ps.zeros_like()) {}

  void step(ParamStore& ps, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(0.9, t_);
    const double c2 = 1.0 - std::pow(0.999, t_);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      m_[i] = 0.9 * m_[i] + 0.1 * g[i];
      v_[i] = 0.999 * v_[i] + 0.001 * g[i].cwiseProduct(g[i]);
      ps.value(i).array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + 1e-8);
    }
  }

 private:
  double lr_;
  Gradients m_;
  Gradients v_;
  int t_ = 0;
};

/// Average truncated c-index across events and horizons at prediction time t,
/// over the cells that are defined. NaN when none is.
template <class PredictFn>
double average_concordance(const Cohort& cohort, double t, const std::vector<double>& deltas, PredictFn&& predict) {
  const Cohort at_risk = truncate_at(cohort, t);
  if (at_risk.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<CifEstimate> cifs;
  cifs.reserve(at_risk.size());
  std::vector<double> times;
  std::vector<int> events;
  for (const auto& s : at_risk.subjects) {
    cifs.push_back(predict(s.series, t));
    times.push_back(s.outcome.time);
    events.push_back(s.outcome.event);
  }
  double sum = 0.0;
  int defined = 0;
  std::vector<double> scores(at_risk.size());
  for (int j = 1; j <= cohort.k; ++j) {
    for (double delta : deltas) {
      for (std::size_t i = 0; i < cifs.size(); ++i) scores[i] = cifs[i].at(j, delta);
      if (const auto c = truncated_concordance(scores, times, events, j, t, delta)) {
        sum += *c;
        ++defined;
      }
    }
  }
  return defined > 0 ? sum / defined : std::numeric_limits<double>::quiet_NaN();
}

/// Prediction time used for early stopping: min(6, median last timestamp).
inline double validation_time(const Cohort& validation) {
  std::vector<double> ends;
  for (const auto& s : validation.subjects) ends.push_back(s.series.last_time());
  std::sort(ends.begin(), ends.end());
  const auto n = ends.size();
  const double median = n % 2 == 1 ? ends[n / 2] : 0.5 * (ends[n / 2 - 1] + ends[n / 2]);
  return std::min(6.0, median);
}

namespace detail {

template <class Net>
TrainingResult<Net> fit_one(const Net& initial, const std::vector<TrainingSample>& train, const Cohort& validation,
                            const Hyperparameters& h, const TrainOptions& options, std::uint64_t seed) {
  Net net = initial;
  Net best = initial;
  const LossWeights weights{h.alpha, h.beta};
  weights.validate();
  Adam adam(net.params(), h.learning_rate);
  const double t_val = validation_time(validation);
  auto predict = [&net](const TimeSeries& z, double t) { return net.predict_cif(z, t); };

  TrainingResult<Net> result;
  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<TrainingSample> batch;

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    CounterRng shuffle_rng(seed, 0x5AFF1E00ULL + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);
      Dropout dropout(h.dropout, seed, (static_cast<std::uint64_t>(epoch) << 32) + batches);
      net.params().zero_grad();
      const auto loss = batch_loss(net, std::span<const TrainingSample>(batch), weights, options.sigma,
                                   &net.params().grads(), &dropout);
      if (!std::isfinite(loss.total)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      adam.step(net.params(), net.params().grads());
      epoch_loss += loss.total;
      ++batches;
    }
    const double score = average_concordance(validation, t_val, options.eval_deltas, predict);
    result.log.push_back({epoch, epoch_loss / static_cast<double>(batches), score});
    if (std::isfinite(score) && score > best_score) {
      best_score = score;
      best = net;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  result.network = std::move(best);
  result.selected = h;
  result.validation_score = best_score;
  return result;
}

}  // namespace detail

/// Trains a neural DCR model: stratified train/validation split of `cohort`,
/// then minibatch Adam for every hyperparameter combination with early stopping
/// on the validation average c-index; returns the best combination's network.
template <class Net>
TrainingResult<Net> train_network(const Cohort& cohort, const TrainOptions& options) {
  cohort.validate();
  require(options.batch_size >= 1 && options.max_epochs >= 1 && options.patience >= 1,
          "batch_size, max_epochs and patience must be positive");
  const auto split = stratified_split(cohort, options.validation_fraction, options.seed, 0xDA7AULL);
  const Cohort train = cohort.select(split.train);
  const Cohort validation = cohort.select(split.test);
  require(!train.empty(), "training portion is empty");
  const auto counts = validation.event_counts();
  if (validation.empty() || counts[0] == static_cast<int>(validation.size())) {
    throw TrainingError("validation set has no uncensored subject; cannot compute a validation c-index");
  }

  const TimeGrid grid = options.time_grid ? *options.time_grid : TimeGrid::for_cohort(cohort, options.grid_bins);
  grid.validate();
  std::vector<TrainingSample> samples;
  try {
    samples = make_samples(train, grid);
  } catch (const InputError& e) {
    throw TrainingError(std::string("time grid does not cover the training data: ") + e.what());
  }

  NetworkShape shape;
  shape.hidden = options.hidden;
  shape.attention_width = options.attention_width;
  shape.head_width = options.head_width;
  shape.decoder_width = options.decoder_width;
  shape.k = cohort.k;
  const Net initial(shape, FeatureEncoding::fit(train), grid, options.seed);

  std::optional<TrainingResult<Net>> best;
  std::vector<std::pair<Hyperparameters, double>> scores;
  const auto combos = options.grid.combinations();
  require(!combos.empty(), "hyperparameter grid is empty");
  for (const auto& h : combos) {
    auto r = detail::fit_one(initial, samples, validation, h, options, options.seed);
    scores.emplace_back(h, r.validation_score);
    if (!best || r.validation_score > best->validation_score) best = std::move(r);
  }
  best->scores = std::move(scores);
  return std::move(*best);
}

}  // namespace dcrkit
