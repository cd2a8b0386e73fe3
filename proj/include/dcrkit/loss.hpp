#pragma once

#include "dcrkit/core.hpp"
#include "dcrkit/network.hpp"
#include "dcrkit/survival.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace dcrkit {

/// One training subject: series, event, residual duration and its grid bin.
struct TrainingSample {
  const TimeSeries* series = nullptr;
  int event = 0;
  double residual = 0.0;
  Index bin = 0;
};

inline std::vector<TrainingSample> make_samples(const Cohort& c, const TimeGrid& grid) {
  std::vector<TrainingSample> samples;
  samples.reserve(c.size());
  for (const auto& s : c.subjects) {
    const double residual = s.residual();
    samples.push_back({&s.series, s.outcome.event, residual, grid.bin_of(residual)});
  }
  return samples;
}

struct LossBreakdown {
  double total = 0.0;
  double likelihood = 0.0;  // L1
  double ranking = 0.0;     // L2
  double prediction = 0.0;  // L3
};

inline constexpr double kLogFloor = 1e-8;

/// Per-subject pmf-level pieces of the three-term loss, split from the network
/// so the arithmetic can be tested on hand-built pmfs.
///
/// L1 (mean over subjects): -log(O_j(u*) + 1e-8) for an event j in bin u*;
///   -log(S + 1e-8) for censoring in bin u*, with S = sum of mass past bin u*
///   (equal to 1 - sum_j F_j(Δ_u*) on the simplex).
/// L2 (summed over events, mean over that event's acceptable pairs): pairs
///   (a, b) with K_a = j and residual_a < residual_b; penalty
///   exp(-(F_j^a(Δ_{u*_a}) - F_j^b(Δ_{u*_a})) / sigma).
/// Returns the gradients with respect to each pmf (k x m, event-major flat).
struct PmfLoss {
  double likelihood = 0.0;
  double ranking = 0.0;
  std::vector<Vector> dlikelihood;
  std::vector<Vector> dranking;
};

inline PmfLoss pmf_loss(std::span<const Vector> pmfs, std::span<const TrainingSample> batch, int k, Index m,
                        double sigma) {
  const auto n = batch.size();
  PmfLoss out;
  out.dlikelihood.assign(n, Vector::Zero(k * m));
  out.dranking.assign(n, Vector::Zero(k * m));
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = batch[i];
    const Vector& o = pmfs[i];
    if (s.event > 0) {
      const Index cell = (s.event - 1) * m + s.bin;
      out.likelihood -= std::log(o(cell) + kLogFloor) * inv_n;
      out.dlikelihood[i](cell) = -inv_n / (o(cell) + kLogFloor);
    } else {
      double survival = 0.0;
      for (int j = 0; j < k; ++j) survival += o.segment(j * m + s.bin + 1, m - s.bin - 1).sum();
      out.likelihood -= std::log(survival + kLogFloor) * inv_n;
      const double g = -inv_n / (survival + kLogFloor);
      for (int j = 0; j < k; ++j) out.dlikelihood[i].segment(j * m + s.bin + 1, m - s.bin - 1).array() += g;
    }
  }

  for (int j = 1; j <= k; ++j) {
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (batch[a].event != j) continue;
      for (std::size_t b = 0; b < n; ++b) {
        if (b != a && batch[b].residual > batch[a].residual) ++pairs;
      }
    }
    if (pairs == 0) continue;
    const double inv_pairs = 1.0 / static_cast<double>(pairs);
    for (std::size_t a = 0; a < n; ++a) {
      if (batch[a].event != j) continue;
      const Index offset = (j - 1) * m;
      const Index len = batch[a].bin + 1;
      const double fa = pmfs[a].segment(offset, len).sum();
      for (std::size_t b = 0; b < n; ++b) {
        if (b == a || !(batch[b].residual > batch[a].residual)) continue;
        const double fb = pmfs[b].segment(offset, len).sum();
        const double penalty = std::exp(-(fa - fb) / sigma);
        out.ranking += penalty * inv_pairs;
        const double g = penalty / sigma * inv_pairs;
        out.dranking[a].segment(offset, len).array() -= g;
        out.dranking[b].segment(offset, len).array() += g;
      }
    }
  }
  return out;
}

/// Total loss L1 + alpha * L2 + beta * L3 over a batch. L3 is the mean squared
/// error of next-step predictions over observed cells of steps 2..L. When
/// `grads` is non-null the parameter gradients are accumulated into it.
template <class Net>
LossBreakdown batch_loss(const Net& net, std::span<const TrainingSample> batch, const LossWeights& weights,
                         double sigma, Gradients* grads, Dropout* dropout) {
  require(!batch.empty(), "loss: batch must be nonempty");
  const auto& shape = net.shape();
  const auto n = batch.size();
  std::vector<SubjectPass<typename Net::DecoderType>> passes;
  passes.reserve(n);
  std::vector<Vector> pmfs;
  pmfs.reserve(n);
  for (const auto& s : batch) {
    require(s.bin >= 0 && s.bin < shape.m, "loss: sample bin outside the time grid");
    passes.push_back(net.forward_pass(*s.series, dropout));
    pmfs.push_back(passes.back().pmf);
  }
  const PmfLoss pl = pmf_loss(pmfs, batch, shape.k, shape.m, sigma);

  double squared = 0.0;
  double cells = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& z = *batch[i].series;
    const auto& pass = passes[i];
    for (Index l = 0; l + 1 < z.length(); ++l) {
      for (Index f = 0; f < shape.features; ++f) {
        if (!z.observed(l + 1, f)) continue;
        const double e = pass.next_prediction(l, f) - pass.steps(l + 1, f);
        squared += e * e;
        cells += 1.0;
      }
    }
  }

  LossBreakdown out;
  out.likelihood = pl.likelihood;
  out.ranking = pl.ranking;
  out.prediction = cells > 0.0 ? squared / cells : 0.0;
  out.total = out.likelihood + weights.alpha * out.ranking + weights.beta * out.prediction;

  if (grads != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& z = *batch[i].series;
      const auto& pass = passes[i];
      Matrix dpred = Matrix::Zero(pass.next_prediction.rows(), pass.next_prediction.cols());
      if (cells > 0.0) {
        for (Index l = 0; l + 1 < z.length(); ++l) {
          for (Index f = 0; f < shape.features; ++f) {
            if (!z.observed(l + 1, f)) continue;
            dpred(l, f) = weights.beta * 2.0 * (pass.next_prediction(l, f) - pass.steps(l + 1, f)) / cells;
          }
        }
      }
      const Vector dpmf = pl.dlikelihood[i] + weights.alpha * pl.dranking[i];
      net.backward_pass(pass, dpmf, dpred, *grads);
    }
  }
  return out;
}

}  // namespace dcrkit
