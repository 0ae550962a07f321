#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "balance/error.hpp"
#include "balance/reweight.hpp"
#include "balance/rng.hpp"

namespace balance {

/// Long-tail toy classification. Foreground class c (1-based) is a Gaussian
/// blob around separation * e_c in num_classes dimensions; class_counts[c-1]
/// training samples are drawn from it. Evaluation uses heldout_per_class
/// samples of every class.
struct LongTailTask {
  std::vector<std::size_t> class_counts{1000, 100, 10};
  double separation = 2.0;
  double noise_sigma = 1.0;
  std::size_t heldout_per_class = 500;
  std::size_t steps = 300;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  BcrParams bcr{};

  std::size_t num_classes() const { return class_counts.size(); }

  void validate() const {
    if (class_counts.empty()) throw InvalidArgument("long-tail: need at least one foreground class");
    for (auto c : class_counts)
      if (c == 0) throw InvalidArgument("long-tail: every class needs at least one training sample");
    if (!(separation > 0.0) || !(noise_sigma > 0.0) || !(learning_rate > 0.0) || heldout_per_class == 0) {
      throw InvalidArgument("long-tail: separation, noise, learning rate and held-out size must be positive");
    }
    bcr.validate();
  }
};

struct ClassAccuracy {
  int class_id = 0;
  double accuracy = 0.0;
};

struct LongTailResult {
  std::vector<ClassAccuracy> per_class;
  double mean_accuracy = 0.0;
  std::vector<double> final_loss_trace;  // mean training loss per step
};

namespace detail {

struct LabeledSet {
  std::vector<std::vector<double>> x;  // with trailing constant 1
  std::vector<std::size_t> y;          // 1-based class ids
};

inline void draw_class(LabeledSet& set, std::size_t cls, std::size_t count, const LongTailTask& task,
                       RngState& rng) {
  const std::size_t dim = task.num_classes();
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> x(dim + 1, 1.0);
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = rng.normal(d + 1 == cls ? task.separation : 0.0, task.noise_sigma);
    }
    set.x.push_back(std::move(x));
    set.y.push_back(cls);
  }
}

}  // namespace detail

/// Trains a linear multi-label sigmoid classifier (background output plus one
/// output per class, zero init, full-batch gradient descent) with
/// weighted_ce_loss. Weights come from compute_weights on the training counts
/// when with_bcr is set, unit weights otherwise. Predictions are the argmax
/// over foreground outputs.
inline LongTailResult run_toy_longtail(const LongTailTask& task, bool with_bcr) {
  task.validate();
  const std::size_t classes = task.num_classes();
  const std::size_t outputs = classes + 1;
  const std::size_t dim = classes + 1;

  RngState rng(task.seed);
  RngState train_rng = rng.split();
  RngState test_rng = rng.split();
  detail::LabeledSet train, test;
  for (std::size_t c = 1; c <= classes; ++c) {
    detail::draw_class(train, c, task.class_counts[c - 1], task, train_rng);
    detail::draw_class(test, c, task.heldout_per_class, task, test_rng);
  }

  ClassWeightTable weights = ClassWeightTable::unit(classes);
  if (with_bcr) {
    ClassFrequencyTable freqs;
    for (auto c : task.class_counts) freqs.counts.push_back(c);
    weights = compute_weights(freqs, task.bcr);
  }

  std::vector<double> W(outputs * dim, 0.0);
  auto logits_of = [&](const std::vector<double>& x) {
    std::vector<double> z(outputs, 0.0);
    for (std::size_t o = 0; o < outputs; ++o)
      for (std::size_t d = 0; d < dim; ++d) z[o] += W[o * dim + d] * x[d];
    return z;
  };
  auto probs_of = [](const std::vector<double>& z) {
    std::vector<double> p(z.size());
    // keep probabilities strictly inside (0, 1) for the log terms
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::clamp(sigmoid(z[i]), 1e-15, 1.0 - 1e-15);
    return p;
  };

  LongTailResult result;
  const double n = static_cast<double>(train.y.size());
  std::vector<double> grad(W.size());
  for (std::size_t step = 0; step < task.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t s = 0; s < train.y.size(); ++s) {
      const auto lg = weighted_ce_loss(probs_of(logits_of(train.x[s])), train.y[s], weights);
      loss += lg.loss;
      for (std::size_t o = 0; o < outputs; ++o)
        for (std::size_t d = 0; d < dim; ++d) grad[o * dim + d] += lg.grad[o] * train.x[s][d] / n;
    }
    loss /= n;
    if (!std::isfinite(loss) || loss > 1e12) throw Diverged(step);
    result.final_loss_trace.push_back(loss);
    for (std::size_t k = 0; k < W.size(); ++k) W[k] -= task.learning_rate * grad[k];
  }

  std::vector<double> correct(classes, 0.0);
  for (std::size_t s = 0; s < test.y.size(); ++s) {
    const auto z = logits_of(test.x[s]);
    const auto best = static_cast<std::size_t>(std::max_element(z.begin() + 1, z.end()) - z.begin());
    if (best == test.y[s]) correct[test.y[s] - 1] += 1.0;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    const double acc = correct[c] / static_cast<double>(task.heldout_per_class);
    result.per_class.push_back({static_cast<int>(c + 1), acc});
    result.mean_accuracy += acc / static_cast<double>(classes);
  }
  return result;
}

}  // namespace balance
