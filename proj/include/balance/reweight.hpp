#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/losses.hpp"

namespace balance {

/// Foreground class frequencies; counts[k] belongs to class id k + 1.
struct ClassFrequencyTable {
  std::vector<std::uint64_t> counts;

  std::size_t num_classes() const noexcept { return counts.size(); }
};

struct BcrParams {
  std::size_t num_buckets = 10;
  double turning_point = 0.5;
  double temperature = 0.025;

  void validate() const {
    if (num_buckets < 2) throw InvalidArgument("bcr: need at least two buckets");
    if (!(turning_point > 0.0 && turning_point < 1.0)) throw InvalidArgument("bcr: turning point must be in (0, 1)");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("bcr: temperature must be positive");
  }
};

struct ClassWeight {
  int class_id = 0;
  std::uint64_t frequency = 0;
  double log_frequency = 0.0;
  std::size_t bucket = 0;
  double position = 0.0;
  double weight = 0.0;

  bool operator==(const ClassWeight&) const = default;
};

class ClassWeightTable {
 public:
  ClassWeightTable() = default;
  explicit ClassWeightTable(std::vector<ClassWeight> entries) : entries_(std::move(entries)) {}

  /// Every class weighted 1.0 (plain multi-label CE).
  static ClassWeightTable unit(std::size_t num_classes) {
    std::vector<ClassWeight> e(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
      e[k].class_id = static_cast<int>(k + 1);
      e[k].position = 1.0;
      e[k].weight = 1.0;
    }
    return ClassWeightTable(std::move(e));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<ClassWeight>& entries() const noexcept { return entries_; }

  /// Weight of foreground class `class_id` (1-based).
  double weight(std::size_t class_id) const {
    if (class_id == 0 || class_id > entries_.size()) {
      throw InvalidArgument("class weight table has no class " + std::to_string(class_id));
    }
    return entries_[class_id - 1].weight;
  }

 private:
  std::vector<ClassWeight> entries_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// ln-frequency -> S uniform buckets over [min, max] -> s/(S-1) -> sigmoid((x-a)/t).
///
/// Interior edges belong to the upper bucket and the maximum to bucket S-1.
/// Positions within 1e-9 of an edge are snapped onto it so that a common
/// frequency scale factor cannot flip a bucket through rounding. A table with
/// a single distinct frequency puts every class in the top bucket.
inline ClassWeightTable compute_weights(const ClassFrequencyTable& freqs, const BcrParams& p = {}) {
  p.validate();
  if (freqs.counts.empty()) throw InvalidArgument("bcr: empty frequency table");
  std::vector<ClassWeight> out(freqs.counts.size());
  for (std::size_t k = 0; k < freqs.counts.size(); ++k) {
    if (freqs.counts[k] < 1) {
      throw InvalidArgument("bcr: class " + std::to_string(k + 1) + " has zero frequency");
    }
    out[k].class_id = static_cast<int>(k + 1);
    out[k].frequency = freqs.counts[k];
    out[k].log_frequency = std::log(static_cast<double>(freqs.counts[k]));
  }
  const auto [lo_it, hi_it] = std::minmax_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.log_frequency < b.log_frequency;
  });
  const double lo = lo_it->log_frequency;
  const double range = hi_it->log_frequency - lo;
  const auto buckets = static_cast<double>(p.num_buckets);
  for (auto& e : out) {
    if (range == 0.0) {
      e.bucket = p.num_buckets - 1;
    } else {
      double pos = buckets * (e.log_frequency - lo) / range;
      if (const double r = std::round(pos); std::abs(pos - r) < 1e-9) pos = r;
      e.bucket = std::min(static_cast<std::size_t>(pos), p.num_buckets - 1);
    }
    e.position = static_cast<double>(e.bucket) / (buckets - 1.0);
    e.weight = sigmoid((e.position - p.turning_point) / p.temperature);
  }
  return ClassWeightTable(std::move(out));
}

/// Multi-label sigmoid cross-entropy with per-class weights:
///   L = -sum_i w_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)],  y = one_hot(target).
/// probs[0] is background. w_0 and w_target are 1; other classes take the
/// table weight. grad is dL/dz_i = w_i (p_i - y_i) for the logits z behind
/// the sigmoids.
inline LossGradVec weighted_ce_loss(std::span<const double> probs, std::size_t target,
                                    const ClassWeightTable& weights) {
  if (probs.size() < 2) throw InvalidArgument("weighted_ce_loss: need background plus at least one class");
  if (target >= probs.size()) {
    throw InvalidArgument("weighted_ce_loss: target " + std::to_string(target) + " out of range");
  }
  if (weights.size() + 1 != probs.size()) {
    throw InvalidArgument("weighted_ce_loss: weight table covers " + std::to_string(weights.size()) +
                          " classes, probabilities cover " + std::to_string(probs.size() - 1));
  }
  LossGradVec out{0.0, std::vector<double>(probs.size(), 0.0)};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double pi = probs[i];
    if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("weighted_ce_loss: probabilities must lie in (0, 1)");
    const double w = (i == 0 || i == target) ? 1.0 : weights.weight(i);
    const bool y = i == target;
    out.loss -= w * (y ? std::log(pi) : std::log1p(-pi));
    out.grad[i] = w * (pi - (y ? 1.0 : 0.0));
  }
  return out;
}

}  // namespace balance
