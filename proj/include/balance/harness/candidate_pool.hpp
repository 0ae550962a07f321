#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/harness/box.hpp"
#include "balance/rng.hpp"
#include "balance/sampling.hpp"

namespace balance {

enum class IoUProfile {
  uniform,       // target IoU ~ U[0, 1]
  skewed,  // negatives concentrated below low_iou_cut
};

struct PoolSpec {
  IoUProfile profile = IoUProfile::skewed;
  std::size_t num_candidates = 10000;
  std::size_t num_gt = 8;
  std::size_t num_classes = 3;
  double positive_threshold = 0.5;
  // skewed only
  double positive_fraction = 0.1;
  double low_iou_mass = 0.7;
  double low_iou_cut = 0.05;

  void validate() const {
    if (num_candidates == 0) throw InvalidArgument("pool spec: num_candidates must be positive");
    if (num_gt > 0 && num_classes == 0) throw InvalidArgument("pool spec: num_classes must be positive");
    if (!(positive_threshold > 0.0 && positive_threshold < 1.0)) {
      throw InvalidArgument("pool spec: positive_threshold must be in (0, 1)");
    }
    if (!(positive_fraction >= 0.0 && positive_fraction < 1.0) || !(low_iou_mass >= 0.0 && low_iou_mass <= 1.0) ||
        !(low_iou_cut > 0.0 && low_iou_cut < positive_threshold)) {
      throw InvalidArgument("pool spec: skewed-profile parameters out of range");
    }
  }
};

inline IoUProfile parse_iou_profile(const std::string& name) {
  if (name == "uniform") return IoUProfile::uniform;
  if (name == "skewed" || name == "figure3") return IoUProfile::skewed;
  throw InvalidArgument("unknown pool profile '" + name + "' (uniform | skewed; figure3 is an alias of skewed)");
}

/// Synthetic anchors around synthetic ground truths.
///
/// Ground truths sit on a widely spaced grid so anchors only ever overlap
/// their own box. Each anchor first draws a target IoU from the profile and is
/// then placed as a same-size copy of its ground truth shifted by d * extent
/// along a random axis and direction, with d = (1 - u)/(1 + u), which gives
/// IoU u. The candidate's IoU is then measured with iou() against every
/// ground truth. IoU >= positive_threshold makes a positive of that box's
/// instance and class.
inline std::vector<Candidate> make_candidate_pool(const PoolSpec& spec, RngState& rng) {
  spec.validate();
  std::vector<Box> gts;
  std::vector<int> gt_class;
  for (std::size_t g = 0; g < spec.num_gt; ++g) {
    const double w = rng.uniform(1.0, 3.0);
    const double h = rng.uniform(1.0, 3.0);
    gts.push_back({100.0 * static_cast<double>(g % 16), 100.0 * static_cast<double>(g / 16), w, h});
    gt_class.push_back(1 + static_cast<int>(g % spec.num_classes));
  }
  std::vector<Candidate> pool;
  pool.reserve(spec.num_candidates);
  for (std::size_t k = 0; k < spec.num_candidates; ++k) {
    Candidate c;
    c.id = static_cast<std::int64_t>(k);
    if (gts.empty()) {
      pool.push_back(c);
      continue;
    }
    double target = 0.0;
    if (spec.profile == IoUProfile::uniform) {
      target = rng.uniform01();
    } else if (rng.bernoulli(spec.positive_fraction)) {
      target = rng.uniform(spec.positive_threshold, 1.0);
    } else if (rng.bernoulli(spec.low_iou_mass)) {
      target = rng.uniform(0.0, spec.low_iou_cut);
    } else {
      target = rng.uniform(spec.low_iou_cut, spec.positive_threshold);
    }
    const std::size_t g = static_cast<std::size_t>(rng.uniform_below(gts.size()));
    const double shift = (1.0 - target) / (1.0 + target);
    const double dir = rng.bernoulli(0.5) ? 1.0 : -1.0;
    Box anchor = gts[g];
    if (rng.bernoulli(0.5)) {
      anchor.cx += dir * shift * anchor.w;
    } else {
      anchor.cy += dir * shift * anchor.h;
    }
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double v = iou(anchor, gts[j]);
      if (v > best_iou) {
        best_iou = v;
        best = j;
      }
    }
    c.iou = best_iou;
    if (best_iou >= spec.positive_threshold) {
      c.is_positive = true;
      c.instance_id = static_cast<int>(best);
      c.class_id = gt_class[best];
    }
    pool.push_back(c);
  }
  return pool;
}

inline std::vector<Candidate> negatives_of(const std::vector<Candidate>& pool) {
  std::vector<Candidate> out;
  for (const auto& c : pool)
    if (!c.is_positive) out.push_back(c);
  return out;
}

inline std::vector<Candidate> positives_of(const std::vector<Candidate>& pool) {
  std::vector<Candidate> out;
  for (const auto& c : pool)
    if (c.is_positive) out.push_back(c);
  return out;
}

}  // namespace balance
