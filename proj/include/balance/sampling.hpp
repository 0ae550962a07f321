#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "balance/error.hpp"
#include "balance/rng.hpp"

namespace balance {

/// One sampling unit: an anchor or proposal with its overlap against the
/// matched ground truth.
struct Candidate {
  std::int64_t id = 0;
  double iou = 0.0;
  int class_id = 0;  // 0 = background
  std::optional<int> instance_id;
  bool is_positive = false;

  void validate() const {
    if (!(iou >= 0.0 && iou <= 1.0)) {
      throw InvalidArgument("candidate " + std::to_string(id) + ": iou must lie in [0, 1]");
    }
    if (class_id < 0) throw InvalidArgument("candidate " + std::to_string(id) + ": negative class id");
    if (is_positive && (!instance_id || class_id <= 0)) {
      throw InvalidArgument("candidate " + std::to_string(id) +
                            ": positives need an instance id and a foreground class");
    }
  }

  bool operator==(const Candidate&) const = default;
};

struct IoUSamplerConfig {
  std::size_t num_samples = 512;
  std::size_t num_bins = 3;
  double iou_floor = 0.0;
  double iou_ceiling = 0.5;

  void validate() const {
    if (num_samples == 0) throw InvalidArgument("iou sampler: num_samples must be positive");
    if (num_bins == 0) throw InvalidArgument("iou sampler: num_bins must be positive");
    if (!(iou_floor >= 0.0 && iou_floor < iou_ceiling && iou_ceiling <= 1.0)) {
      throw InvalidArgument("iou sampler: need 0 <= iou_floor < iou_ceiling <= 1");
    }
  }

  /// Bin of `iou` over [floor, ceiling): half-open bins, last bin closed at the
  /// ceiling. Values outside the interval have no bin.
  std::optional<std::size_t> bin_of(double iou) const {
    if (iou < iou_floor || iou > iou_ceiling) return std::nullopt;
    const double rel = (iou - iou_floor) / (iou_ceiling - iou_floor);
    const auto k = static_cast<std::size_t>(rel * static_cast<double>(num_bins));
    return std::min(k, num_bins - 1);
  }
};

/// Audit record of one draw. For the positive samplers the "bins" are
/// instances or classes, in ascending id order.
struct SampleDraw {
  std::vector<std::int64_t> selected_ids;
  std::vector<std::size_t> per_bin_counts;
  std::vector<std::size_t> per_bin_candidates;

  bool operator==(const SampleDraw&) const = default;
};

namespace detail {

inline void validate_pool(const std::vector<Candidate>& pool) {
  std::unordered_set<std::int64_t> seen;
  seen.reserve(pool.size());
  for (const auto& c : pool) {
    c.validate();
    if (!seen.insert(c.id).second) throw InvalidArgument("duplicate candidate id " + std::to_string(c.id));
  }
}

/// Partial Fisher-Yates: moves k uniformly chosen elements of `items` to its
/// front, in draw order.
template <typename T>
void choose_front(std::vector<T>& items, std::size_t k, RngState& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(items.size() - i));
    std::swap(items[i], items[j]);
  }
}

/// Splits n into `parts` near-equal quotas, remainder to the lowest indices.
inline std::vector<std::size_t> split_quota(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> q(parts, parts == 0 ? 0 : n / parts);
  for (std::size_t k = 0; k < (parts == 0 ? 0 : n % parts); ++k) ++q[k];
  return q;
}

/// Result of drawing positions out of stratified position lists.
struct StratifiedPick {
  std::vector<std::size_t> picked;  // positions into the pool, draw order
  std::vector<std::size_t> per_stratum;
};

/// Takes min(quota_k, |stratum_k|) uniformly from each stratum, then fills the
/// remaining deficit uniformly from everything not yet taken.
inline StratifiedPick draw_stratified(std::vector<std::vector<std::size_t>> strata,
                                      const std::vector<std::size_t>& quotas, RngState& rng) {
  StratifiedPick out;
  out.per_stratum.assign(strata.size(), 0);
  std::size_t wanted = 0;
  std::vector<std::pair<std::size_t, std::size_t>> leftovers;  // (position, stratum)
  for (std::size_t k = 0; k < strata.size(); ++k) {
    wanted += quotas[k];
    const std::size_t take = std::min(quotas[k], strata[k].size());
    choose_front(strata[k], take, rng);
    out.picked.insert(out.picked.end(), strata[k].begin(), strata[k].begin() + static_cast<std::ptrdiff_t>(take));
    out.per_stratum[k] = take;
    for (std::size_t i = take; i < strata[k].size(); ++i) leftovers.emplace_back(strata[k][i], k);
  }
  const std::size_t deficit = std::min(wanted - out.picked.size(), leftovers.size());
  choose_front(leftovers, deficit, rng);
  for (std::size_t i = 0; i < deficit; ++i) {
    out.picked.push_back(leftovers[i].first);
    ++out.per_stratum[leftovers[i].second];
  }
  return out;
}

inline void require_all_positive(const std::vector<Candidate>& pool, const char* who) {
  if (pool.empty()) throw InsufficientCandidates(1, 0);
  for (const auto& c : pool) {
    if (!c.is_positive) {
      throw InvalidArgument(std::string(who) + ": candidate " + std::to_string(c.id) + " is not positive");
    }
  }
}

inline SampleDraw to_draw(const std::vector<Candidate>& pool, const StratifiedPick& pick,
                          const std::vector<std::vector<std::size_t>>& strata) {
  SampleDraw d;
  d.selected_ids.reserve(pick.picked.size());
  for (std::size_t pos : pick.picked) d.selected_ids.push_back(pool[pos].id);
  d.per_bin_counts = pick.per_stratum;
  for (const auto& s : strata) d.per_bin_candidates.push_back(s.size());
  return d;
}

}  // namespace detail

/// Uniform draw of n distinct candidates; each has selection probability n/M.
inline SampleDraw random_sample(const std::vector<Candidate>& pool, std::size_t n, RngState& rng) {
  detail::validate_pool(pool);
  if (n == 0) throw InvalidArgument("random_sample: n must be positive");
  if (n > pool.size()) throw InsufficientCandidates(n, pool.size());
  std::vector<std::vector<std::size_t>> strata(1);
  for (std::size_t i = 0; i < pool.size(); ++i) strata[0].push_back(i);
  const auto pick = detail::draw_stratified(strata, {n}, rng);
  return detail::to_draw(pool, pick, strata);
}

/// IoU-balanced negative sampling. The interval [iou_floor, iou_ceiling] is cut
/// into K equal bins, each with quota N/K (remainder to the low bins), and each
/// bin is sampled uniformly, so a candidate in bin k is picked with
/// probability (N/K)/M_k. Short bins give up all their candidates and the
/// deficit is drawn uniformly from the unselected rest. Candidates whose IoU
/// lies outside the interval are not eligible.
inline SampleDraw iou_balanced_sample(const std::vector<Candidate>& pool, const IoUSamplerConfig& cfg,
                                      RngState& rng) {
  cfg.validate();
  detail::validate_pool(pool);
  if (pool.empty()) throw InsufficientCandidates(cfg.num_samples, 0);
  std::vector<std::vector<std::size_t>> bins(cfg.num_bins);
  std::size_t eligible = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].is_positive) {
      throw InvalidArgument("iou_balanced_sample: candidate " + std::to_string(pool[i].id) + " is positive");
    }
    if (auto k = cfg.bin_of(pool[i].iou)) {
      bins[*k].push_back(i);
      ++eligible;
    }
  }
  if (eligible == 0) throw InsufficientCandidates(cfg.num_samples, 0);
  const auto pick = detail::draw_stratified(bins, detail::split_quota(cfg.num_samples, cfg.num_bins), rng);
  return detail::to_draw(pool, pick, bins);
}

/// Equal quota per ground-truth instance (remainder to the lowest instance
/// ids); starved instances give all they have and the deficit is drawn
/// uniformly over the remaining positives.
inline SampleDraw instance_balanced_positive_sample(const std::vector<Candidate>& pool, std::size_t n,
                                                    RngState& rng) {
  detail::require_all_positive(pool, "instance_balanced_positive_sample");
  detail::validate_pool(pool);
  if (n == 0) throw InvalidArgument("instance_balanced_positive_sample: n must be positive");
  std::map<int, std::vector<std::size_t>> by_instance;
  for (std::size_t i = 0; i < pool.size(); ++i) by_instance[*pool[i].instance_id].push_back(i);
  std::vector<std::vector<std::size_t>> strata;
  for (auto& [id, members] : by_instance) strata.push_back(std::move(members));
  const auto pick = detail::draw_stratified(strata, detail::split_quota(n, strata.size()), rng);
  return detail::to_draw(pool, pick, strata);
}

/// Equal quota per foreground class (remainder to the lowest class ids), then
/// instance-balanced sampling inside each class. Class-level deficits are drawn
/// uniformly over the remaining positives.
inline SampleDraw class_balanced_positive_sample(const std::vector<Candidate>& pool, std::size_t n,
                                                 RngState& rng) {
  detail::require_all_positive(pool, "class_balanced_positive_sample");
  detail::validate_pool(pool);
  if (n == 0) throw InvalidArgument("class_balanced_positive_sample: n must be positive");
  std::map<int, std::vector<Candidate>> by_class;
  for (const auto& c : pool) by_class[c.class_id].push_back(c);
  const auto quotas = detail::split_quota(n, by_class.size());

  SampleDraw out;
  std::unordered_set<std::int64_t> taken;
  std::vector<std::pair<std::int64_t, std::size_t>> leftovers;  // (id, class slot)
  std::size_t slot = 0;
  for (const auto& [cls, members] : by_class) {
    const std::size_t q = std::min(quotas[slot], members.size());
    std::size_t got = 0;
    if (q > 0) {
      const SampleDraw inner = instance_balanced_positive_sample(members, q, rng);
      for (auto id : inner.selected_ids) {
        out.selected_ids.push_back(id);
        taken.insert(id);
      }
      got = inner.selected_ids.size();
    }
    for (const auto& c : members)
      if (!taken.contains(c.id)) leftovers.emplace_back(c.id, slot);
    out.per_bin_counts.push_back(got);
    out.per_bin_candidates.push_back(members.size());
    ++slot;
  }
  const std::size_t deficit = std::min(n - std::min(n, out.selected_ids.size()), leftovers.size());
  detail::choose_front(leftovers, deficit, rng);
  for (std::size_t i = 0; i < deficit; ++i) {
    out.selected_ids.push_back(leftovers[i].first);
    ++out.per_bin_counts[leftovers[i].second];
  }
  return out;
}

}  // namespace balance
