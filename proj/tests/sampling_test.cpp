#include <gtest/gtest.h>

#include <map>
#include <set>
#include <vector>

#include "balance/sampling.hpp"
#include "test_support.hpp"

using namespace balance;
using balance::testing::chi_square_p;
using balance::testing::two_sample_p;
using balance::testing::uniform_counts_p;

namespace {

std::vector<Candidate> negatives_with_ious(const std::vector<double>& ious) {
  std::vector<Candidate> pool;
  for (std::size_t k = 0; k < ious.size(); ++k) pool.push_back({static_cast<std::int64_t>(k), ious[k], 0, {}, false});
  return pool;
}

/// M_k = (100, 20, 4) over [0, 0.5) with K = 3.
std::vector<Candidate> pool_100_20_4() {
  std::vector<double> ious;
  for (int k = 0; k < 100; ++k) ious.push_back(0.10 * k / 100.0);
  for (int k = 0; k < 20; ++k) ious.push_back(0.20 + 0.1 * k / 20.0);
  for (int k = 0; k < 4; ++k) ious.push_back(0.40 + 0.02 * k);
  return negatives_with_ious(ious);
}

std::vector<Candidate> positives(const std::vector<std::pair<int, int>>& class_instance_sizes) {
  // each entry: (class id, number of candidates) for a new instance
  std::vector<Candidate> pool;
  int instance = 0;
  for (auto [cls, n] : class_instance_sizes) {
    for (int k = 0; k < n; ++k) {
      pool.push_back({static_cast<std::int64_t>(pool.size()), 0.7, cls, instance, true});
    }
    ++instance;
  }
  return pool;
}

std::map<int, int> count_by_instance(const std::vector<Candidate>& pool, const SampleDraw& d) {
  std::map<int, int> out;
  for (auto id : d.selected_ids) ++out[*pool[static_cast<std::size_t>(id)].instance_id];
  return out;
}

void expect_valid_draw(const SampleDraw& d, std::size_t max_n) {
  EXPECT_LE(d.selected_ids.size(), max_n);
  EXPECT_EQ(std::set<std::int64_t>(d.selected_ids.begin(), d.selected_ids.end()).size(), d.selected_ids.size());
  std::size_t total = 0;
  for (auto c : d.per_bin_counts) total += c;
  EXPECT_EQ(total, d.selected_ids.size());
}

}  // namespace

TEST(Candidate, Invariants) {
  EXPECT_THROW((Candidate{0, 1.5, 0, {}, false}).validate(), InvalidArgument);
  EXPECT_THROW((Candidate{0, 0.7, 0, 1, true}).validate(), InvalidArgument);
  EXPECT_THROW((Candidate{0, 0.7, 2, {}, true}).validate(), InvalidArgument);
  EXPECT_NO_THROW((Candidate{0, 0.7, 2, 1, true}).validate());
}

TEST(IoUSamplerConfig, BinsAreHalfOpenWithClosedTop) {
  IoUSamplerConfig cfg{12, 3, 0.0, 0.5};
  EXPECT_EQ(cfg.bin_of(0.0), 0u);
  EXPECT_EQ(cfg.bin_of(0.2), 1u);
  EXPECT_EQ(cfg.bin_of(0.5), 2u);
  EXPECT_EQ(cfg.bin_of(0.51), std::nullopt);
  EXPECT_THROW((IoUSamplerConfig{12, 3, 0.5, 0.5}).validate(), InvalidArgument);
}

TEST(RandomSample, ExhaustiveAndErrors) {
  const auto pool = negatives_with_ious({0.1, 0.2, 0.3, 0.4, 0.0});
  RngState rng(1);
  auto d = random_sample(pool, 5, rng);
  EXPECT_EQ(std::set<std::int64_t>(d.selected_ids.begin(), d.selected_ids.end()).size(), 5u);
  try {
    random_sample(pool, 6, rng);
    FAIL();
  } catch (const InsufficientCandidates& e) {
    EXPECT_EQ(e.requested(), 6u);
    EXPECT_EQ(e.available(), 5u);
  }
}

TEST(RandomSample, MarginalIsNOverMChiSquare) {
  std::vector<double> ious(1000, 0.1);
  const auto pool = negatives_with_ious(ious);
  RngState rng(2024);
  std::vector<double> hits(pool.size(), 0.0);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t)
    for (auto id : random_sample(pool, 64, rng).selected_ids) hits[static_cast<std::size_t>(id)] += 1.0;
  double total = 0.0;
  for (double h : hits) total += h;
  EXPECT_NEAR(total / (trials * 1000.0), 0.064, 1e-12);
  EXPECT_GT(uniform_counts_p(hits), 0.01);
}

TEST(IoUBalancedSample, QuotaPerBinAndProbabilities) {
  const auto pool = pool_100_20_4();
  IoUSamplerConfig cfg{12, 3, 0.0, 0.5};
  RngState rng(7);
  std::vector<double> hits(pool.size(), 0.0);
  const int trials = 50000;
  for (int t = 0; t < trials; ++t) {
    const auto d = iou_balanced_sample(pool, cfg, rng);
    ASSERT_EQ(d.per_bin_counts, (std::vector<std::size_t>{4, 4, 4}));
    ASSERT_EQ(d.per_bin_candidates, (std::vector<std::size_t>{100, 20, 4}));
    for (auto id : d.selected_ids) hits[static_cast<std::size_t>(id)] += 1.0;
  }
  const std::vector<std::pair<std::size_t, std::size_t>> ranges{{0, 100}, {100, 120}, {120, 124}};
  const std::vector<double> expected{0.04, 0.20, 1.0};
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> bin(hits.begin() + ranges[k].first, hits.begin() + ranges[k].second);
    double total = 0.0;
    for (double h : bin) total += h;
    EXPECT_NEAR(total / (trials * static_cast<double>(bin.size())), expected[k], 1e-12);
    if (expected[k] < 1.0) {
      EXPECT_GT(uniform_counts_p(bin), 0.01) << "bin " << k;
    }
  }
}

TEST(IoUBalancedSample, ShortBinDeficitGoesToOtherBins) {
  // bins hold (10, 10, 1); N = 9 gives quota 3 each, bin 2 can only give 1
  std::vector<double> ious;
  for (int k = 0; k < 10; ++k) ious.push_back(0.01 * k);
  for (int k = 0; k < 10; ++k) ious.push_back(0.2 + 0.01 * k);
  ious.push_back(0.45);
  const auto pool = negatives_with_ious(ious);
  RngState rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto d = iou_balanced_sample(pool, {9, 3, 0.0, 0.5}, rng);
    expect_valid_draw(d, 9);
    EXPECT_EQ(d.selected_ids.size(), 9u);
    EXPECT_EQ(d.per_bin_counts[2], 1u);
    EXPECT_EQ(d.per_bin_counts[0] + d.per_bin_counts[1], 8u);
    EXPECT_GE(d.per_bin_counts[0], 3u);
    EXPECT_GE(d.per_bin_counts[1], 3u);
  }
}

TEST(IoUBalancedSample, MoreBinsThanSamplesAndSmallPools) {
  const auto pool = pool_100_20_4();
  RngState rng(5);
  const auto d = iou_balanced_sample(pool, {2, 5, 0.0, 0.5}, rng);
  expect_valid_draw(d, 2);
  EXPECT_EQ(d.selected_ids.size(), 2u);
  // asking for more than exists returns everything eligible
  const auto all = iou_balanced_sample(pool, {500, 3, 0.0, 0.5}, rng);
  EXPECT_EQ(all.selected_ids.size(), pool.size());
}

TEST(IoUBalancedSample, Errors) {
  RngState rng(1);
  EXPECT_THROW(iou_balanced_sample({}, {}, rng), InsufficientCandidates);
  EXPECT_THROW(iou_balanced_sample(negatives_with_ious({0.9}), {}, rng), InsufficientCandidates);
  auto pool = negatives_with_ious({0.1, 0.2});
  pool[1].id = 0;
  EXPECT_THROW(iou_balanced_sample(pool, {}, rng), InvalidArgument);
}

TEST(IoUBalancedSample, SingleBinMatchesRandomSample) {
  std::vector<double> ious;
  RngState gen(8);
  for (int k = 0; k < 40; ++k) ious.push_back(gen.uniform(0.0, 0.5));
  const auto pool = negatives_with_ious(ious);
  // same seed, same stream: K = 1 reduces to the random draw exactly
  RngState a(77), b(77);
  for (int t = 0; t < 100; ++t) {
    EXPECT_EQ(iou_balanced_sample(pool, {10, 1, 0.0, 0.5}, a).selected_ids, random_sample(pool, 10, b).selected_ids);
  }
  // and in distribution across independent streams
  RngState c(1), d(2);
  std::vector<double> ha(pool.size(), 0.0), hb(pool.size(), 0.0);
  for (int t = 0; t < 20000; ++t) {
    for (auto id : iou_balanced_sample(pool, {10, 1, 0.0, 0.5}, c).selected_ids) ha[id] += 1;
    for (auto id : random_sample(pool, 10, d).selected_ids) hb[id] += 1;
  }
  EXPECT_GT(two_sample_p(ha, hb), 0.01);
}

TEST(IoUBalancedSample, PropertyNoDuplicatesNeverOverN) {
  RngState gen(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> ious(1 + gen.uniform_below(60));
    for (double& v : ious) v = gen.uniform(0.0, 0.6);
    IoUSamplerConfig cfg{1 + gen.uniform_below(40), 1 + gen.uniform_below(6), 0.0, 0.5};
    try {
      expect_valid_draw(iou_balanced_sample(negatives_with_ious(ious), cfg, gen), cfg.num_samples);
    } catch (const InsufficientCandidates&) {
      // every IoU fell above the ceiling
    }
  }
}

TEST(IoUBalancedSample, DeterministicForSeed) {
  const auto pool = pool_100_20_4();
  RngState a(1234), b(1234);
  EXPECT_EQ(iou_balanced_sample(pool, {12, 3, 0.0, 0.5}, a), iou_balanced_sample(pool, {12, 3, 0.0, 0.5}, b));
}

TEST(InstanceBalanced, EqualSplit) {
  const auto pool = positives({{1, 10}, {1, 10}});
  RngState rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto d = instance_balanced_positive_sample(pool, 4, rng);
    EXPECT_EQ(count_by_instance(pool, d), (std::map<int, int>{{0, 2}, {1, 2}}));
  }
}

TEST(InstanceBalanced, StarvedInstanceRedistributes) {
  const auto pool = positives({{1, 10}, {1, 1}});
  RngState rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto d = instance_balanced_positive_sample(pool, 4, rng);
    EXPECT_EQ(count_by_instance(pool, d), (std::map<int, int>{{0, 3}, {1, 1}}));
    EXPECT_EQ(d.per_bin_counts, (std::vector<std::size_t>{3, 1}));
  }
}

TEST(InstanceBalanced, SingleInstanceMatchesRandom) {
  const auto pool = positives({{2, 12}});
  RngState a(6), b(6);
  for (int t = 0; t < 50; ++t) {
    EXPECT_EQ(instance_balanced_positive_sample(pool, 4, a).selected_ids, random_sample(pool, 4, b).selected_ids);
  }
}

TEST(InstanceBalanced, Errors) {
  RngState rng(1);
  EXPECT_THROW(instance_balanced_positive_sample({}, 4, rng), InsufficientCandidates);
  EXPECT_THROW(instance_balanced_positive_sample(negatives_with_ious({0.1}), 4, rng), InvalidArgument);
}

TEST(ClassBalanced, QuotasPerClass) {
  RngState rng(10);
  const auto two = positives({{1, 10}, {2, 10}});
  for (int t = 0; t < 20; ++t) {
    EXPECT_EQ(class_balanced_positive_sample(two, 4, rng).per_bin_counts, (std::vector<std::size_t>{2, 2}));
  }
  const auto three = positives({{1, 10}, {2, 10}, {3, 10}});
  for (int t = 0; t < 20; ++t) {
    const auto d = class_balanced_positive_sample(three, 4, rng);
    EXPECT_EQ(d.per_bin_counts, (std::vector<std::size_t>{2, 1, 1}));
    expect_valid_draw(d, 4);
  }
}

TEST(ClassBalanced, InstanceBalancingInsideClassAndDeficit) {
  RngState rng(12);
  // class 1: two instances (8, 8); class 2: one instance with a single candidate
  const auto pool = positives({{1, 8}, {1, 8}, {2, 1}});
  for (int t = 0; t < 50; ++t) {
    const auto d = class_balanced_positive_sample(pool, 8, rng);
    expect_valid_draw(d, 8);
    EXPECT_EQ(d.selected_ids.size(), 8u);
    EXPECT_EQ(d.per_bin_counts, (std::vector<std::size_t>{7, 1}));
    const auto by_inst = count_by_instance(pool, d);
    // class 1 quota 4 split 2/2, then 3 extra drawn anywhere in class 1
    EXPECT_GE(by_inst.at(0), 2);
    EXPECT_GE(by_inst.at(1), 2);
  }
}

TEST(ClassBalanced, SingleClassMatchesInstanceBalanced) {
  const auto pool = positives({{3, 6}, {3, 9}});
  RngState a(21), b(21);
  for (int t = 0; t < 50; ++t) {
    EXPECT_EQ(class_balanced_positive_sample(pool, 5, a).selected_ids,
              instance_balanced_positive_sample(pool, 5, b).selected_ids);
  }
}
