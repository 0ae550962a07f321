#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "balance/reweight.hpp"
#include "balance/rng.hpp"

using namespace balance;

namespace {

const std::vector<double> kExpectedX{1.0, 7.0 / 9.0, 5.0 / 9.0, 2.0 / 9.0, 0.0};
// sigmoid((x - 0.5)/0.025), 30-digit evaluation
const std::vector<double> kExpectedW{0.999999997938846381809796418569, 0.999985054884835023986852451899,
                                     0.902227400149200679748617186827, 0.0000149451151649760131475481008714,
                                     0.00000000206115361819020358143086212947};

ClassFrequencyTable random_table(RngState& rng) {
  ClassFrequencyTable t;
  const std::size_t n = 1 + rng.uniform_below(30);
  for (std::size_t k = 0; k < n; ++k) {
    // log-uniform counts between 1 and ~1e6
    t.counts.push_back(static_cast<std::uint64_t>(std::exp(rng.uniform(0.0, 13.8))) + 1);
  }
  return t;
}

}  // namespace

TEST(ComputeWeights, LongTailExample) {
  const auto table = compute_weights({{10000, 1000, 100, 10, 1}});
  ASSERT_EQ(table.size(), 5u);
  const std::vector<std::size_t> buckets{9, 7, 5, 2, 0};
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& e = table.entries()[k];
    EXPECT_EQ(e.class_id, static_cast<int>(k + 1));
    EXPECT_EQ(e.bucket, buckets[k]);
    EXPECT_NEAR(e.position, kExpectedX[k], 1e-15);
    EXPECT_NEAR(e.weight, kExpectedW[k], 1e-12);
    EXPECT_NEAR(e.log_frequency, std::log(static_cast<double>(e.frequency)), 0.0);
  }
}

TEST(ComputeWeights, MidpointAndDegenerate) {
  // S = 3: positions 0, 0.5, 1; the middle class sits on the turning point
  const auto mid = compute_weights({{1, 10, 100}}, {3, 0.5, 0.025});
  EXPECT_EQ(mid.entries()[1].position, 0.5);
  EXPECT_EQ(mid.entries()[1].weight, 0.5);

  const auto flat = compute_weights({{42, 42, 42}});
  for (const auto& e : flat.entries()) {
    EXPECT_EQ(e.bucket, 9u);
    EXPECT_EQ(e.position, 1.0);
    EXPECT_EQ(e.weight, flat.entries()[0].weight);
  }
}

TEST(ComputeWeights, Errors) {
  EXPECT_THROW(compute_weights({{}}), InvalidArgument);
  EXPECT_THROW(compute_weights({{5, 0, 3}}), InvalidArgument);
  EXPECT_THROW(compute_weights({{5}}, {1, 0.5, 0.025}), InvalidArgument);
  EXPECT_THROW(compute_weights({{5}}, {10, 1.5, 0.025}), InvalidArgument);
  EXPECT_THROW(compute_weights({{5}}, {10, 0.5, 0.0}), InvalidArgument);
}

TEST(ComputeWeights, InteriorEdgeGoesUp) {
  // ln range [0, ln 100], S = 2: ln 10 sits exactly on the single interior edge
  const auto t = compute_weights({{1, 10, 100}}, {2, 0.5, 0.025});
  EXPECT_EQ(t.entries()[0].bucket, 0u);
  EXPECT_EQ(t.entries()[1].bucket, 1u);
  EXPECT_EQ(t.entries()[2].bucket, 1u);
}

TEST(ComputeWeights, PropertiesOverRandomTables) {
  RngState rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto freqs = random_table(rng);
    const auto table = compute_weights(freqs);
    for (std::size_t i = 0; i < freqs.counts.size(); ++i) {
      const auto& a = table.entries()[i];
      EXPECT_GT(a.weight, 0.0);
      EXPECT_LT(a.weight, 1.0);
      EXPECT_EQ(a.position, static_cast<double>(a.bucket) / 9.0);
      EXPECT_EQ(a.weight, 1.0 / (1.0 + std::exp(-(a.position - 0.5) / 0.025)));
      for (std::size_t j = 0; j < freqs.counts.size(); ++j) {
        if (freqs.counts[i] <= freqs.counts[j]) {
          EXPECT_LE(a.weight, table.entries()[j].weight);
        }
      }
    }
    ClassFrequencyTable scaled = freqs;
    const std::uint64_t k = 1 + rng.uniform_below(1000);
    for (auto& c : scaled.counts) c *= k;
    const auto st = compute_weights(scaled);
    for (std::size_t i = 0; i < freqs.counts.size(); ++i) {
      EXPECT_EQ(st.entries()[i].bucket, table.entries()[i].bucket);
      EXPECT_EQ(st.entries()[i].weight, table.entries()[i].weight);
    }
  }
}

TEST(ComputeWeights, SymmetricBuckets) {
  // one class per bucket: counts e^0 .. e^9 spread evenly in log space
  ClassFrequencyTable freqs;
  for (int s = 0; s <= 10; ++s) freqs.counts.push_back(static_cast<std::uint64_t>(std::llround(std::pow(10.0, s))));
  const auto table = compute_weights(freqs);
  std::vector<double> by_bucket(10, -1.0);
  for (const auto& e : table.entries()) by_bucket[e.bucket] = e.weight;
  for (std::size_t s = 0; s < 10; ++s) {
    ASSERT_GE(by_bucket[s], 0.0);
    EXPECT_NEAR(by_bucket[s] + by_bucket[9 - s], 1.0, 1e-12);
  }
}

TEST(WeightedCe, SingleClassIsPlainBinaryCe) {
  const auto table = compute_weights({{3}});
  const std::vector<double> p{0.3, 0.6};
  const auto lg = weighted_ce_loss(p, 1, table);
  EXPECT_NEAR(lg.loss, -std::log(0.7) - std::log(0.6), 1e-15);
  EXPECT_NEAR(lg.grad[0], 0.3, 1e-15);
  EXPECT_NEAR(lg.grad[1], -0.4, 1e-15);
}

TEST(WeightedCe, UnitWeightsIsPlainMultiLabelCe) {
  const std::vector<double> p{0.2, 0.9, 0.4, 0.05};
  const auto lg = weighted_ce_loss(p, 2, ClassWeightTable::unit(3));
  const double expected = -std::log(0.8) - std::log(0.1) - std::log(0.4) - std::log(0.95);
  EXPECT_NEAR(lg.loss, expected, 1e-14);
  EXPECT_NEAR(lg.grad[2], -0.6, 1e-15);
  EXPECT_NEAR(lg.grad[1], 0.9, 1e-15);
}

TEST(WeightedCe, RareNegativeClassGradientIsScaled) {
  // class 1 rare (bucket 0), class 2 frequent
  const auto table = compute_weights({{1, 10000}});
  const std::vector<double> p{0.1, 0.7, 0.3};
  const auto weighted = weighted_ce_loss(p, 2, table);
  const auto plain = weighted_ce_loss(p, 2, ClassWeightTable::unit(2));
  EXPECT_NEAR(weighted.grad[1] / plain.grad[1], table.weight(1), 1e-15);
  EXPECT_NEAR(table.weight(1), 2.0611536181902036e-9, 1e-20);
  // background and target keep weight 1
  EXPECT_EQ(weighted.grad[0], plain.grad[0]);
  EXPECT_EQ(weighted.grad[2], plain.grad[2]);
}

TEST(WeightedCe, TargetAndBackgroundAlwaysProtected) {
  RngState rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    ClassFrequencyTable freqs;
    const std::size_t classes = 1 + rng.uniform_below(6);
    for (std::size_t k = 0; k < classes; ++k) freqs.counts.push_back(1 + rng.uniform_below(5000));
    const auto table = compute_weights(freqs);
    std::vector<double> p(classes + 1);
    for (double& v : p) v = rng.uniform(0.01, 0.99);
    const auto target = rng.uniform_below(classes + 1);
    const auto lg = weighted_ce_loss(p, target, table);
    const auto plain = weighted_ce_loss(p, target, ClassWeightTable::unit(classes));
    EXPECT_EQ(lg.grad[0], plain.grad[0]);
    EXPECT_EQ(lg.grad[target], plain.grad[target]);
  }
}

TEST(WeightedCe, Errors) {
  const auto table = ClassWeightTable::unit(2);
  EXPECT_THROW(weighted_ce_loss(std::vector<double>{0.5, 0.5, 0.5}, 3, table), InvalidArgument);
  EXPECT_THROW(weighted_ce_loss(std::vector<double>{0.5, 0.5}, 1, table), InvalidArgument);
  EXPECT_THROW(weighted_ce_loss(std::vector<double>{0.5, 1.0, 0.5}, 1, table), InvalidArgument);
}
