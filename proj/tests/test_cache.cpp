// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "moelab/cache.hpp"
#include "moelab/oracle.hpp"
#include "support.hpp"

using namespace moelab;
using fixtures::one_layer;
using fixtures::top1;

namespace {

fixtures::RandomShape in_budget(std::mt19937_64& rng) {
  fixtures::RandomShape shape;
  shape.experts = 1 + static_cast<std::uint32_t>(rng() % 6);
  shape.max_sequences = 3;
  shape.max_len = 4;
  return shape;
}

}  // namespace

TEST(SegmentCache, RefillPerSegment) {
  const auto r = sch_oracle(top1(4, {0, 0, 1, 1}), 0, 1, 2);
  EXPECT_DOUBLE_EQ(r.hit_rate, 1.0);
  EXPECT_EQ(r.hits, 4u);
}

TEST(SegmentCache, TwoDistinctPerSegment) {
  const auto r = sch_oracle(top1(4, {0, 1, 2, 3}), 0, 1, 2);
  EXPECT_DOUBLE_EQ(r.hit_rate, 0.5);
}

TEST(SegmentCache, PartialLastSegmentCounts) {
  // Segments [0,0,1] and [1]; one slot holds 0 then 1.
  const auto r = sch_oracle(top1(4, {0, 0, 1, 1}), 0, 1, 3);
  EXPECT_EQ(r.hits, 3u);
  EXPECT_EQ(r.total_activations, 4u);
}

TEST(SegmentCache, TiesPickLowerIndexWithoutChangingHits) {
  const auto r = sch_oracle(top1(4, {2, 1}), 0, 1, 2);
  EXPECT_EQ(r.hits, 1u);
}

TEST(SegmentCache, FullCapacityAndEmptyLayer) {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) {
    const auto t = fixtures::random_trace(rng, {});
    const auto r = sch_oracle(t, 0, 4, 3);
    EXPECT_DOUBLE_EQ(r.hit_rate, 1.0);
    EXPECT_EQ(r.hits, r.total_activations);
  }
  const auto empty = one_layer(3, {{{}, {}, {}}});
  const auto r = sch_oracle(empty, 0, 1, 2);
  EXPECT_TRUE(r.no_activations);
  EXPECT_DOUBLE_EQ(r.hit_rate, 1.0);
  EXPECT_EQ(r.misses(), 0u);
}

TEST(SegmentCache, MatchesExhaustiveSubsets) {
  std::mt19937_64 rng(52);
  for (int i = 0; i < 400; ++i) {
    const auto shape = in_budget(rng);
    const auto t = fixtures::random_trace(rng, shape);
    const std::size_t m = 1 + rng() % 4;
    for (std::uint32_t c = 0; c <= shape.experts; ++c) {
      const auto fast = sch_oracle(t, 0, c, m);
      const auto slow = oracle::brute_force_cache(t, 0, c, m);
      ASSERT_EQ(fast.hits, slow.hits) << "capacity " << c << " m " << m;
      ASSERT_EQ(fast.total_activations, slow.total);
      ASSERT_EQ(fast.no_activations, slow.no_activations);
    }
  }
}

TEST(Lru, HandSimulations) {
  EXPECT_DOUBLE_EQ(lru_hit_rate(top1(4, {0, 1, 0, 1}), 0, 1).hit_rate, 0.0);
  EXPECT_DOUBLE_EQ(lru_hit_rate(top1(4, {0, 1, 0, 1}), 0, 2).hit_rate, 0.5);
  EXPECT_DOUBLE_EQ(lru_hit_rate(top1(8, {5, 5, 5, 5}), 0, 1).hit_rate, 0.75);
}

TEST(Lru, ResetsBetweenSequences) {
  const auto t = one_layer(2, {{{0}, {0}}, {{0}, {0}}});
  EXPECT_EQ(lru_hit_rate(t, 0, 1).hits, 2u);
}

TEST(Lru, MatchesDirectListSimulation) {
  std::mt19937_64 rng(53);
  for (int i = 0; i < 200; ++i) {
    fixtures::RandomShape shape;
    shape.experts = 6;
    shape.max_len = 20;
    const auto t = fixtures::random_trace(rng, shape);
    for (std::uint32_t c = 0; c <= 6; ++c) {
      std::uint64_t hits = 0;
      for (const auto& seq : t.sequences) {
        std::vector<std::uint32_t> cache;  // most recent first
        for (std::size_t tk = 0; tk < seq.size(); ++tk) {
          for (auto e : seq.activations[0].token(tk)) {
            const auto it = std::find(cache.begin(), cache.end(), e);
            if (it != cache.end()) {
              ++hits;
              cache.erase(it);
            }
            cache.insert(cache.begin(), e);
            if (cache.size() > c) cache.pop_back();
          }
        }
      }
      ASSERT_EQ(lru_hit_rate(t, 0, c).hits, hits) << "capacity " << c;
    }
  }
}

TEST(CacheProperties, MonotoneInCapacityAndHitsPlusMisses) {
  std::mt19937_64 rng(54);
  for (int i = 0; i < 100; ++i) {
    fixtures::RandomShape shape;
    shape.experts = 8;
    shape.layers = 2;
    shape.max_len = 30;
    const auto t = fixtures::random_trace(rng, shape);
    std::vector<std::uint32_t> caps{0, 1, 2, 3, 4, 5, 6, 7, 8};
    for (std::uint32_t layer = 0; layer < 2; ++layer) {
      const auto s = capacity_sweep(t, layer, caps, 4);
      for (std::size_t j = 1; j < s.rows.size(); ++j) {
        EXPECT_GE(s.rows[j].sch_hits, s.rows[j - 1].sch_hits);
        EXPECT_GE(s.rows[j].lru_hits, s.rows[j - 1].lru_hits);
      }
      const auto r = sch_oracle(t, layer, 3, 4);
      EXPECT_EQ(r.hits + r.misses(), r.total_activations);
    }
  }
}

TEST(CacheProperties, DominanceHoldsForSingleTokenSegments) {
  // One-token segments cache exactly the token's experts, the per-token
  // maximum, so no replacement policy can do better.
  std::mt19937_64 rng(55);
  for (int i = 0; i < 200; ++i) {
    fixtures::RandomShape shape;
    shape.experts = 6;
    shape.max_len = 16;
    const auto t = fixtures::random_trace(rng, shape);
    for (std::uint32_t c = 0; c <= 6; ++c) {
      EXPECT_GE(sch_oracle(t, 0, c, 1).hits, lru_hit_rate(t, 0, c).hits);
    }
  }
}

TEST(CacheProperties, LruCanBeatSegmentOracle) {
  // LRU swaps residents mid-segment; a fixed per-segment set cannot.
  // Segments [0,0,1,1] and [1,1,0,0]: the oracle keeps one expert per
  // segment (2 + 2 hits) while LRU hits 1 + 2 + 2 times.
  const auto t = top1(2, {0, 0, 1, 1, 1, 1, 0, 0});
  EXPECT_EQ(sch_oracle(t, 0, 1, 4).hits, 4u);
  EXPECT_EQ(lru_hit_rate(t, 0, 1).hits, 5u);
  EXPECT_EQ(oracle::brute_force_cache(t, 0, 1, 4).hits, 4u);

  const auto u = top1(2, {0, 0, 0, 1, 1, 1});
  EXPECT_EQ(sch_oracle(u, 0, 1, 6).hits, 3u);
  EXPECT_EQ(lru_hit_rate(u, 0, 1).hits, 4u);
}

TEST(Sweep, EndpointsAndKnee) {
  const auto t = top1(4, {0, 1, 0, 1, 2, 3, 2, 3});
  const std::vector<std::uint32_t> caps{0, 1, 2, 4};
  const auto s = capacity_sweep(t, 0, caps, 4);
  EXPECT_DOUBLE_EQ(s.rows.front().sch, 0.0);
  EXPECT_DOUBLE_EQ(s.rows.back().sch, 1.0);
  // Two experts per segment: capacity 1 gets half, capacity 2 all.
  EXPECT_DOUBLE_EQ(s.rows[1].sch, 0.5);
  ASSERT_TRUE(s.knee.has_value());
  EXPECT_EQ(*s.knee, 2u);
  EXPECT_TRUE(s.rows[2].knee);
  EXPECT_FALSE(s.rows[1].knee);
}

TEST(Sweep, RejectsUnsortedCapacities) {
  const auto t = top1(4, {0, 1});
  const std::vector<std::uint32_t> caps{2, 1};
  EXPECT_THROW(capacity_sweep(t, 0, caps, 2), Error);
}

TEST(Model, ActivationWeightedAcrossLayers) {
  auto t = one_layer(4, {{{0}, {1}, {0}, {1}}});
  t.header = TraceHeader::uniform("two", 2, 4, 0);
  // Layer 1 fires twice per token on the same pair: 8 activations.
  t.sequences[0].activations.emplace_back();
  for (int i = 0; i < 4; ++i) t.sequences[0].activations[1].push_token({2, 3});
  const auto r = simulate_model(t, {1, 4, CachePolicy::OracleSegment});
  // Layer 0: one segment, best expert 2 of 4. Layer 1: 4 of 8.
  EXPECT_EQ(r.hits, 6u);
  EXPECT_EQ(r.total_activations, 12u);
  ASSERT_EQ(r.per_layer.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_layer[0], 0.5);
  EXPECT_DOUBLE_EQ(r.per_layer[1], 0.5);
  EXPECT_THROW(sch_oracle(t, 2, 1, 4), Error);
}

TEST(Counter, ThreadCountDoesNotChangeHits) {
  std::mt19937_64 rng(56);
  fixtures::RandomShape shape;
  shape.max_sequences = 30;
  shape.max_len = 40;
  shape.experts = 8;
  const auto t = fixtures::random_trace(rng, shape);
  for (std::uint32_t c = 0; c <= 8; ++c) {
    EXPECT_EQ(sch_oracle(t, 0, c, 8, 1).hits, sch_oracle(t, 0, c, 8, 4).hits);
    EXPECT_EQ(lru_hit_rate(t, 0, c, 1).hits, lru_hit_rate(t, 0, c, 4).hits);
  }
}
