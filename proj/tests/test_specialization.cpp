// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "moelab/specialization.hpp"
#include "moelab/synth.hpp"
#include "support.hpp"

using namespace moelab;
using fixtures::from_bits;
using fixtures::one_layer;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

// Domain "a" with `a_hits` of 10 tokens active, then domain "b" likewise.
RoutingTrace two_domains(int a_hits, int b_hits) {
  std::vector<int> a(10, 0), b(10, 0);
  for (int i = 0; i < a_hits; ++i) a[i] = 1;
  for (int i = 0; i < b_hits; ++i) b[i] = 1;
  auto t = from_bits({a, b});
  t.sequences[0].domain = "a";
  t.sequences[1].domain = "b";
  return t;
}

}  // namespace

TEST(Frequency, Basics) {
  const auto t = from_bits({{1, 0, 0, 1, 0, 0, 1, 0, 0, 0}});
  EXPECT_DOUBLE_EQ(activation_frequency(t, {0, 0}), 0.3);
  const auto never = from_bits({{0, 0, 0}});
  EXPECT_DOUBLE_EQ(activation_frequency(never, {0, 0}), 0.0);
  RoutingTrace empty;
  empty.header = TraceHeader::uniform("e", 1, 2, 0);
  EXPECT_EQ(code_of([&] { activation_frequency(empty, {0, 0}); }), ErrorCode::EmptyTrace);
}

TEST(Frequency, UniformRouterWithinBinomialBounds) {
  GeneratorConfig c;
  c.seed = 3;
  c.num_sequences = 200;
  c.seq_len = 500;  // 10^5 tokens
  const auto t = gen_iid_topk(c);
  const auto counts = count_activity(t, 1, false);
  const double n = static_cast<double>(counts.tokens());
  const double p = 1.0 / 8.0;
  // 4 SD per expert keeps the chance of a spurious miss across all 64
  // experts under half a percent.
  const double bound = 4.0 * std::sqrt(p * (1 - p) / n);
  for (std::uint32_t e = 0; e < 64; ++e) {
    EXPECT_NEAR(activation_frequency(counts, {0, e}), p, bound) << "expert " << e;
  }
}

TEST(LoadBalance, UniformAndSkewed) {
  const auto uniform = one_layer(4, {{{0, 1}, {2, 3}, {0, 1}, {2, 3}}});
  EXPECT_DOUBLE_EQ(load_balance_sd(uniform).per_layer_sd[0], 0.0);

  const auto skew = one_layer(4, {{{0, 1}, {}, {0, 1}, {}}});
  const auto lb = load_balance_sd(skew);
  EXPECT_DOUBLE_EQ(lb.per_layer_sd[0], 0.25);
  EXPECT_DOUBLE_EQ(lb.mean_sd, 0.25);
  EXPECT_DOUBLE_EQ(lb.pooled_sd, 0.25);
  EXPECT_EQ(lb.per_expert_rates[0], (std::vector<double>{0.5, 0.5, 0.0, 0.0}));
}

TEST(LoadBalance, PerLayerMeanAndPooledDiffer) {
  // Layer 0 balanced at rate 0.5, layer 1 balanced at rate 1.0.
  auto t = one_layer(2, {{{0}, {1}}});
  t.header = TraceHeader::uniform("two", 2, 2, 0);
  t.sequences[0].activations.emplace_back();
  t.sequences[0].activations[1].push_token({0, 1});
  t.sequences[0].activations[1].push_token({0, 1});
  const auto lb = load_balance_sd(t);
  EXPECT_DOUBLE_EQ(lb.mean_sd, 0.0);
  EXPECT_DOUBLE_EQ(lb.pooled_sd, 0.25);
}

TEST(Domain, EqualRatesHaveZeroCv) {
  const auto r = domain_specialization(two_domains(3, 3), {0, 0});
  EXPECT_DOUBLE_EQ(*r.domain_cv, 0.0);
}

TEST(Domain, OneDomainSilent) {
  const auto r = domain_specialization(two_domains(2, 0), {0, 0});
  EXPECT_DOUBLE_EQ(r.domain_rates.at("a"), 0.2);
  EXPECT_DOUBLE_EQ(r.domain_rates.at("b"), 0.0);
  EXPECT_DOUBLE_EQ(*r.domain_cv, 1.0);
}

TEST(Domain, UndefinedCases) {
  const auto single = from_bits({{1, 0, 1}});
  EXPECT_EQ(code_of([&] { domain_specialization(single, {0, 0}); }), ErrorCode::UndefinedCV);
  const auto silent = two_domains(0, 0);
  EXPECT_EQ(code_of([&] { domain_specialization(silent, {0, 0}); }), ErrorCode::UndefinedCV);
}

TEST(Domain, TokenWeightedMeanEqualsFrequency) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 100; ++i) {
    fixtures::RandomShape shape;
    shape.max_sequences = 8;
    shape.max_len = 20;
    const auto t = fixtures::random_trace(rng, shape);
    const auto counts = count_activity(t, 1, false);
    if (counts.tokens() == 0) continue;
    for (const auto& k : all_experts(t.header)) {
      const auto prof = domain_profile(counts, k);
      double weighted = 0.0;
      for (const auto& [name, rate] : prof.domain_rates) {
        weighted += rate * static_cast<double>(counts.domains().at(name).tokens);
      }
      EXPECT_NEAR(weighted / static_cast<double>(counts.tokens()), activation_frequency(counts, k), 1e-12);
    }
  }
}

TEST(Domain, CvIsScaleFree) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> rates(5);
    for (auto& r : rates) r = u(rng);
    std::vector<double> scaled = rates;
    const double k = 0.1 + 10 * u(rng);
    for (auto& r : scaled) r *= k;
    EXPECT_NEAR(*coefficient_of_variation(rates), *coefficient_of_variation(scaled), 1e-12);
  }
}

TEST(Vocab, LiftOfDedicatedToken) {
  // 200 tokens, 20 of them are token 42 and the expert fires exactly there.
  std::vector<int> bits(200, 0);
  auto t = from_bits({bits});
  for (std::size_t i = 0; i < 200; ++i) t.sequences[0].token_ids[i] = 7;
  LayerRouting routing;
  for (std::size_t i = 0; i < 200; ++i) {
    if (i % 10 == 0) {
      t.sequences[0].token_ids[i] = 42;
      routing.push_token({0});
    } else {
      routing.push_token({});
    }
  }
  t.sequences[0].activations[0] = routing;
  EXPECT_DOUBLE_EQ(activation_frequency(t, {0, 0}), 0.1);
  EXPECT_DOUBLE_EQ(vocab_specialization(t, {0, 0}, VocabKind::Input), 10.0);
  // Below min_support the token is ignored and nothing else qualifies with
  // any activation, leaving the best lift at 0.
  EXPECT_DOUBLE_EQ(vocab_specialization(t, {0, 0}, VocabKind::Input, 21), 0.0);
}

TEST(Vocab, IndependentActivationNearOne) {
  GeneratorConfig c;
  c.seed = 9;
  c.vocab_size = 4;
  c.num_sequences = 1000;
  c.seq_len = 500;
  const auto t = gen_iid_topk(c);
  const auto counts = count_activity(t);
  for (std::uint32_t e = 0; e < 8; ++e) {
    EXPECT_NEAR(vocab_specialization(counts, {0, e}, VocabKind::Input), 1.0, 0.05);
  }
}

TEST(Vocab, MissingStreamAndUndefinedScore) {
  const auto t = from_bits({{1, 0, 1, 0}});
  EXPECT_EQ(code_of([&] { vocab_specialization(t, {0, 0}, VocabKind::Predicted); }), ErrorCode::MissingTokenStream);
  EXPECT_EQ(code_of([&] { vocab_specialization(t, {0, 0}, VocabKind::GroundTruth); }),
            ErrorCode::MissingTokenStream);
  const auto never = fixtures::one_layer(2, {{{1}, {1}}});
  EXPECT_EQ(code_of([&] { vocab_specialization(never, {0, 0}, VocabKind::Input, 1); }), ErrorCode::UndefinedScore);
}

TEST(Vocab, StreamCountsOnlySequencesThatCarryIt) {
  // Sequence 0 has predicted ids, sequence 1 does not. The expert fires on
  // every token of both, so the predicted-stream base rate is still 1.
  auto t = from_bits({{1, 1, 1, 1}, {1, 1, 1, 1}});
  t.sequences[0].predicted_ids = std::vector<std::uint32_t>{5, 5, 5, 5};
  const auto counts = count_activity(t);
  EXPECT_EQ(counts.vocab(VocabKind::Predicted).slots(), 4u);
  EXPECT_DOUBLE_EQ(vocab_specialization(counts, {0, 0}, VocabKind::Predicted, 4), 1.0);
}

TEST(Vocab, SparseTableMatchesDense) {
  std::mt19937_64 rng(63);
  fixtures::RandomShape shape;
  shape.max_sequences = 20;
  shape.max_len = 40;
  shape.vocab = 6;
  const auto t = fixtures::random_trace(rng, shape);
  auto unknown_vocab = t;
  unknown_vocab.header.vocab_size = 0;  // forces the hashed table
  const auto dense = count_activity(t);
  const auto sparse = count_activity(unknown_vocab);
  for (const auto& k : all_experts(t.header)) {
    EXPECT_EQ(vocab_score(dense, k, VocabKind::Input, 2), vocab_score(sparse, k, VocabKind::Input, 2));
  }
}

TEST(Correlate, Examples) {
  const std::vector<double> xs{1, 2, 3, 4, 5};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(2 * x + 1);
  EXPECT_DOUBLE_EQ(correlate(xs, ys, CorrelationMethod::Pearson), 1.0);
  const std::vector<double> rev{9, 7, 4, 2, 1};
  EXPECT_DOUBLE_EQ(correlate(xs, rev, CorrelationMethod::Spearman), -1.0);
  const std::vector<double> flat{3, 3, 3, 3, 3};
  EXPECT_EQ(code_of([&] { correlate(flat, ys, CorrelationMethod::Pearson); }), ErrorCode::DegenerateInput);
}

TEST(Correlate, UndefinedPairsDropped) {
  const std::vector<std::optional<double>> xs{1.0, std::nullopt, 2.0, 3.0, 4.0};
  const std::vector<std::optional<double>> ys{2.0, 100.0, 4.0, std::nullopt, 8.0};
  EXPECT_DOUBLE_EQ(correlate(xs, ys, CorrelationMethod::Pearson), 1.0);
  const std::vector<std::optional<double>> few{1.0, std::nullopt, std::nullopt, std::nullopt, 2.0};
  EXPECT_EQ(code_of([&] { correlate(few, ys, CorrelationMethod::Pearson); }), ErrorCode::DegenerateInput);
}

TEST(Correlate, TiesUseAverageRanks) {
  // Ranks of xs: 1, 2.5, 2.5, 4; ys is monotone so Spearman equals Pearson
  // on those ranks against 1..4.
  const std::vector<double> xs{1, 2, 2, 3};
  const std::vector<double> ys{10, 20, 30, 40};
  const std::vector<double> rx{1, 2.5, 2.5, 4};
  const std::vector<double> ry{1, 2, 3, 4};
  EXPECT_NEAR(correlate(xs, ys, CorrelationMethod::Spearman), correlate(rx, ry, CorrelationMethod::Pearson), 1e-15);
}

TEST(Correlate, InvariantUnderPositiveRescaling) {
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> xs(12), ys(12);
    for (auto& x : xs) x = u(rng);
    for (auto& y : ys) y = u(rng);
    auto sx = xs;
    for (auto& x : sx) x = 3.5 * x + 0.25;
    for (auto method : {CorrelationMethod::Pearson, CorrelationMethod::Spearman}) {
      EXPECT_NEAR(correlate(xs, ys, method), correlate(sx, ys, method), 1e-12);
    }
  }
}

TEST(Activity, MergeEqualsSequentialCount) {
  std::mt19937_64 rng(65);
  fixtures::RandomShape shape;
  shape.max_sequences = 20;
  shape.with_streams = true;
  const auto t = fixtures::random_trace(rng, shape);
  const auto whole = count_activity(t, 1);
  const auto split = count_activity(t, 4);
  const auto a = specialization_profiles(whole, 2);
  const auto b = specialization_profiles(split, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].activation_rate, b[i].activation_rate);
    EXPECT_EQ(a[i].domain_rates, b[i].domain_rates);
    EXPECT_EQ(a[i].domain_cv, b[i].domain_cv);
    EXPECT_EQ(a[i].vocab_scores, b[i].vocab_scores);
  }
}
