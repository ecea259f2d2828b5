// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "moelab/codec.hpp"
#include "moelab/specialization.hpp"
#include "moelab/srp.hpp"
#include "moelab/synth.hpp"

using namespace moelab;

namespace {

GeneratorConfig small(GeneratorKind kind, std::uint64_t seed = 1) {
  GeneratorConfig c;
  c.kind = kind;
  c.seed = seed;
  c.num_layers = 2;
  c.experts_per_layer = 16;
  c.top_k = 2;
  c.num_sequences = 40;
  c.seq_len = 64;
  return c;
}

double repeat_fraction(const RoutingTrace& t) {
  std::uint64_t same = 0, pairs = 0;
  for (const auto& seq : t.sequences) {
    const auto& r = seq.activations[0];
    for (std::size_t tk = 1; tk < seq.size(); ++tk) {
      const auto a = r.token(tk - 1);
      const auto b = r.token(tk);
      same += std::equal(a.begin(), a.end(), b.begin(), b.end()) ? 1 : 0;
      ++pairs;
    }
  }
  return static_cast<double>(same) / static_cast<double>(pairs);
}

}  // namespace

TEST(Seeds, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
  EXPECT_EQ(derive_seed(7, 3, 9), derive_seed(7, 3, 9));
}

TEST(Generators, DeterministicBytes) {
  for (auto kind : {GeneratorKind::Iid, GeneratorKind::Sticky, GeneratorKind::Domain}) {
    auto c = small(kind);
    c.persistence = 0.5;
    c.domain_boost = 1.0;
    c.logit_skew = 0.5;
    EXPECT_EQ(encode_binary(TraceGenerator(c).generate()), encode_binary(TraceGenerator(c).generate()));
    auto other = c;
    other.seed = 2;
    EXPECT_NE(encode_binary(TraceGenerator(c).generate()), encode_binary(TraceGenerator(other).generate()));
  }
}

TEST(Generators, OutputValidates) {
  for (auto kind : {GeneratorKind::Iid, GeneratorKind::Sticky, GeneratorKind::Domain}) {
    auto c = small(kind, 5);
    c.persistence = 0.7;
    c.domain_boost = 2.0;
    c.logit_skew = 1.0;
    const auto t = TraceGenerator(c).generate();
    EXPECT_TRUE(validate(t).empty()) << to_string(kind);
    EXPECT_EQ(t.total_tokens(), 40u * 64u);
    for (const auto& seq : t.sequences) {
      for (const auto& r : seq.activations) EXPECT_EQ(r.num_activations(), 64u * 2u);
    }
  }
}

TEST(Generators, ThreadCountDoesNotChangeOutput) {
  auto c = small(GeneratorKind::Domain);
  c.domain_boost = 1.5;
  EXPECT_EQ(TraceGenerator(c).generate(1), TraceGenerator(c).generate(4));
}

TEST(Generators, SourceStreamsSameSequences) {
  const TraceGenerator gen(small(GeneratorKind::Sticky));
  const auto whole = gen.generate();
  GeneratorSource src(gen);
  Sequence seq;
  std::size_t i = 0;
  while (src.next(seq)) EXPECT_EQ(seq, whole.sequences[i++]);
  EXPECT_EQ(i, whole.sequences.size());
}

TEST(Generators, DomainsAssignedRoundRobin) {
  auto c = small(GeneratorKind::Domain);
  const auto t = gen_domain(c);
  const auto& names = default_domains();
  ASSERT_EQ(names.size(), 11u);
  for (std::size_t i = 0; i < t.sequences.size(); ++i) EXPECT_EQ(t.sequences[i].domain, names[i % 11]);
  EXPECT_EQ(gen_iid_topk(small(GeneratorKind::Iid)).sequences[0].domain, "synthetic");
}

TEST(Generators, InvalidConfigsRejected) {
  auto c = small(GeneratorKind::Iid);
  c.top_k = 17;
  EXPECT_THROW(TraceGenerator{c}, Error);
  c = small(GeneratorKind::Sticky);
  c.persistence = 1.5;
  EXPECT_THROW(TraceGenerator{c}, Error);
  c = small(GeneratorKind::Domain);
  c.domains = {"only"};
  EXPECT_THROW(TraceGenerator{c}, Error);
  c = small(GeneratorKind::Iid);
  c.logit_skew = -1;
  EXPECT_THROW(TraceGenerator{c}, Error);
}

TEST(Generators, ConfigJsonRoundTrip) {
  auto c = small(GeneratorKind::Domain, 99);
  c.domain_boost = 2.5;
  c.specialist_fraction = 0.25;
  c.logit_skew = 0.3;
  c.domains = {"x", "y", "z"};
  const auto back = generator_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(TraceGenerator(back).generate(), TraceGenerator(c).generate());
}

TEST(Iid, NoSkewMatchesTopKOverE) {
  GeneratorConfig c;
  c.experts_per_layer = 8;
  c.top_k = 1;
  c.num_sequences = 100;
  c.seq_len = 400;
  const auto counts = count_activity(gen_iid_topk(c), 1, false);
  const double n = static_cast<double>(counts.tokens());
  const double p = 1.0 / 8.0;
  for (std::uint32_t e = 0; e < 8; ++e) {
    EXPECT_NEAR(activation_frequency(counts, {0, e}), p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Iid, SkewSpreadsRates) {
  GeneratorConfig c;
  c.num_sequences = 40;
  c.seq_len = 256;
  const auto flat = load_balance_sd(gen_iid_topk(c)).mean_sd;
  c.logit_skew = 1.0;
  const auto skewed = load_balance_sd(gen_iid_topk(c)).mean_sd;
  EXPECT_GT(skewed, 4 * flat);
}

TEST(Sticky, FullPersistenceRepeatsFirstSet) {
  auto c = small(GeneratorKind::Sticky);
  c.persistence = 1.0;
  const auto t = gen_sticky(c);
  EXPECT_DOUBLE_EQ(repeat_fraction(t), 1.0);
  const auto model = srp_model(t, 16);
  EXPECT_DOUBLE_EQ(model.pooled.srp, 1.0);
  for (const auto& k : all_experts(t.header)) {
    const auto r = srp_single(t, k, 8);
    if (!r.undefined) EXPECT_DOUBLE_EQ(r.srp, 1.0);
  }
}

TEST(Sticky, ZeroPersistenceIsIid) {
  auto c = small(GeneratorKind::Sticky);
  c.persistence = 0.0;
  auto iid = c;
  iid.kind = GeneratorKind::Iid;
  EXPECT_EQ(gen_sticky(c).sequences, gen_iid_topk(iid).sequences);
}

TEST(Sticky, RepeatFractionTracksPersistence) {
  for (double rho : {0.25, 0.5, 0.9}) {
    auto c = small(GeneratorKind::Sticky, 3);
    c.persistence = rho;
    c.num_sequences = 200;
    // A fresh draw repeats the old set with probability 1/C(16,2) = 1/120.
    const double expected = rho + (1 - rho) / 120.0;
    EXPECT_NEAR(repeat_fraction(gen_sticky(c)), expected, 0.02) << rho;
  }
}

TEST(Domain, NoBoostGivesFlatDomainRates) {
  GeneratorConfig c;
  c.kind = GeneratorKind::Domain;
  c.experts_per_layer = 16;
  c.top_k = 4;
  c.num_sequences = 440;
  c.seq_len = 256;
  const auto counts = count_activity(gen_domain(c), 1, false);
  for (std::uint32_t e = 0; e < 16; ++e) {
    EXPECT_LT(*domain_profile(counts, {0, e}).domain_cv, 0.1);
  }
}

TEST(Domain, BoostConcentratesSpecialists) {
  GeneratorConfig c;
  c.kind = GeneratorKind::Domain;
  c.experts_per_layer = 16;
  c.top_k = 4;
  c.num_sequences = 220;
  c.seq_len = 128;
  c.domain_boost = 3.0;
  const auto counts = count_activity(gen_domain(c), 1, false);
  // 8 specialists, expert e homed to domain e mod 11.
  for (std::uint32_t e = 0; e < 8; ++e) {
    const auto prof = domain_profile(counts, {0, e});
    EXPECT_GT(*prof.domain_cv, 0.5) << e;
    const auto& home = default_domains()[e % 11];
    for (const auto& [name, rate] : prof.domain_rates) {
      if (name != home) EXPECT_GT(prof.domain_rates.at(home), rate);
    }
  }
  for (std::uint32_t e = 8; e < 16; ++e) EXPECT_LT(*domain_profile(counts, {0, e}).domain_cv, 0.5) << e;
}
