// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic synthetic routing traces.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Seeds for independent streams are derived with the
// SplitMix64 finalizer, and all samplers below are written out explicitly
// (no std::*_distribution, whose output is implementation-defined), so a
// given config produces the same bytes on every platform.
//
//   logits:          stream (seed, 0, 0); Box-Muller normals, layer-major
//   sequence i:      stream (seed, 1, i); token IDs first, then layer by layer
//
// Top-k with per-token Gumbel noise on fixed logits is the same distribution
// as drawing k experts without replacement with probability proportional to
// exp(logit); that successive draw is what runs here. Equal weights take
// Floyd's k-subset algorithm instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "moelab/codec.hpp"
#include "moelab/error.hpp"
#include "moelab/parallel.hpp"
#include "moelab/trace.hpp"

namespace moelab {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by 128-bit multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (one value per call).
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

enum class GeneratorKind { Iid, Sticky, Domain };

inline std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Iid: return "iid";
    case GeneratorKind::Sticky: return "sticky";
    case GeneratorKind::Domain: return "domain";
  }
  return "unknown";
}

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "iid") return GeneratorKind::Iid;
  if (s == "sticky") return GeneratorKind::Sticky;
  if (s == "domain") return GeneratorKind::Domain;
  throw Error(ErrorCode::InvalidConfig, "unknown generator \"" + s + "\"");
}

/// Data-source domains used when a domain generator is given none.
inline const std::vector<std::string>& default_domains() {
  static const std::vector<std::string> names{
      "C4",     "CommonCrawl", "Books",    "Wikipedia", "ArXiv",      "StackExchange",
      "GitHub", "LMArena",     "OpenMath", "OpenCode",  "OpenScience"};
  return names;
}

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::Iid;
  std::uint64_t seed = 0;
  std::uint32_t num_layers = 1;
  std::uint32_t experts_per_layer = 64;
  std::uint32_t top_k = 8;
  std::uint64_t num_sequences = 64;
  std::uint32_t seq_len = 512;
  std::uint32_t vocab_size = 256;
  std::string model_id = "synthetic";
  /// SD of the fixed per-expert logits.
  double logit_skew = 0.0;
  /// Probability a token reuses the previous token's expert set (sticky).
  double persistence = 0.0;
  /// Sequence labels, assigned round-robin. Domain generator defaults to
  /// default_domains(); the others default to a single "synthetic".
  std::vector<std::string> domains;
  /// Logit boost for experts in their home domain (domain generator).
  double domain_boost = 0.0;
  /// Leading fraction of each layer's experts that get a home domain
  /// (expert e -> domain e mod D); the rest are generalists.
  double specialist_fraction = 0.5;

  std::vector<std::string> effective_domains() const {
    if (!domains.empty()) return domains;
    if (kind == GeneratorKind::Domain) return default_domains();
    return {"synthetic"};
  }

  std::uint32_t num_specialists() const {
    return static_cast<std::uint32_t>(std::lround(specialist_fraction * experts_per_layer));
  }

  void check() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (num_layers == 0) fail("num_layers must be positive");
    if (experts_per_layer == 0) fail("experts_per_layer must be positive");
    if (top_k > experts_per_layer) fail("top_k exceeds experts_per_layer");
    if (top_k > kMaxActivationsPerToken) fail("top_k exceeds 255");
    if (!(logit_skew >= 0.0)) fail("logit_skew must be >= 0");
    if (!(persistence >= 0.0 && persistence <= 1.0)) fail("persistence must be in [0, 1]");
    if (!(domain_boost >= 0.0)) fail("domain_boost must be >= 0");
    if (!(specialist_fraction >= 0.0 && specialist_fraction <= 1.0)) fail("specialist_fraction must be in [0, 1]");
    if (kind == GeneratorKind::Domain && effective_domains().size() < 2) fail("domain generator needs >= 2 domains");
  }
};

inline nlohmann::json to_json(const GeneratorConfig& c) {
  return nlohmann::json{{"gen", to_string(c.kind)},
                        {"seed", c.seed},
                        {"layers", c.num_layers},
                        {"experts", c.experts_per_layer},
                        {"topk", c.top_k},
                        {"seqs", c.num_sequences},
                        {"len", c.seq_len},
                        {"vocab", c.vocab_size},
                        {"model_id", c.model_id},
                        {"sigma", c.logit_skew},
                        {"rho", c.persistence},
                        {"domains", c.effective_domains()},
                        {"beta", c.domain_boost},
                        {"specialist_fraction", c.specialist_fraction}};
}

/// Keys mirror the CLI flags; absent keys keep the values already in `base`.
inline GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig base = {}) {
  try {
    if (j.contains("gen")) base.kind = generator_kind_from_string(j.at("gen").get<std::string>());
    base.seed = j.value("seed", base.seed);
    base.num_layers = j.value("layers", base.num_layers);
    base.experts_per_layer = j.value("experts", base.experts_per_layer);
    base.top_k = j.value("topk", base.top_k);
    base.num_sequences = j.value("seqs", base.num_sequences);
    base.seq_len = j.value("len", base.seq_len);
    base.vocab_size = j.value("vocab", base.vocab_size);
    base.model_id = j.value("model_id", base.model_id);
    base.logit_skew = j.value("sigma", base.logit_skew);
    base.persistence = j.value("rho", base.persistence);
    if (j.contains("domains")) base.domains = j.at("domains").get<std::vector<std::string>>();
    base.domain_boost = j.value("beta", base.domain_boost);
    base.specialist_fraction = j.value("specialist_fraction", base.specialist_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return base;
}

class TraceGenerator {
 public:
  explicit TraceGenerator(GeneratorConfig config) : config_(std::move(config)) {
    config_.check();
    domains_ = config_.effective_domains();
    header_ = TraceHeader::uniform(config_.model_id, config_.num_layers, config_.experts_per_layer,
                                   static_cast<std::uint16_t>(config_.top_k), config_.vocab_size);
    const auto experts = config_.experts_per_layer;
    const auto specialists = config_.num_specialists();
    const auto num_domains = domains_.size();
    const bool boosted = config_.kind == GeneratorKind::Domain && config_.domain_boost > 0.0 && specialists > 0;

    Rng rng(derive_seed(config_.seed, 0, 0));
    // weights_[layer][domain slot][expert]; one slot unless boosted.
    weights_.resize(config_.num_layers);
    uniform_.resize(config_.num_layers);
    for (std::uint32_t l = 0; l < config_.num_layers; ++l) {
      std::vector<double> logits(experts, 0.0);
      if (config_.logit_skew > 0.0) {
        for (auto& x : logits) x = config_.logit_skew * rng.normal();
      }
      const std::size_t slots = boosted ? num_domains : 1;
      for (std::size_t d = 0; d < slots; ++d) {
        std::vector<double> w(experts);
        for (std::uint32_t e = 0; e < experts; ++e) {
          const bool home = boosted && e < specialists && e % num_domains == d;
          w[e] = std::exp(logits[e] + (home ? config_.domain_boost : 0.0));
        }
        const bool flat = std::all_of(w.begin(), w.end(), [&](double x) { return x == w.front(); });
        weights_[l].push_back(std::move(w));
        uniform_[l].push_back(flat);
      }
    }
  }

  const GeneratorConfig& config() const noexcept { return config_; }
  const TraceHeader& header() const noexcept { return header_; }

  Sequence sequence(std::uint64_t index) const {
    Rng rng(derive_seed(config_.seed, 1, index));
    Sequence seq;
    const auto domain = static_cast<std::size_t>(index % domains_.size());
    seq.domain = domains_[domain];
    const auto n = config_.seq_len;
    seq.token_ids.resize(n);
    for (auto& v : seq.token_ids) v = config_.vocab_size > 0 ? static_cast<std::uint32_t>(rng.below(config_.vocab_size)) : 0;

    const auto k = config_.top_k;
    const double rho = config_.kind == GeneratorKind::Sticky ? config_.persistence : 0.0;
    std::vector<std::uint32_t> current(k);
    std::vector<char> taken(config_.experts_per_layer, 0);
    seq.activations.resize(config_.num_layers);
    for (std::uint32_t l = 0; l < config_.num_layers; ++l) {
      const auto slot = weights_[l].size() == 1 ? 0 : domain;
      const auto& w = weights_[l][slot];
      const bool flat = uniform_[l][slot];
      auto& routing = seq.activations[l];
      routing.reserve(n, static_cast<std::size_t>(n) * k);
      for (std::uint32_t t = 0; t < n; ++t) {
        bool keep = false;
        if (t > 0) {
          if (rho >= 1.0) keep = true;
          else if (rho > 0.0) keep = rng.uniform() < rho;
        }
        if (!keep) {
          if (flat) sample_uniform(rng, config_.experts_per_layer, current);
          else sample_weighted(rng, w, current, taken);
        }
        routing.push_token(current);
      }
    }
    return seq;
  }

  RoutingTrace generate(unsigned threads = 1) const {
    RoutingTrace trace;
    trace.header = header_;
    trace.sequences.resize(config_.num_sequences);
    parallel_chunks(trace.sequences.size(), resolve_threads(threads), [&](unsigned, std::size_t b, std::size_t e) {
      for (auto i = b; i < e; ++i) trace.sequences[i] = sequence(i);
    });
    return trace;
  }

 private:
  /// Floyd's algorithm: uniform k-subset of [0, n), returned sorted.
  static void sample_uniform(Rng& rng, std::uint32_t n, std::vector<std::uint32_t>& out) {
    const auto k = static_cast<std::uint32_t>(out.size());
    std::size_t filled = 0;
    for (std::uint32_t j = n - k; j < n; ++j) {
      const auto t = static_cast<std::uint32_t>(rng.below(j + 1));
      const bool seen = std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(filled), t) !=
                        out.begin() + static_cast<std::ptrdiff_t>(filled);
      out[filled++] = seen ? j : t;
    }
    std::sort(out.begin(), out.end());
  }

  /// Successive draws without replacement, probability proportional to weight.
  static void sample_weighted(Rng& rng, const std::vector<double>& w, std::vector<std::uint32_t>& out,
                              std::vector<char>& taken) {
    double total = 0.0;
    for (double x : w) total += x;
    const auto n = static_cast<std::uint32_t>(w.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      std::uint32_t pick = n;
      std::uint32_t last_free = n;
      for (std::uint32_t e = 0; e < n; ++e) {
        if (taken[e]) continue;
        last_free = e;
        acc += w[e];
        if (acc > target) {
          pick = e;
          break;
        }
      }
      if (pick == n) pick = last_free;  // rounding left target past the end
      taken[pick] = 1;
      total -= w[pick];
      out[i] = pick;
    }
    for (auto e : out) taken[e] = 0;
    std::sort(out.begin(), out.end());
  }

  GeneratorConfig config_;
  std::vector<std::string> domains_;
  TraceHeader header_;
  std::vector<std::vector<std::vector<double>>> weights_;
  std::vector<std::vector<bool>> uniform_;
};

/// Streams generated sequences without materializing the trace.
class GeneratorSource final : public SequenceSource {
 public:
  explicit GeneratorSource(const TraceGenerator& gen) : gen_(gen) {}
  const TraceHeader& header() const override { return gen_.header(); }
  bool next(Sequence& seq) override {
    if (next_ >= gen_.config().num_sequences) return false;
    seq = gen_.sequence(next_++);
    return true;
  }

 private:
  const TraceGenerator& gen_;
  std::uint64_t next_ = 0;
};

inline RoutingTrace gen_iid_topk(GeneratorConfig config, unsigned threads = 1) {
  config.kind = GeneratorKind::Iid;
  return TraceGenerator(std::move(config)).generate(threads);
}

inline RoutingTrace gen_sticky(GeneratorConfig config, unsigned threads = 1) {
  config.kind = GeneratorKind::Sticky;
  return TraceGenerator(std::move(config)).generate(threads);
}

inline RoutingTrace gen_domain(GeneratorConfig config, unsigned threads = 1) {
  config.kind = GeneratorKind::Domain;
  return TraceGenerator(std::move(config)).generate(threads);
}

}  // namespace moelab
