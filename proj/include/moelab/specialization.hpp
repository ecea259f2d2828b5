// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "moelab/error.hpp"
#include "moelab/parallel.hpp"
#include "moelab/trace.hpp"

namespace moelab {

enum class VocabKind { Input = 0, Predicted = 1, GroundTruth = 2 };

inline constexpr std::array<VocabKind, 3> kVocabKinds{VocabKind::Input, VocabKind::Predicted,
                                                      VocabKind::GroundTruth};

inline std::string to_string(VocabKind kind) {
  switch (kind) {
    case VocabKind::Input: return "input";
    case VocabKind::Predicted: return "predicted";
    case VocabKind::GroundTruth: return "ground_truth";
  }
  return "unknown";
}

inline constexpr std::uint32_t kDefaultMinSupport = 16;

/// Population standard deviation; 0 for empty input.
inline double population_sd(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

/// SD / mean; undefined with fewer than two values or a zero mean.
inline std::optional<double> coefficient_of_variation(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (mean <= 0.0) return std::nullopt;
  return population_sd(values) / mean;
}

// ---------------------------------------------------------------------------
// Accumulation

/// Expert-by-token co-occurrence counts for one token stream. Dense when the
/// vocabulary is known and small enough, hashed otherwise.
class VocabTable {
 public:
  static constexpr std::size_t kDenseLimit = std::size_t{1} << 22;

  VocabTable(std::size_t experts, std::uint32_t vocab_size)
      : experts_(experts), vocab_(vocab_size), expert_acts_(experts, 0) {
    dense_ = vocab_size > 0 && experts * vocab_size <= kDenseLimit;
    if (dense_) {
      table_.assign(experts * vocab_size, 0);
      occurrences_dense_.assign(vocab_size, 0);
    }
  }

  void add_token(std::uint32_t token) {
    ++slots_;
    if (dense_ && token < vocab_) ++occurrences_dense_[token];
    else ++occurrences_sparse_[token];
  }

  void add_activation(std::size_t expert, std::uint32_t token) {
    ++expert_acts_[expert];
    if (dense_ && token < vocab_) ++table_[expert * vocab_ + token];
    else ++sparse_[(static_cast<std::uint64_t>(expert) << 32) | token];
  }

  void merge(const VocabTable& other) {
    slots_ += other.slots_;
    for (std::size_t i = 0; i < table_.size(); ++i) table_[i] += other.table_[i];
    for (std::size_t i = 0; i < occurrences_dense_.size(); ++i) occurrences_dense_[i] += other.occurrences_dense_[i];
    for (const auto& [k, v] : other.occurrences_sparse_) occurrences_sparse_[k] += v;
    for (const auto& [k, v] : other.sparse_) sparse_[k] += v;
    for (std::size_t e = 0; e < experts_; ++e) expert_acts_[e] += other.expert_acts_[e];
  }

  std::uint64_t slots() const noexcept { return slots_; }
  std::uint64_t expert_activations(std::size_t expert) const { return expert_acts_.at(expert); }

  /// Calls fn(token, occurrences, activations_of_expert) for every token seen.
  template <typename Fn>
  void for_each_token(std::size_t expert, Fn&& fn) const {
    for (std::uint32_t v = 0; v < occurrences_dense_.size(); ++v) {
      if (occurrences_dense_[v] > 0) fn(v, occurrences_dense_[v], table_[expert * vocab_ + v]);
    }
    for (const auto& [v, occ] : occurrences_sparse_) {
      const auto it = sparse_.find((static_cast<std::uint64_t>(expert) << 32) | v);
      fn(v, occ, it == sparse_.end() ? std::uint64_t{0} : it->second);
    }
  }

 private:
  std::size_t experts_;
  std::uint32_t vocab_;
  bool dense_ = false;
  std::uint64_t slots_ = 0;
  std::vector<std::uint64_t> table_;
  std::vector<std::uint64_t> occurrences_dense_;
  std::unordered_map<std::uint32_t, std::uint64_t> occurrences_sparse_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_;
  std::vector<std::uint64_t> expert_acts_;
};

/// Activation counts per expert, per domain, and per token ID.
class ActivityCounter {
 public:
  struct DomainCounts {
    std::uint64_t tokens = 0;
    std::uint64_t sequences = 0;
    std::vector<std::uint64_t> activations;  // flat expert index
  };

  explicit ActivityCounter(const TraceHeader& header, bool track_vocab = true)
      : experts_(header.experts_per_layer), track_vocab_(track_vocab) {
    base_.resize(experts_.size());
    std::size_t flat = 0;
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      base_[l] = flat;
      flat += experts_[l];
    }
    activations_.assign(flat, 0);
    if (track_vocab_) {
      for (std::size_t k = 0; k < kVocabKinds.size(); ++k) vocab_.emplace_back(flat, header.vocab_size);
    }
  }

  void add(const Sequence& seq) {
    tokens_ += seq.size();
    auto& dom = domains_[seq.domain];
    if (dom.activations.empty()) dom.activations.assign(activations_.size(), 0);
    dom.tokens += seq.size();
    dom.sequences += 1;
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      for (auto e : seq.activations[l].flat_experts()) {
        ++activations_[base_[l] + e];
        ++dom.activations[base_[l] + e];
      }
    }
    if (!track_vocab_) return;
    add_stream(seq, seq.token_ids, vocab_[0]);
    if (seq.predicted_ids) add_stream(seq, *seq.predicted_ids, vocab_[1]);
    if (seq.ground_truth_ids) add_stream(seq, *seq.ground_truth_ids, vocab_[2]);
  }

  void merge(const ActivityCounter& other) {
    tokens_ += other.tokens_;
    for (std::size_t i = 0; i < activations_.size(); ++i) activations_[i] += other.activations_[i];
    for (const auto& [name, d] : other.domains_) {
      auto& dom = domains_[name];
      if (dom.activations.empty()) dom.activations.assign(activations_.size(), 0);
      dom.tokens += d.tokens;
      dom.sequences += d.sequences;
      for (std::size_t i = 0; i < activations_.size(); ++i) dom.activations[i] += d.activations[i];
    }
    for (std::size_t k = 0; k < vocab_.size(); ++k) vocab_[k].merge(other.vocab_[k]);
  }

  std::uint64_t tokens() const noexcept { return tokens_; }
  std::size_t num_layers() const noexcept { return experts_.size(); }
  std::uint32_t experts(std::size_t layer) const { return experts_.at(layer); }
  const std::map<std::string, DomainCounts>& domains() const noexcept { return domains_; }
  bool tracks_vocab() const noexcept { return track_vocab_; }

  std::size_t flat(ExpertKey key) const {
    if (key.layer >= experts_.size() || key.index >= experts_[key.layer]) {
      throw Error(ErrorCode::ExpertOutOfRange, "expert not in trace");
    }
    return base_[key.layer] + key.index;
  }

  std::uint64_t activations(ExpertKey key) const { return activations_[flat(key)]; }

  const VocabTable& vocab(VocabKind kind) const { return vocab_.at(static_cast<std::size_t>(kind)); }

 private:
  void add_stream(const Sequence& seq, const std::vector<std::uint32_t>& ids, VocabTable& table) {
    for (auto v : ids) table.add_token(v);
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      const auto& routing = seq.activations[l];
      for (std::size_t t = 0; t < ids.size(); ++t) {
        for (auto e : routing.token(t)) table.add_activation(base_[l] + e, ids[t]);
      }
    }
  }

  std::vector<std::uint32_t> experts_;
  std::vector<std::size_t> base_;
  bool track_vocab_;
  std::uint64_t tokens_ = 0;
  std::vector<std::uint64_t> activations_;
  std::map<std::string, DomainCounts> domains_;
  std::vector<VocabTable> vocab_;
};

// ---------------------------------------------------------------------------
// Metrics over accumulated counts

inline double activation_frequency(const ActivityCounter& counts, ExpertKey expert) {
  const auto a = counts.activations(expert);
  if (counts.tokens() == 0) throw Error(ErrorCode::EmptyTrace, "trace has no tokens");
  return static_cast<double>(a) / static_cast<double>(counts.tokens());
}

struct LoadBalanceReport {
  /// Population SD of the activation rates of each layer's experts.
  std::vector<double> per_layer_sd;
  double mean_sd = 0.0;
  /// Population SD over every expert of every layer at once.
  double pooled_sd = 0.0;
  /// rates[layer][expert]
  std::vector<std::vector<double>> per_expert_rates;
};

inline LoadBalanceReport load_balance_sd(const ActivityCounter& counts) {
  if (counts.tokens() == 0) throw Error(ErrorCode::EmptyTrace, "trace has no tokens");
  LoadBalanceReport r;
  std::vector<double> all;
  for (std::uint32_t l = 0; l < counts.num_layers(); ++l) {
    std::vector<double> rates;
    for (std::uint32_t e = 0; e < counts.experts(l); ++e) rates.push_back(activation_frequency(counts, {l, e}));
    r.per_layer_sd.push_back(population_sd(rates));
    all.insert(all.end(), rates.begin(), rates.end());
    r.per_expert_rates.push_back(std::move(rates));
  }
  r.mean_sd = std::accumulate(r.per_layer_sd.begin(), r.per_layer_sd.end(), 0.0) /
              static_cast<double>(std::max<std::size_t>(1, r.per_layer_sd.size()));
  r.pooled_sd = population_sd(all);
  return r;
}

struct DomainSpecialization {
  std::map<std::string, double> domain_rates;
  std::optional<double> domain_cv;
};

/// Per-domain activation rates of one expert and their CV. The CV is left
/// empty (not thrown) so bulk callers can keep going; see domain_specialization.
inline DomainSpecialization domain_profile(const ActivityCounter& counts, ExpertKey expert) {
  DomainSpecialization out;
  const auto idx = counts.flat(expert);
  std::vector<double> rates;
  for (const auto& [name, d] : counts.domains()) {
    if (d.tokens == 0) continue;
    const double rate = static_cast<double>(d.activations[idx]) / static_cast<double>(d.tokens);
    out.domain_rates[name] = rate;
    rates.push_back(rate);
  }
  out.domain_cv = coefficient_of_variation(rates);
  return out;
}

inline DomainSpecialization domain_specialization(const ActivityCounter& counts, ExpertKey expert) {
  auto out = domain_profile(counts, expert);
  if (!out.domain_cv) {
    throw Error(ErrorCode::UndefinedCV, out.domain_rates.size() < 2 ? "fewer than two domains"
                                                                    : "expert never active in any domain");
  }
  return out;
}

/// max over token IDs with >= min_support occurrences of
/// P(active | token) / P(active). Empty when undefined.
inline std::optional<double> vocab_score(const ActivityCounter& counts, ExpertKey expert, VocabKind kind,
                                         std::uint32_t min_support = kDefaultMinSupport) {
  if (!counts.tracks_vocab()) return std::nullopt;
  const auto& table = counts.vocab(kind);
  const auto idx = counts.flat(expert);
  if (table.slots() == 0 || table.expert_activations(idx) == 0) return std::nullopt;
  const double base = static_cast<double>(table.expert_activations(idx)) / static_cast<double>(table.slots());
  std::optional<double> best;
  table.for_each_token(idx, [&](std::uint32_t, std::uint64_t occ, std::uint64_t acts) {
    if (occ < min_support) return;
    const double lift = (static_cast<double>(acts) / static_cast<double>(occ)) / base;
    if (!best || lift > *best) best = lift;
  });
  return best;
}

inline double vocab_specialization(const ActivityCounter& counts, ExpertKey expert, VocabKind kind,
                                   std::uint32_t min_support = kDefaultMinSupport) {
  if (!counts.tracks_vocab() || counts.vocab(kind).slots() == 0) {
    throw Error(ErrorCode::MissingTokenStream, to_string(kind) + " token stream not present in trace");
  }
  const auto score = vocab_score(counts, expert, kind, min_support);
  if (!score) {
    throw Error(ErrorCode::UndefinedScore,
                counts.activations(expert) == 0 ? "expert never active" : "no token meets min_support");
  }
  return *score;
}

// ---------------------------------------------------------------------------
// Trace-level entry points

inline ActivityCounter count_activity(const RoutingTrace& trace, unsigned threads = 1, bool track_vocab = true) {
  return accumulate(trace, threads, [&] { return ActivityCounter(trace.header, track_vocab); });
}

inline double activation_frequency(const RoutingTrace& trace, ExpertKey expert) {
  check_expert(trace.header, expert);
  if (trace.total_tokens() == 0) throw Error(ErrorCode::EmptyTrace, "trace has no tokens");
  return activation_frequency(count_activity(trace, 1, false), expert);
}

inline LoadBalanceReport load_balance_sd(const RoutingTrace& trace, unsigned threads = 1) {
  return load_balance_sd(count_activity(trace, threads, false));
}

inline DomainSpecialization domain_specialization(const RoutingTrace& trace, ExpertKey expert) {
  check_expert(trace.header, expert);
  return domain_specialization(count_activity(trace, 1, false), expert);
}

inline double vocab_specialization(const RoutingTrace& trace, ExpertKey expert, VocabKind kind,
                                   std::uint32_t min_support = kDefaultMinSupport) {
  check_expert(trace.header, expert);
  return vocab_specialization(count_activity(trace), expert, kind, min_support);
}

// ---------------------------------------------------------------------------
// Correlation

enum class CorrelationMethod { Pearson, Spearman };

inline std::string to_string(CorrelationMethod m) {
  return m == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

namespace detail {

inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (auto k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline bool all_equal(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

/// Pairs where either side is undefined are dropped before computing.
inline double correlate(std::span<const std::optional<double>> xs, std::span<const std::optional<double>> ys,
                        CorrelationMethod method) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::DegenerateInput, "paired inputs differ in length");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] && ys[i]) {
      x.push_back(*xs[i]);
      y.push_back(*ys[i]);
    }
  }
  if (x.size() < 3) throw Error(ErrorCode::DegenerateInput, "fewer than 3 defined pairs");
  if (detail::all_equal(x) || detail::all_equal(y)) throw Error(ErrorCode::DegenerateInput, "zero variance");
  if (method == CorrelationMethod::Spearman) {
    const auto rx = detail::average_ranks(x);
    const auto ry = detail::average_ranks(y);
    return detail::pearson(rx, ry);
  }
  return detail::pearson(x, y);
}

inline double correlate(std::span<const double> xs, std::span<const double> ys, CorrelationMethod method) {
  std::vector<std::optional<double>> x(xs.begin(), xs.end());
  std::vector<std::optional<double>> y(ys.begin(), ys.end());
  return correlate(x, y, method);
}

/// Everything the per-expert specialization table carries.
struct SpecializationProfile {
  ExpertKey expert;
  double activation_rate = 0.0;
  std::map<std::string, double> domain_rates;
  std::optional<double> domain_cv;
  std::array<std::optional<double>, 3> vocab_scores;  // indexed by VocabKind
};

inline std::vector<SpecializationProfile> specialization_profiles(const ActivityCounter& counts,
                                                                  std::uint32_t min_support = kDefaultMinSupport) {
  std::vector<SpecializationProfile> out;
  for (std::uint32_t l = 0; l < counts.num_layers(); ++l) {
    for (std::uint32_t e = 0; e < counts.experts(l); ++e) {
      SpecializationProfile p;
      p.expert = {l, e};
      p.activation_rate = counts.tokens() == 0 ? 0.0 : activation_frequency(counts, p.expert);
      auto dom = domain_profile(counts, p.expert);
      p.domain_rates = std::move(dom.domain_rates);
      p.domain_cv = dom.domain_cv;
      for (auto kind : kVocabKinds) {
        p.vocab_scores[static_cast<std::size_t>(kind)] = vocab_score(counts, p.expert, kind, min_support);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace moelab
