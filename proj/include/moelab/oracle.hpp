// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force references. Nothing here shares code with the histogram scan
// or the cache counters: window frequencies are recounted token by token and
// optima come from exhaustive enumeration.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "moelab/error.hpp"
#include "moelab/ratio.hpp"
#include "moelab/trace.hpp"

namespace moelab::oracle {

struct EnumerationBudget {
  std::size_t max_decision_bits = 20;
};

/// One (expert, window) decision of a segment router.
struct WindowDecision {
  ExpertKey expert;
  std::size_t sequence = 0;
  std::size_t start = 0;
  std::uint32_t frequency = 0;
  bool active = false;
};

struct EnumResult {
  Ratio best{0, 0};
  /// True when the expert set never fires (every assignment gives 0/0 or 0).
  bool undefined = false;
  /// A maximizing assignment; among ties, the one with fewest active windows.
  std::vector<WindowDecision> witness;
};

namespace detail {

inline bool fires(const RoutingTrace& trace, ExpertKey key, std::size_t seq, std::size_t token) {
  for (auto e : trace.sequences[seq].activations[key.layer].token(token)) {
    if (e == key.index) return true;
  }
  return false;
}

inline std::vector<WindowDecision> enumerate_windows(const RoutingTrace& trace, std::span<const ExpertKey> experts,
                                                     std::size_t m) {
  std::vector<WindowDecision> windows;
  for (const auto& key : experts) {
    for (std::size_t s = 0; s < trace.sequences.size(); ++s) {
      const auto n = trace.sequences[s].size();
      for (std::size_t p = 0; p + m <= n; ++p) {
        WindowDecision w;
        w.expert = key;
        w.sequence = s;
        w.start = p;
        for (std::size_t t = p; t < p + m; ++t) w.frequency += fires(trace, key, s, t) ? 1 : 0;
        windows.push_back(w);
      }
    }
  }
  return windows;
}

}  // namespace detail

/// Maximizes 2*sum(pred*f) / sum(m*pred + f) over every active/inactive
/// assignment to every (expert, window) pair.
inline EnumResult brute_force_srp_enum(const RoutingTrace& trace, std::span<const ExpertKey> experts,
                                       std::size_t m, EnumerationBudget budget = {}) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  for (const auto& k : experts) check_expert(trace.header, k);
  auto windows = detail::enumerate_windows(trace, experts, m);
  const auto bits = windows.size();
  if (bits > budget.max_decision_bits || bits >= 63) {
    throw Error(ErrorCode::BudgetExceeded, std::to_string(bits) + " decisions exceed the enumeration budget");
  }
  std::uint64_t mass = 0;
  for (const auto& w : windows) mass += w.frequency;

  EnumResult out;
  std::uint64_t best_mask = 0;
  int best_active = 0;
  bool have = false;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << bits); ++mask) {
    std::uint64_t hit = 0;
    std::uint64_t predicted = 0;
    for (std::size_t i = 0; i < bits; ++i) {
      if (mask >> i & 1u) {
        hit += windows[i].frequency;
        predicted += m;
      }
    }
    const Ratio f1{2 * hit, predicted + mass};
    if (f1.den == 0) continue;  // 0/0 only for the all-inactive, never-firing case
    const int active = std::popcount(mask);
    if (!have || f1 > out.best || (f1 == out.best && active < best_active)) {
      out.best = f1;
      best_mask = mask;
      best_active = active;
      have = true;
    }
  }
  if (mass == 0) {
    out.undefined = true;
    out.best = Ratio{0, 0};
    best_mask = 0;
  }
  for (std::size_t i = 0; i < bits; ++i) windows[i].active = (best_mask >> i & 1u) != 0;
  out.witness = std::move(windows);
  return out;
}

/// Threshold alpha such that the witness activates exactly the windows with
/// frequency >= alpha, or 0 when the witness is not of that form.
inline std::uint32_t witness_threshold(const EnumResult& r, std::size_t m) {
  for (std::uint32_t alpha = 1; alpha <= m + 1; ++alpha) {
    const bool match = std::all_of(r.witness.begin(), r.witness.end(),
                                   [&](const WindowDecision& w) { return w.active == (w.frequency >= alpha); });
    if (match) return alpha;
  }
  return 0;
}

/// Best F1 when each expert of the group gets its own threshold, by joint
/// enumeration over [1, m+1]^|experts|.
inline Ratio brute_force_group_thresholds(const RoutingTrace& trace, std::span<const ExpertKey> experts,
                                          std::size_t m, std::vector<std::uint32_t>* best_alphas = nullptr) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  for (const auto& k : experts) check_expert(trace.header, k);
  const auto windows = detail::enumerate_windows(trace, experts, m);
  std::vector<std::vector<std::uint32_t>> per_expert(experts.size());
  std::uint64_t mass = 0;
  for (const auto& w : windows) {
    const auto idx = static_cast<std::size_t>(
        std::find(experts.begin(), experts.end(), w.expert) - experts.begin());
    per_expert[idx].push_back(w.frequency);
    mass += w.frequency;
  }
  double combos = std::pow(static_cast<double>(m + 1), static_cast<double>(experts.size()));
  if (combos > double(1u << 22)) throw Error(ErrorCode::BudgetExceeded, "too many threshold combinations");

  std::vector<std::uint32_t> alphas(experts.size(), 1);
  Ratio best{0, mass};
  if (best_alphas) best_alphas->assign(experts.size(), static_cast<std::uint32_t>(m + 1));
  for (;;) {
    std::uint64_t hit = 0, predicted = 0;
    for (std::size_t i = 0; i < experts.size(); ++i) {
      for (auto f : per_expert[i]) {
        if (f >= alphas[i]) {
          hit += f;
          predicted += m;
        }
      }
    }
    const Ratio f1{2 * hit, predicted + mass};
    if (f1.den != 0 && f1 > best) {
      best = f1;
      if (best_alphas) *best_alphas = alphas;
    }
    std::size_t i = 0;
    while (i < alphas.size() && ++alphas[i] > m + 1) alphas[i++] = 1;
    if (i == alphas.size()) break;
  }
  return best;
}

/// SRP of an endless i.i.d. Bernoulli(p) activation stream: the threshold
/// scan run on binomial window probabilities instead of counts.
inline double binomial_srp(double p, std::size_t m) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  if (!(p > 0.0) || p > 1.0) throw Error(ErrorCode::UndefinedSrp, "p must be in (0, 1]");
  std::vector<double> prob(m + 1);
  for (std::size_t f = 0; f <= m; ++f) {
    const double log_choose = std::lgamma(double(m) + 1) - std::lgamma(double(f) + 1) - std::lgamma(double(m - f) + 1);
    const double lp = f == 0 ? 0.0 : double(f) * std::log(p);
    const double lq = (m - f) == 0 ? 0.0 : (p == 1.0 ? -INFINITY : double(m - f) * std::log1p(-p));
    prob[f] = std::exp(log_choose + lp + lq);
  }
  const double mass = double(m) * p;
  double best = 0.0;
  for (std::size_t alpha = 1; alpha <= m; ++alpha) {
    double s = 0.0, n = 0.0;
    for (std::size_t f = alpha; f <= m; ++f) {
      s += double(f) * prob[f];
      n += prob[f];
    }
    best = std::max(best, 2.0 * s / (double(m) * n + mass));
  }
  return best;
}

struct CacheOracleResult {
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  double hit_rate = 1.0;
  bool no_activations = true;
};

/// Best hit rate when a cache of `capacity` experts may be chosen freely for
/// every non-overlapping m-token segment. Tries every subset per segment.
inline CacheOracleResult brute_force_cache(const RoutingTrace& trace, std::uint32_t layer, std::uint32_t capacity,
                                           std::size_t m) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  if (layer >= trace.header.num_layers()) throw Error(ErrorCode::ExpertOutOfRange, "layer not in trace");
  const auto experts = trace.header.experts_per_layer[layer];
  if (experts > 6 || trace.total_tokens() > 12) {
    throw Error(ErrorCode::BudgetExceeded, "cache oracle limited to 6 experts and 12 tokens");
  }
  CacheOracleResult out;
  for (const auto& seq : trace.sequences) {
    const auto& routing = seq.activations[layer];
    for (std::size_t start = 0; start < seq.size(); start += m) {
      const auto end = std::min(seq.size(), start + m);
      std::uint64_t best = 0;
      for (std::uint32_t subset = 0; subset < (1u << experts); ++subset) {
        if (static_cast<std::uint32_t>(std::popcount(subset)) > capacity) continue;
        std::uint64_t hits = 0;
        for (auto t = start; t < end; ++t) {
          for (auto e : routing.token(t)) hits += (subset >> e & 1u) ? 1 : 0;
        }
        best = std::max(best, hits);
      }
      out.hits += best;
      for (auto t = start; t < end; ++t) out.total += routing.token(t).size();
    }
  }
  out.no_activations = out.total == 0;
  out.hit_rate = out.no_activations ? 1.0 : static_cast<double>(out.hits) / static_cast<double>(out.total);
  return out;
}

}  // namespace moelab::oracle
