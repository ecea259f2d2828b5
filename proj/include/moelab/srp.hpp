// SPDX-License-Identifier: Apache-2.0
#pragma once

// Segment routing best performance (SRP).
//
// A segment router of length m makes one all-or-nothing decision per
// (expert, window). Summed over every overlapping window, its F1 against the
// token-level routing is
//
//   F1 = 2 * sum(pred * f) / sum(m * pred + f)
//
// where f is the number of activations of the expert inside the window. The
// maximum is reached by predicting "active" exactly on windows with f >= alpha
// for some threshold alpha, so the optimum only needs the histogram of f.
// Numerator and denominator are additive over experts, which makes the group
// optimum a single threshold over the pooled histogram.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "moelab/error.hpp"
#include "moelab/parallel.hpp"
#include "moelab/ratio.hpp"
#include "moelab/trace.hpp"

namespace moelab {

struct SegmentHistogram {
  std::size_t m = 1;
  /// counts[f] = number of windows in which the expert fired f times.
  std::vector<std::uint64_t> counts;
  std::uint64_t num_windows = 0;
  std::uint64_t active_mass = 0;
  /// Token-level context for the size ratio: token positions observed and
  /// activations among them (summed over experts for pooled histograms).
  std::uint64_t token_slots = 0;
  std::uint64_t token_activations = 0;

  SegmentHistogram() = default;
  explicit SegmentHistogram(std::size_t segment) : m(segment), counts(segment + 1, 0) {}

  /// Builds a histogram from raw counts, deriving the window totals.
  static SegmentHistogram from_counts(std::size_t segment, std::vector<std::uint64_t> c) {
    if (segment < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
    c.resize(segment + 1, 0);
    SegmentHistogram h(segment);
    h.counts = std::move(c);
    h.recompute_totals();
    return h;
  }

  void recompute_totals() {
    num_windows = active_mass = 0;
    for (std::size_t f = 0; f < counts.size(); ++f) {
      num_windows += counts[f];
      active_mass += f * counts[f];
    }
  }

  void merge(const SegmentHistogram& other) {
    for (std::size_t f = 0; f <= m; ++f) counts[f] += other.counts[f];
    num_windows += other.num_windows;
    active_mass += other.active_mass;
    token_slots += other.token_slots;
    token_activations += other.token_activations;
  }

  bool consistent() const {
    std::uint64_t w = 0, mass = 0;
    for (std::size_t f = 0; f < counts.size(); ++f) {
      w += counts[f];
      mass += f * counts[f];
    }
    return counts.size() == m + 1 && w == num_windows && mass == active_mass &&
           active_mass <= m * num_windows;
  }
};

struct SrpResult {
  std::size_t m = 1;
  /// Best F1 as an exact fraction 2*S / (m*N + active_mass).
  Ratio exact{0, 0};
  double srp = 0.0;
  /// m + 1 encodes "never predict active".
  std::uint32_t alpha = 0;
  double size_ratio = 0.0;
  std::uint64_t num_windows = 0;
  std::uint64_t active_mass = 0;
  /// Windows (expert-window pairs for groups) predicted active at alpha.
  std::uint64_t predicted_active = 0;
  /// F1 is 0/0: the expert (or every expert of the group) never fires.
  bool undefined = false;
  std::map<ExpertKey, std::uint32_t> per_expert_alpha;

  double value() const {
    if (undefined) throw Error(ErrorCode::UndefinedSrp, "expert set is never activated");
    return srp;
  }
};

/// Scans every threshold alpha in [1, m+1] and keeps the best F1. Equal F1
/// values resolve to the larger alpha.
inline SrpResult srp_scan(const SegmentHistogram& hist) {
  const auto m = hist.m;
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  SrpResult r;
  r.m = m;
  r.num_windows = hist.num_windows;
  r.active_mass = hist.active_mass;
  r.alpha = static_cast<std::uint32_t>(m + 1);
  if (hist.active_mass == 0) {
    r.undefined = true;
    return r;
  }
  Ratio best{0, hist.active_mass};
  std::uint64_t mass_above = 0;
  std::uint64_t windows_above = 0;
  std::uint64_t best_windows = 0;
  for (std::size_t alpha = m; alpha >= 1; --alpha) {
    mass_above += alpha * hist.counts[alpha];
    windows_above += hist.counts[alpha];
    const Ratio f1{2 * mass_above, m * windows_above + hist.active_mass};
    if (f1 > best) {
      best = f1;
      r.alpha = static_cast<std::uint32_t>(alpha);
      best_windows = windows_above;
    }
  }
  r.exact = best;
  r.srp = best.value();
  r.predicted_active = best_windows;
  if (hist.num_windows > 0 && hist.token_activations > 0) {
    const double window_rate = static_cast<double>(best_windows) / static_cast<double>(hist.num_windows);
    const double token_rate =
        static_cast<double>(hist.token_activations) / static_cast<double>(hist.token_slots);
    r.size_ratio = window_rate / token_rate;
  }
  return r;
}

/// Adds the windows of one layer of one sequence to per-expert histograms.
/// counts is laid out as counts[expert * (m + 1) + f]. Only experts whose
/// frequency changes are touched per step: f stays constant between changes,
/// so each change flushes the run length since the previous one.
inline void count_layer_windows(const LayerRouting& routing, std::size_t m, std::uint32_t experts,
                                std::uint64_t* counts, std::vector<std::uint32_t>& freq,
                                std::vector<std::uint32_t>& since) {
  const auto n = routing.num_tokens();
  if (n < m) return;
  const auto windows = static_cast<std::uint32_t>(n - m + 1);
  const auto stride = m + 1;
  freq.assign(experts, 0);
  since.assign(experts, 0);
  for (std::size_t t = 0; t < m; ++t) {
    for (auto e : routing.token(t)) ++freq[e];
  }
  for (std::uint32_t p = 1; p < windows; ++p) {
    for (auto e : routing.token(p - 1)) {
      counts[e * stride + freq[e]] += p - since[e];
      since[e] = p;
      --freq[e];
    }
    for (auto e : routing.token(p + m - 1)) {
      counts[e * stride + freq[e]] += p - since[e];
      since[e] = p;
      ++freq[e];
    }
  }
  for (std::uint32_t e = 0; e < experts; ++e) counts[e * stride + freq[e]] += windows - since[e];
}

/// Per-(layer, expert, m) window histograms for a set of segment lengths,
/// accumulated sequence by sequence.
class SegmentCounter {
 public:
  SegmentCounter(const TraceHeader& header, std::vector<std::size_t> segment_lengths)
      : experts_(header.experts_per_layer), ms_(std::move(segment_lengths)) {
    for (auto m : ms_) {
      if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
    }
    counts_.resize(ms_.size());
    for (std::size_t i = 0; i < ms_.size(); ++i) {
      counts_[i].resize(experts_.size());
      for (std::size_t l = 0; l < experts_.size(); ++l) counts_[i][l].assign(experts_[l] * (ms_[i] + 1), 0);
    }
    skipped_.assign(ms_.size(), 0);
    token_acts_.resize(experts_.size());
    for (std::size_t l = 0; l < experts_.size(); ++l) token_acts_[l].assign(experts_[l], 0);
  }

  void add(const Sequence& seq) {
    tokens_ += seq.size();
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      for (auto e : seq.activations[l].flat_experts()) ++token_acts_[l][e];
    }
    for (std::size_t i = 0; i < ms_.size(); ++i) {
      if (seq.size() < ms_[i]) {
        ++skipped_[i];
        continue;
      }
      for (std::size_t l = 0; l < experts_.size(); ++l) {
        count_layer_windows(seq.activations[l], ms_[i], experts_[l], counts_[i][l].data(), freq_, since_);
      }
    }
  }

  void merge(const SegmentCounter& other) {
    tokens_ += other.tokens_;
    for (std::size_t i = 0; i < ms_.size(); ++i) {
      skipped_[i] += other.skipped_[i];
      for (std::size_t l = 0; l < experts_.size(); ++l) {
        auto& dst = counts_[i][l];
        const auto& src = other.counts_[i][l];
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      for (std::size_t e = 0; e < experts_[l]; ++e) token_acts_[l][e] += other.token_acts_[l][e];
    }
  }

  const std::vector<std::size_t>& segment_lengths() const noexcept { return ms_; }
  std::uint64_t tokens() const noexcept { return tokens_; }
  std::uint64_t token_activations(ExpertKey key) const { return token_acts_.at(key.layer).at(key.index); }

  /// Sequences shorter than m; they contribute tokens but no windows.
  std::uint64_t skipped_sequences(std::size_t m) const { return skipped_[slot(m)]; }

  SegmentHistogram histogram(ExpertKey key, std::size_t m) const {
    if (key.layer >= experts_.size() || key.index >= experts_[key.layer]) {
      throw Error(ErrorCode::ExpertOutOfRange, "expert not in trace");
    }
    const auto i = slot(m);
    SegmentHistogram h(m);
    const auto* src = counts_[i][key.layer].data() + key.index * (m + 1);
    std::copy(src, src + m + 1, h.counts.begin());
    h.recompute_totals();
    h.token_slots = tokens_;
    h.token_activations = token_acts_[key.layer][key.index];
    return h;
  }

  SegmentHistogram pooled(std::span<const ExpertKey> keys, std::size_t m) const {
    SegmentHistogram h(m);
    for (const auto& k : keys) h.merge(histogram(k, m));
    return h;
  }

 private:
  std::size_t slot(std::size_t m) const {
    const auto it = std::find(ms_.begin(), ms_.end(), m);
    if (it == ms_.end()) throw Error(ErrorCode::InvalidSegmentLength, "m=" + std::to_string(m) + " not counted");
    return static_cast<std::size_t>(it - ms_.begin());
  }

  std::vector<std::uint32_t> experts_;
  std::vector<std::size_t> ms_;
  // counts_[m slot][layer][expert * (m + 1) + f]
  std::vector<std::vector<std::vector<std::uint64_t>>> counts_;
  std::vector<std::uint64_t> skipped_;
  std::vector<std::vector<std::uint64_t>> token_acts_;
  std::uint64_t tokens_ = 0;
  std::vector<std::uint32_t> freq_;
  std::vector<std::uint32_t> since_;
};

inline SegmentHistogram build_segment_histogram(const RoutingTrace& trace, ExpertKey expert,
                                                std::size_t m) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  check_expert(trace.header, expert);
  SegmentCounter counter(trace.header, {m});
  for (const auto& seq : trace.sequences) counter.add(seq);
  return counter.histogram(expert, m);
}

/// Group SRP from already-accumulated counts.
inline SrpResult srp_group(const SegmentCounter& counter, std::span<const ExpertKey> experts,
                           std::size_t m) {
  if (experts.empty()) throw Error(ErrorCode::EmptyGroup, "expert group is empty");
  auto r = srp_scan(counter.pooled(experts, m));
  for (const auto& k : experts) r.per_expert_alpha[k] = r.alpha;
  return r;
}

inline SrpResult srp_single(const SegmentCounter& counter, ExpertKey expert, std::size_t m) {
  return srp_scan(counter.histogram(expert, m));
}

inline SrpResult srp_single(const RoutingTrace& trace, ExpertKey expert, std::size_t m,
                            unsigned threads = 1) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  check_expert(trace.header, expert);
  const auto counter = accumulate(trace, threads, [&] { return SegmentCounter(trace.header, {m}); });
  return srp_single(counter, expert, m);
}

inline SrpResult srp_group(const RoutingTrace& trace, std::span<const ExpertKey> experts,
                           std::size_t m, unsigned threads = 1) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  if (experts.empty()) throw Error(ErrorCode::EmptyGroup, "expert group is empty");
  for (const auto& k : experts) check_expert(trace.header, k);
  const auto counter = accumulate(trace, threads, [&] { return SegmentCounter(trace.header, {m}); });
  return srp_group(counter, experts, m);
}

inline SrpResult srp_layer(const SegmentCounter& counter, const TraceHeader& header,
                           std::uint32_t layer, std::size_t m) {
  if (layer >= header.num_layers()) throw Error(ErrorCode::ExpertOutOfRange, "layer not in trace");
  const auto keys = layer_experts(header, layer);
  return srp_group(counter, keys, m);
}

inline SrpResult srp_layer(const RoutingTrace& trace, std::uint32_t layer, std::size_t m,
                           unsigned threads = 1) {
  if (layer >= trace.header.num_layers()) throw Error(ErrorCode::ExpertOutOfRange, "layer not in trace");
  const auto keys = layer_experts(trace.header, layer);
  return srp_group(trace, keys, m, threads);
}

struct ModelSrp {
  /// All experts of all layers pooled into one histogram.
  SrpResult pooled;
  std::vector<SrpResult> per_layer;
  /// Unweighted mean of the defined per-layer values.
  std::optional<double> mean_of_layers;
};

inline ModelSrp srp_model(const SegmentCounter& counter, const TraceHeader& header, std::size_t m) {
  ModelSrp out;
  const auto keys = all_experts(header);
  out.pooled = srp_group(counter, keys, m);
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::uint32_t l = 0; l < header.num_layers(); ++l) {
    out.per_layer.push_back(srp_layer(counter, header, l, m));
    if (!out.per_layer.back().undefined) {
      sum += out.per_layer.back().srp;
      ++defined;
    }
  }
  if (defined > 0) out.mean_of_layers = sum / static_cast<double>(defined);
  return out;
}

inline ModelSrp srp_model(const RoutingTrace& trace, std::size_t m, unsigned threads = 1) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  const auto counter = accumulate(trace, threads, [&] { return SegmentCounter(trace.header, {m}); });
  return srp_model(counter, trace.header, m);
}

// ---------------------------------------------------------------------------
// Per-position SRP

struct PositionSrp {
  std::size_t m = 1;
  /// Indexed by window start position.
  std::vector<SrpResult> by_position;

  /// max - min over defined positions with index >= from.
  std::optional<double> spread(std::size_t from = 1) const {
    std::optional<double> lo, hi;
    for (std::size_t p = from; p < by_position.size(); ++p) {
      if (by_position[p].undefined) continue;
      const double v = by_position[p].srp;
      lo = lo ? std::min(*lo, v) : v;
      hi = hi ? std::max(*hi, v) : v;
    }
    if (!lo) return std::nullopt;
    return *hi - *lo;
  }
};

/// SRP computed separately for windows starting at each position. Positions
/// run up to the shortest sequence, so every position sees every sequence.
inline PositionSrp srp_per_position(const RoutingTrace& trace, std::span<const ExpertKey> experts,
                                    std::size_t m) {
  if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
  if (experts.empty()) throw Error(ErrorCode::EmptyGroup, "expert group is empty");
  for (const auto& k : experts) check_expert(trace.header, k);

  PositionSrp out;
  out.m = m;
  if (trace.sequences.empty()) return out;
  std::size_t shortest = trace.sequences.front().size();
  for (const auto& s : trace.sequences) shortest = std::min(shortest, s.size());
  if (shortest < m) return out;
  const auto positions = shortest - m + 1;

  std::vector<SegmentHistogram> hist(positions, SegmentHistogram(m));
  std::uint64_t token_slots = 0;
  std::uint64_t token_acts = 0;
  std::vector<std::uint8_t> bits;
  for (const auto& seq : trace.sequences) {
    const auto n = seq.size();
    for (const auto& key : experts) {
      const auto& routing = seq.activations[key.layer];
      bits.assign(n, 0);
      for (std::size_t t = 0; t < n; ++t) {
        const auto a = routing.token(t);
        if (std::binary_search(a.begin(), a.end(), key.index)) {
          bits[t] = 1;
          ++token_acts;
        }
      }
      token_slots += n;
      std::uint32_t f = 0;
      for (std::size_t t = 0; t < m; ++t) f += bits[t];
      for (std::size_t p = 0; p < positions; ++p) {
        if (p > 0) f = f - bits[p - 1] + bits[p + m - 1];
        ++hist[p].counts[f];
      }
    }
  }
  for (auto& h : hist) {
    h.recompute_totals();
    h.token_slots = token_slots;
    h.token_activations = token_acts;
    out.by_position.push_back(srp_scan(h));
  }
  return out;
}

}  // namespace moelab
