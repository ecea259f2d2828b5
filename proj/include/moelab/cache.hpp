// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-layer expert cache simulation.
//
// Segment cache best hit rate (SCH): each sequence is cut into consecutive
// non-overlapping segments of m tokens (the last one may be shorter). At
// every segment boundary the cache is refilled with the `capacity` experts
// that fire most often inside the upcoming segment. Because hits are additive
// over segments and nothing carries over, the per-segment top-capacity choice
// is the best static-per-segment cache.
//
// LRU baseline: token by token, each activated expert (in index order) is a
// hit when resident, then becomes most recent. The cache starts empty for
// every sequence.
//
// Both policies reduce to capacity-free histograms: the oracle records how
// many activations the r-th most frequent expert of each segment holds, and
// LRU records stack distances. Hits at capacity C are prefix sums below C.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "moelab/error.hpp"
#include "moelab/parallel.hpp"
#include "moelab/trace.hpp"

namespace moelab {

enum class CachePolicy { OracleSegment, LRU };

struct CacheConfig {
  std::uint32_t capacity = 0;
  std::size_t m = 16;
  CachePolicy policy = CachePolicy::OracleSegment;
};

struct CacheResult {
  double hit_rate = 0.0;
  std::vector<double> per_layer;
  std::uint64_t hits = 0;
  std::uint64_t total_activations = 0;
  /// No activations at all; hit_rate is then reported as 1.0 (vacuous).
  bool no_activations = false;

  std::uint64_t misses() const noexcept { return total_activations - hits; }
};

class CacheCounter {
 public:
  CacheCounter(const TraceHeader& header, std::size_t m) : experts_(header.experts_per_layer), m_(m) {
    if (m < 1) throw Error(ErrorCode::InvalidSegmentLength, "m must be >= 1");
    const auto layers = experts_.size();
    rank_mass_.resize(layers);
    lru_distance_.resize(layers);
    totals_.assign(layers, 0);
    for (std::size_t l = 0; l < layers; ++l) {
      rank_mass_[l].assign(experts_[l], 0);
      // Last slot counts cold misses.
      lru_distance_[l].assign(experts_[l] + 1, 0);
    }
  }

  void add(const Sequence& seq) {
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      const auto& routing = seq.activations[l];
      totals_[l] += routing.num_activations();
      add_oracle(routing, l);
      add_lru(routing, l);
    }
  }

  void merge(const CacheCounter& other) {
    for (std::size_t l = 0; l < experts_.size(); ++l) {
      totals_[l] += other.totals_[l];
      for (std::size_t r = 0; r < rank_mass_[l].size(); ++r) rank_mass_[l][r] += other.rank_mass_[l][r];
      for (std::size_t d = 0; d < lru_distance_[l].size(); ++d) {
        lru_distance_[l][d] += other.lru_distance_[l][d];
      }
    }
  }

  std::size_t segment_length() const noexcept { return m_; }
  std::size_t num_layers() const noexcept { return experts_.size(); }
  std::uint32_t experts(std::size_t layer) const { return experts_.at(layer); }
  std::uint64_t total_activations(std::size_t layer) const { return totals_.at(layer); }

  std::uint64_t oracle_hits(std::size_t layer, std::uint32_t capacity) const {
    const auto& mass = rank_mass_.at(layer);
    std::uint64_t hits = 0;
    for (std::size_t r = 0; r < std::min<std::size_t>(capacity, mass.size()); ++r) hits += mass[r];
    return hits;
  }

  std::uint64_t lru_hits(std::size_t layer, std::uint32_t capacity) const {
    const auto& dist = lru_distance_.at(layer);
    std::uint64_t hits = 0;
    for (std::size_t d = 0; d < std::min<std::size_t>(capacity, dist.size() - 1); ++d) hits += dist[d];
    return hits;
  }

  CacheResult result(CachePolicy policy, std::span<const std::uint32_t> layers, std::uint32_t capacity) const {
    CacheResult r;
    for (auto l : layers) {
      const auto hits = policy == CachePolicy::OracleSegment ? oracle_hits(l, capacity) : lru_hits(l, capacity);
      const auto total = totals_.at(l);
      r.hits += hits;
      r.total_activations += total;
      r.per_layer.push_back(total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total));
    }
    r.no_activations = r.total_activations == 0;
    r.hit_rate = r.no_activations ? 1.0
                                  : static_cast<double>(r.hits) / static_cast<double>(r.total_activations);
    return r;
  }

 private:
  void add_oracle(const LayerRouting& routing, std::size_t l) {
    const auto n = routing.num_tokens();
    segment_count_.assign(experts_[l], 0);
    for (std::size_t start = 0; start < n; start += m_) {
      const auto end = std::min(n, start + m_);
      touched_.clear();
      for (auto t = start; t < end; ++t) {
        for (auto e : routing.token(t)) {
          if (segment_count_[e]++ == 0) touched_.push_back(e);
        }
      }
      ranked_.clear();
      for (auto e : touched_) {
        ranked_.push_back(segment_count_[e]);
        segment_count_[e] = 0;
      }
      std::sort(ranked_.begin(), ranked_.end(), std::greater<>{});
      auto& mass = rank_mass_[l];
      for (std::size_t r = 0; r < ranked_.size(); ++r) mass[r] += ranked_[r];
    }
  }

  void add_lru(const LayerRouting& routing, std::size_t l) {
    recency_.clear();
    auto& dist = lru_distance_[l];
    for (auto e : routing.flat_experts()) {
      const auto it = std::find(recency_.begin(), recency_.end(), e);
      if (it == recency_.end()) {
        ++dist.back();
        recency_.insert(recency_.begin(), e);
      } else {
        ++dist[static_cast<std::size_t>(it - recency_.begin())];
        std::rotate(recency_.begin(), it, it + 1);
      }
    }
  }

  std::vector<std::uint32_t> experts_;
  std::size_t m_;
  std::vector<std::vector<std::uint64_t>> rank_mass_;
  std::vector<std::vector<std::uint64_t>> lru_distance_;
  std::vector<std::uint64_t> totals_;
  std::vector<std::uint32_t> segment_count_;
  std::vector<std::uint32_t> touched_;
  std::vector<std::uint32_t> ranked_;
  std::vector<std::uint32_t> recency_;
};

namespace detail {

inline void check_layer(const TraceHeader& header, std::uint32_t layer) {
  if (layer >= header.num_layers()) throw Error(ErrorCode::ExpertOutOfRange, "layer not in trace");
}

}  // namespace detail

inline CacheResult sch_oracle(const RoutingTrace& trace, std::uint32_t layer, std::uint32_t capacity,
                              std::size_t m, unsigned threads = 1) {
  detail::check_layer(trace.header, layer);
  const auto counter = accumulate(trace, threads, [&] { return CacheCounter(trace.header, m); });
  const std::uint32_t layers[] = {layer};
  return counter.result(CachePolicy::OracleSegment, layers, capacity);
}

inline CacheResult lru_hit_rate(const RoutingTrace& trace, std::uint32_t layer, std::uint32_t capacity,
                                unsigned threads = 1) {
  detail::check_layer(trace.header, layer);
  const auto counter = accumulate(trace, threads, [&] { return CacheCounter(trace.header, 1); });
  const std::uint32_t layers[] = {layer};
  return counter.result(CachePolicy::LRU, layers, capacity);
}

/// Activation-weighted over all layers, each with its own cache.
inline CacheResult simulate_model(const RoutingTrace& trace, const CacheConfig& config, unsigned threads = 1) {
  const auto counter = accumulate(trace, threads, [&] { return CacheCounter(trace.header, config.m); });
  std::vector<std::uint32_t> layers(trace.header.num_layers());
  for (std::uint32_t l = 0; l < layers.size(); ++l) layers[l] = l;
  return counter.result(config.policy, layers, config.capacity);
}

struct SweepRow {
  std::uint32_t capacity = 0;
  double sch = 0.0;
  double lru = 0.0;
  std::uint64_t sch_hits = 0;
  std::uint64_t lru_hits = 0;
  bool knee = false;
};

struct SweepResult {
  /// Empty for the activation-weighted all-layer sweep.
  std::optional<std::uint32_t> layer;
  std::size_t m = 1;
  std::uint64_t total_activations = 0;
  std::vector<SweepRow> rows;
  /// Smallest swept capacity whose SCH reaches 95% of the full-cache rate.
  std::optional<std::uint32_t> knee;
};

/// Sweep over capacities for one layer (or all layers when `layer` is empty).
inline SweepResult capacity_sweep(const CacheCounter& counter, std::optional<std::uint32_t> layer,
                                  std::span<const std::uint32_t> capacities) {
  std::vector<std::uint32_t> layers;
  if (layer) {
    layers.push_back(*layer);
  } else {
    for (std::uint32_t l = 0; l < counter.num_layers(); ++l) layers.push_back(l);
  }
  if (capacities.empty() || !std::is_sorted(capacities.begin(), capacities.end())) {
    throw Error(ErrorCode::InvalidConfig, "capacities must be non-empty and sorted");
  }
  SweepResult out;
  out.layer = layer;
  out.m = counter.segment_length();
  std::uint64_t full_hits = 0;
  for (auto l : layers) {
    out.total_activations += counter.total_activations(l);
    full_hits += counter.oracle_hits(l, counter.experts(l));
  }
  for (auto c : capacities) {
    SweepRow row;
    row.capacity = c;
    for (auto l : layers) {
      row.sch_hits += counter.oracle_hits(l, c);
      row.lru_hits += counter.lru_hits(l, c);
    }
    const double total = static_cast<double>(out.total_activations);
    row.sch = out.total_activations == 0 ? 1.0 : static_cast<double>(row.sch_hits) / total;
    row.lru = out.total_activations == 0 ? 1.0 : static_cast<double>(row.lru_hits) / total;
    if (!out.knee && out.total_activations > 0 && row.sch_hits * 100 >= full_hits * 95) {
      out.knee = c;
      row.knee = true;
    }
    out.rows.push_back(row);
  }
  return out;
}

inline SweepResult capacity_sweep(const RoutingTrace& trace, std::uint32_t layer,
                                  std::span<const std::uint32_t> capacities, std::size_t m,
                                  unsigned threads = 1) {
  detail::check_layer(trace.header, layer);
  const auto counter = accumulate(trace, threads, [&] { return CacheCounter(trace.header, m); });
  return capacity_sweep(counter, layer, capacities);
}

}  // namespace moelab
