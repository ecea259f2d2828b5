// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moelab/error.hpp"

namespace moelab {

inline constexpr std::uint16_t kFormatVersion = 1;

/// Maximum activation list length representable in the binary format
/// (per-token count is stored as u8).
inline constexpr std::size_t kMaxActivationsPerToken = 255;

enum class StreamKind : std::uint8_t { Decoder = 0, Encoder = 1 };

inline std::string to_string(StreamKind kind) {
  return kind == StreamKind::Encoder ? "encoder" : "decoder";
}

struct TraceHeader {
  std::uint16_t format_version = kFormatVersion;
  std::string model_id;
  std::vector<std::uint32_t> experts_per_layer;
  /// 0 means the layer routes a variable number of experts per token.
  std::vector<std::uint16_t> nominal_top_k;
  std::vector<StreamKind> stream_kind;
  /// 0 means unknown.
  std::uint32_t vocab_size = 0;

  std::size_t num_layers() const noexcept { return experts_per_layer.size(); }

  std::size_t total_experts() const noexcept {
    std::size_t n = 0;
    for (auto e : experts_per_layer) n += e;
    return n;
  }

  /// Builds a header with `layers` identical layers.
  static TraceHeader uniform(std::string model, std::size_t layers, std::uint32_t experts,
                             std::uint16_t top_k, std::uint32_t vocab = 0) {
    TraceHeader h;
    h.model_id = std::move(model);
    h.experts_per_layer.assign(layers, experts);
    h.nominal_top_k.assign(layers, top_k);
    h.stream_kind.assign(layers, StreamKind::Decoder);
    h.vocab_size = vocab;
    return h;
  }

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

/// Activated-expert lists of one layer over one sequence, stored as CSR:
/// token t owns experts[offsets[t] .. offsets[t+1]).
class LayerRouting {
 public:
  LayerRouting() : offsets_{0} {}

  std::size_t num_tokens() const noexcept { return offsets_.size() - 1; }
  std::size_t num_activations() const noexcept { return experts_.size(); }

  std::span<const std::uint32_t> token(std::size_t t) const noexcept {
    return {experts_.data() + offsets_[t], experts_.data() + offsets_[t + 1]};
  }

  void push_token(std::span<const std::uint32_t> active) {
    experts_.insert(experts_.end(), active.begin(), active.end());
    offsets_.push_back(static_cast<std::uint32_t>(experts_.size()));
  }

  void push_token(std::initializer_list<std::uint32_t> active) {
    push_token(std::span<const std::uint32_t>(active.begin(), active.size()));
  }

  void reserve(std::size_t tokens, std::size_t activations) {
    offsets_.reserve(tokens + 1);
    experts_.reserve(activations);
  }

  std::span<const std::uint32_t> flat_experts() const noexcept { return experts_; }

  friend bool operator==(const LayerRouting&, const LayerRouting&) = default;

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> experts_;
};

struct Sequence {
  std::string domain = "unknown";
  std::vector<std::uint32_t> token_ids;
  std::optional<std::vector<std::uint32_t>> predicted_ids;
  std::optional<std::vector<std::uint32_t>> ground_truth_ids;
  /// One entry per layer.
  std::vector<LayerRouting> activations;

  std::size_t size() const noexcept { return token_ids.size(); }

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct RoutingTrace {
  TraceHeader header;
  std::vector<Sequence> sequences;

  std::size_t total_tokens() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size();
    return n;
  }

  friend bool operator==(const RoutingTrace&, const RoutingTrace&) = default;
};

struct ExpertKey {
  std::uint32_t layer = 0;
  std::uint32_t index = 0;

  friend auto operator<=>(const ExpertKey&, const ExpertKey&) = default;
};

inline void check_expert(const TraceHeader& header, ExpertKey key) {
  if (key.layer >= header.num_layers() || key.index >= header.experts_per_layer[key.layer]) {
    throw Error(ErrorCode::ExpertOutOfRange, "expert " + std::to_string(key.layer) + ":" +
                                                 std::to_string(key.index) + " not in trace");
  }
}

/// All experts of a layer, in index order.
inline std::vector<ExpertKey> layer_experts(const TraceHeader& header, std::uint32_t layer) {
  std::vector<ExpertKey> keys;
  for (std::uint32_t e = 0; e < header.experts_per_layer.at(layer); ++e) keys.push_back({layer, e});
  return keys;
}

inline std::vector<ExpertKey> all_experts(const TraceHeader& header) {
  std::vector<ExpertKey> keys;
  for (std::uint32_t l = 0; l < header.num_layers(); ++l) {
    for (std::uint32_t e = 0; e < header.experts_per_layer[l]; ++e) keys.push_back({l, e});
  }
  return keys;
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  HeaderInconsistent,
  LayerCountMismatch,
  LengthMismatch,
  ExpertOutOfRange,
  DuplicateExpert,
  UnsortedActivations,
  TopKMismatch,
  TooManyActivations,
};

inline std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::HeaderInconsistent: return "HeaderInconsistent";
    case ViolationKind::LayerCountMismatch: return "LayerCountMismatch";
    case ViolationKind::LengthMismatch: return "LengthMismatch";
    case ViolationKind::ExpertOutOfRange: return "ExpertOutOfRange";
    case ViolationKind::DuplicateExpert: return "DuplicateExpert";
    case ViolationKind::UnsortedActivations: return "UnsortedActivations";
    case ViolationKind::TopKMismatch: return "TopKMismatch";
    case ViolationKind::TooManyActivations: return "TooManyActivations";
  }
  return "Unknown";
}

/// Coordinates are -1 when not applicable (header-level problems).
struct Violation {
  ViolationKind kind;
  std::int64_t sequence = -1;
  std::int64_t layer = -1;
  std::int64_t token = -1;
  std::string detail;

  std::string describe() const {
    std::string s = to_string(kind);
    s += " (sequence " + std::to_string(sequence) + ", layer " + std::to_string(layer) +
         ", token " + std::to_string(token) + ")";
    if (!detail.empty()) s += ": " + detail;
    return s;
  }
};

inline std::vector<Violation> validate_header(const TraceHeader& h) {
  std::vector<Violation> out;
  const auto layers = h.experts_per_layer.size();
  if (layers == 0) {
    out.push_back({ViolationKind::HeaderInconsistent, -1, -1, -1, "num_layers must be positive"});
  }
  if (h.nominal_top_k.size() != layers || h.stream_kind.size() != layers) {
    out.push_back({ViolationKind::HeaderInconsistent, -1, -1, -1,
                   "per-layer lists disagree on num_layers"});
    return out;
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (h.experts_per_layer[l] == 0) {
      out.push_back({ViolationKind::HeaderInconsistent, -1, static_cast<std::int64_t>(l), -1,
                     "layer has no experts"});
    }
    if (h.nominal_top_k[l] > h.experts_per_layer[l]) {
      out.push_back({ViolationKind::HeaderInconsistent, -1, static_cast<std::int64_t>(l), -1,
                     "nominal_top_k exceeds experts_per_layer"});
    }
  }
  return out;
}

/// Checks one sequence against a header already known to be consistent.
/// Each token reports at most one violation per kind.
inline void validate_sequence(const TraceHeader& h, const Sequence& seq, std::int64_t seq_index,
                              std::vector<Violation>& out) {
  const auto n = seq.token_ids.size();
  if (seq.predicted_ids && seq.predicted_ids->size() != n) {
    out.push_back({ViolationKind::LengthMismatch, seq_index, -1, -1,
                   "predicted_ids length differs from token_ids"});
  }
  if (seq.ground_truth_ids && seq.ground_truth_ids->size() != n) {
    out.push_back({ViolationKind::LengthMismatch, seq_index, -1, -1,
                   "ground_truth_ids length differs from token_ids"});
  }
  if (seq.activations.size() != h.num_layers()) {
    out.push_back({ViolationKind::LayerCountMismatch, seq_index, -1, -1,
                   std::to_string(seq.activations.size()) + " layers, header declares " +
                       std::to_string(h.num_layers())});
    return;
  }
  for (std::size_t l = 0; l < h.num_layers(); ++l) {
    const auto& routing = seq.activations[l];
    const auto layer = static_cast<std::int64_t>(l);
    if (routing.num_tokens() != n) {
      out.push_back({ViolationKind::LengthMismatch, seq_index, layer, -1,
                     std::to_string(routing.num_tokens()) + " activation lists for " +
                         std::to_string(n) + " tokens"});
      continue;
    }
    const auto experts = h.experts_per_layer[l];
    const auto top_k = h.nominal_top_k[l];
    for (std::size_t t = 0; t < n; ++t) {
      const auto active = routing.token(t);
      const auto token = static_cast<std::int64_t>(t);
      if (top_k > 0 && active.size() != top_k) {
        out.push_back({ViolationKind::TopKMismatch, seq_index, layer, token,
                       std::to_string(active.size()) + " experts, nominal top-k " +
                           std::to_string(top_k)});
      }
      if (active.size() > kMaxActivationsPerToken) {
        out.push_back({ViolationKind::TooManyActivations, seq_index, layer, token, ""});
      }
      bool range_reported = false;
      bool order_reported = false;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i] >= experts && !range_reported) {
          out.push_back({ViolationKind::ExpertOutOfRange, seq_index, layer, token,
                         "index " + std::to_string(active[i]) + " >= " + std::to_string(experts)});
          range_reported = true;
        }
        if (i > 0 && active[i - 1] >= active[i] && !order_reported) {
          out.push_back({active[i - 1] == active[i] ? ViolationKind::DuplicateExpert
                                                    : ViolationKind::UnsortedActivations,
                         seq_index, layer, token, ""});
          order_reported = true;
        }
      }
    }
  }
}

/// Returns every invariant violation; an empty result means the trace is valid.
inline std::vector<Violation> validate(const RoutingTrace& trace) {
  auto out = validate_header(trace.header);
  if (!out.empty()) return out;
  for (std::size_t i = 0; i < trace.sequences.size(); ++i) {
    validate_sequence(trace.header, trace.sequences[i], static_cast<std::int64_t>(i), out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus statistics

struct StatsReport {
  std::uint64_t num_sequences = 0;
  std::uint64_t total_tokens = 0;
  std::uint64_t min_sequence_length = 0;
  std::uint64_t max_sequence_length = 0;
  std::map<std::string, std::uint64_t> tokens_per_domain;
  std::map<std::string, std::uint64_t> sequences_per_domain;
  std::vector<std::uint64_t> per_layer_total_activations;

  double mean_activations_per_token(std::size_t layer) const {
    return total_tokens == 0 ? 0.0
                             : static_cast<double>(per_layer_total_activations.at(layer)) /
                                   static_cast<double>(total_tokens);
  }
};

/// Streaming accumulator behind corpus_stats; mergeable across workers.
class StatsCounter {
 public:
  explicit StatsCounter(const TraceHeader& header) {
    report_.per_layer_total_activations.assign(header.num_layers(), 0);
  }

  void add(const Sequence& seq) {
    const auto n = static_cast<std::uint64_t>(seq.size());
    if (report_.num_sequences == 0) {
      report_.min_sequence_length = report_.max_sequence_length = n;
    } else {
      report_.min_sequence_length = std::min(report_.min_sequence_length, n);
      report_.max_sequence_length = std::max(report_.max_sequence_length, n);
    }
    ++report_.num_sequences;
    report_.total_tokens += n;
    report_.tokens_per_domain[seq.domain] += n;
    report_.sequences_per_domain[seq.domain] += 1;
    for (std::size_t l = 0; l < seq.activations.size(); ++l) {
      report_.per_layer_total_activations[l] += seq.activations[l].num_activations();
    }
  }

  void merge(const StatsCounter& other) {
    const auto& o = other.report_;
    if (o.num_sequences == 0) return;
    if (report_.num_sequences == 0) {
      report_.min_sequence_length = o.min_sequence_length;
      report_.max_sequence_length = o.max_sequence_length;
    } else {
      report_.min_sequence_length = std::min(report_.min_sequence_length, o.min_sequence_length);
      report_.max_sequence_length = std::max(report_.max_sequence_length, o.max_sequence_length);
    }
    report_.num_sequences += o.num_sequences;
    report_.total_tokens += o.total_tokens;
    for (const auto& [d, v] : o.tokens_per_domain) report_.tokens_per_domain[d] += v;
    for (const auto& [d, v] : o.sequences_per_domain) report_.sequences_per_domain[d] += v;
    for (std::size_t l = 0; l < o.per_layer_total_activations.size(); ++l) {
      report_.per_layer_total_activations[l] += o.per_layer_total_activations[l];
    }
  }

  const StatsReport& report() const noexcept { return report_; }

 private:
  StatsReport report_;
};

inline StatsReport corpus_stats(const RoutingTrace& trace) {
  StatsCounter counter(trace.header);
  for (const auto& seq : trace.sequences) counter.add(seq);
  return counter.report();
}

}  // namespace moelab
