// SPDX-License-Identifier: Apache-2.0
#pragma once

// Report assembly and rendering. Every CLI subcommand and the combined
// report go through the row builders below, so the same trace always yields
// the same numbers no matter which entry point produced them.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "moelab/cache.hpp"
#include "moelab/codec.hpp"
#include "moelab/parallel.hpp"
#include "moelab/specialization.hpp"
#include "moelab/srp.hpp"
#include "moelab/trace.hpp"

namespace moelab {

inline constexpr const char* kToolVersion = "0.1.0";

using nlohmann::json;

inline const std::vector<std::size_t>& default_segment_lengths() {
  static const std::vector<std::size_t> ms{1, 2, 4, 8, 16, 32};
  return ms;
}

/// 0, powers of two below the widest layer, and the widest layer itself.
inline std::vector<std::uint32_t> default_capacities(const TraceHeader& header) {
  std::uint32_t widest = 0;
  for (auto e : header.experts_per_layer) widest = std::max(widest, e);
  std::vector<std::uint32_t> caps{0};
  for (std::uint32_t c = 1; c < widest; c *= 2) caps.push_back(c);
  caps.push_back(widest);
  return caps;
}

struct ReportConfig {
  std::vector<std::size_t> segment_lengths = default_segment_lengths();
  /// Segment length of the per-expert SRP column in the specialization table.
  std::size_t spec_m = 16;
  std::size_t cache_m = 16;
  /// Empty means default_capacities().
  std::vector<std::uint32_t> capacities;
  std::uint32_t min_support = kDefaultMinSupport;
  unsigned threads = 0;

  /// Segment lengths the counter must cover (report list plus spec_m).
  std::vector<std::size_t> counted_lengths() const {
    auto ms = segment_lengths;
    if (std::find(ms.begin(), ms.end(), spec_m) == ms.end()) ms.push_back(spec_m);
    return ms;
  }

  json to_json() const {
    return json{{"m", segment_lengths},      {"spec_m", spec_m},
                {"cache_m", cache_m},        {"capacities", capacities},
                {"min_support", min_support}};
  }
};

/// Everything the combined report needs, gathered in one pass.
class ReportAccumulator {
 public:
  ReportAccumulator(const TraceHeader& header, const ReportConfig& config)
      : stats(header), segments(header, config.counted_lengths()), cache(header, config.cache_m), activity(header) {}

  void add(const Sequence& seq) {
    stats.add(seq);
    segments.add(seq);
    cache.add(seq);
    activity.add(seq);
  }

  void merge(const ReportAccumulator& other) {
    stats.merge(other.stats);
    segments.merge(other.segments);
    cache.merge(other.cache);
    activity.merge(other.activity);
  }

  StatsCounter stats;
  SegmentCounter segments;
  CacheCounter cache;
  ActivityCounter activity;
};

// ---------------------------------------------------------------------------
// Formatting helpers

/// Six significant digits, '.' decimal separator.
inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt6(*v) : "NA"; }

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// SRP

enum class SrpScope { Expert, Layer, Model };

inline std::string to_string(SrpScope s) {
  switch (s) {
    case SrpScope::Expert: return "expert";
    case SrpScope::Layer: return "layer";
    case SrpScope::Model: return "model";
  }
  return "unknown";
}

struct SrpRow {
  std::string scope;
  std::optional<std::uint32_t> layer;
  std::optional<std::uint32_t> expert;
  std::optional<std::size_t> position;
  SrpResult result;
  /// Model scope only.
  std::optional<double> mean_of_layers;
  std::vector<SrpResult> per_layer;
};

/// Rows ordered by (layer, expert, m).
inline std::vector<SrpRow> srp_rows(const SegmentCounter& counter, const TraceHeader& header, SrpScope scope,
                                    const std::vector<std::size_t>& ms) {
  std::vector<SrpRow> rows;
  if (scope == SrpScope::Model) {
    for (auto m : ms) {
      auto model = srp_model(counter, header, m);
      SrpRow row{"model", std::nullopt, std::nullopt, std::nullopt, model.pooled, model.mean_of_layers,
                 std::move(model.per_layer)};
      row.result.per_expert_alpha.clear();
      for (auto& r : row.per_layer) r.per_expert_alpha.clear();
      rows.push_back(std::move(row));
    }
    return rows;
  }
  for (std::uint32_t l = 0; l < header.num_layers(); ++l) {
    if (scope == SrpScope::Layer) {
      for (auto m : ms) {
        auto r = srp_layer(counter, header, l, m);
        r.per_expert_alpha.clear();
        rows.push_back({"layer", l, std::nullopt, std::nullopt, r, std::nullopt, {}});
      }
      continue;
    }
    for (std::uint32_t e = 0; e < header.experts_per_layer[l]; ++e) {
      for (auto m : ms) rows.push_back({"expert", l, e, std::nullopt, srp_single(counter, {l, e}, m), std::nullopt, {}});
    }
  }
  return rows;
}

inline json srp_result_json(const SrpResult& r) {
  return json{{"m", r.m},
              {"srp", r.undefined ? json(nullptr) : json(r.srp)},
              {"srp_num", r.exact.num},
              {"srp_den", r.exact.den},
              {"alpha", r.alpha},
              {"size_ratio", r.size_ratio},
              {"num_windows", r.num_windows},
              {"active_mass", r.active_mass},
              {"undefined", r.undefined}};
}

inline json srp_row_json(const SrpRow& row) {
  json j{{"scope", row.scope}};
  if (row.layer) j["layer"] = *row.layer;
  if (row.expert) j["expert"] = *row.expert;
  if (row.position) j["position"] = *row.position;
  j.update(srp_result_json(row.result));
  if (row.scope == "model") {
    j["mean_of_layers"] = opt_json(row.mean_of_layers);
    json layers = json::array();
    for (const auto& r : row.per_layer) layers.push_back(srp_result_json(r));
    j["per_layer"] = std::move(layers);
  }
  return j;
}

inline std::string srp_csv(const std::vector<SrpRow>& rows) {
  std::ostringstream os;
  os << "scope,layer,expert,position,m,srp,alpha,size_ratio,num_windows,active_mass,undefined,mean_of_layers\n";
  for (const auto& row : rows) {
    const auto& r = row.result;
    os << row.scope << ',' << (row.layer ? std::to_string(*row.layer) : "") << ','
       << (row.expert ? std::to_string(*row.expert) : "") << ','
       << (row.position ? std::to_string(*row.position) : "") << ',' << r.m << ','
       << (r.undefined ? std::string("NA") : fmt6(r.srp)) << ',' << r.alpha << ',' << fmt6(r.size_ratio) << ','
       << r.num_windows << ',' << r.active_mass << ',' << (r.undefined ? "true" : "false") << ','
       << (row.scope == "model" ? fmt_opt(row.mean_of_layers) : "") << '\n';
  }
  return os.str();
}

inline json srp_json(const std::vector<SrpRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) out.push_back(srp_row_json(row));
  return out;
}

// ---------------------------------------------------------------------------
// Load balance

inline json lb_json(const LoadBalanceReport& lb) {
  return json{{"per_layer_sd", lb.per_layer_sd},
              {"mean_sd", lb.mean_sd},
              {"pooled_sd", lb.pooled_sd},
              {"per_expert_rates", lb.per_expert_rates}};
}

inline std::string lb_csv(const LoadBalanceReport& lb) {
  std::ostringstream os;
  os << "layer,sd\n";
  for (std::size_t l = 0; l < lb.per_layer_sd.size(); ++l) os << l << ',' << fmt6(lb.per_layer_sd[l]) << '\n';
  os << "mean," << fmt6(lb.mean_sd) << '\n';
  os << "pooled," << fmt6(lb.pooled_sd) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Specialization

struct SpecRow {
  SpecializationProfile profile;
  std::optional<double> srp;
};

inline std::vector<SpecRow> spec_rows(const ActivityCounter& activity, const SegmentCounter& segments,
                                      std::size_t srp_m, std::uint32_t min_support) {
  std::vector<SpecRow> rows;
  for (auto& p : specialization_profiles(activity, min_support)) {
    const auto r = srp_single(segments, p.expert, srp_m);
    rows.push_back({std::move(p), r.undefined ? std::nullopt : std::optional<double>(r.srp)});
  }
  return rows;
}

inline std::string spec_csv(const std::vector<SpecRow>& rows, std::size_t srp_m) {
  std::ostringstream os;
  os << "layer,index,activation_rate,domain_cv,vocab_input,vocab_pred,vocab_truth,srp_m" << srp_m << '\n';
  for (const auto& row : rows) {
    const auto& p = row.profile;
    os << p.expert.layer << ',' << p.expert.index << ',' << fmt6(p.activation_rate) << ',' << fmt_opt(p.domain_cv)
       << ',' << fmt_opt(p.vocab_scores[0]) << ',' << fmt_opt(p.vocab_scores[1]) << ','
       << fmt_opt(p.vocab_scores[2]) << ',' << fmt_opt(row.srp) << '\n';
  }
  return os.str();
}

inline json spec_json(const std::vector<SpecRow>& rows, std::size_t srp_m) {
  json out = json::array();
  for (const auto& row : rows) {
    const auto& p = row.profile;
    out.push_back(json{{"layer", p.expert.layer},
                       {"index", p.expert.index},
                       {"activation_rate", p.activation_rate},
                       {"domain_rates", p.domain_rates},
                       {"domain_cv", opt_json(p.domain_cv)},
                       {"vocab_input", opt_json(p.vocab_scores[0])},
                       {"vocab_pred", opt_json(p.vocab_scores[1])},
                       {"vocab_truth", opt_json(p.vocab_scores[2])},
                       {"srp_m" + std::to_string(srp_m), opt_json(row.srp)}});
  }
  return out;
}

/// Per-model correlation of every specialization column with per-expert SRP.
inline json correlation_summary(const std::vector<SpecRow>& rows, std::size_t srp_m) {
  std::vector<std::optional<double>> srp;
  for (const auto& r : rows) srp.push_back(r.srp);
  auto column = [&](auto get) {
    std::vector<std::optional<double>> v;
    for (const auto& r : rows) v.push_back(get(r.profile));
    return v;
  };
  const std::vector<std::pair<std::string, std::vector<std::optional<double>>>> columns{
      {"domain_cv", column([](const SpecializationProfile& p) { return p.domain_cv; })},
      {"vocab_input", column([](const SpecializationProfile& p) { return p.vocab_scores[0]; })},
      {"vocab_pred", column([](const SpecializationProfile& p) { return p.vocab_scores[1]; })},
      {"vocab_truth", column([](const SpecializationProfile& p) { return p.vocab_scores[2]; })},
      {"activation_rate",
       column([](const SpecializationProfile& p) { return std::optional<double>(p.activation_rate); })}};
  json out = json::object();
  for (const auto& [name, xs] : columns) {
    json entry;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) pairs += (xs[i] && srp[i]) ? 1 : 0;
    entry["pairs"] = pairs;
    for (auto method : {CorrelationMethod::Pearson, CorrelationMethod::Spearman}) {
      try {
        entry[to_string(method)] = correlate(xs, srp, method);
      } catch (const Error&) {
        entry[to_string(method)] = nullptr;
      }
    }
    out[name + "_vs_srp_m" + std::to_string(srp_m)] = std::move(entry);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache sweep

/// Per-layer sweeps followed by the activation-weighted all-layer sweep.
inline std::vector<SweepResult> sweeps(const CacheCounter& counter, std::span<const std::uint32_t> capacities) {
  std::vector<SweepResult> out;
  for (std::uint32_t l = 0; l < counter.num_layers(); ++l) out.push_back(capacity_sweep(counter, l, capacities));
  out.push_back(capacity_sweep(counter, std::nullopt, capacities));
  return out;
}

inline std::string sweep_csv(const std::vector<SweepResult>& results) {
  std::ostringstream os;
  os << "capacity,layer,sch,lru,knee\n";
  for (const auto& s : results) {
    for (const auto& row : s.rows) {
      os << row.capacity << ',' << (s.layer ? std::to_string(*s.layer) : "all") << ',' << fmt6(row.sch) << ','
         << fmt6(row.lru) << ',' << (row.knee ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

inline json sweep_json(const std::vector<SweepResult>& results) {
  json out = json::array();
  for (const auto& s : results) {
    json rows = json::array();
    for (const auto& row : s.rows) {
      rows.push_back(json{{"capacity", row.capacity},
                          {"sch", row.sch},
                          {"lru", row.lru},
                          {"sch_hits", row.sch_hits},
                          {"lru_hits", row.lru_hits},
                          {"knee", row.knee}});
    }
    out.push_back(json{{"layer", s.layer ? json(*s.layer) : json("all")},
                       {"m", s.m},
                       {"total_activations", s.total_activations},
                       {"knee_capacity", s.knee ? json(*s.knee) : json(nullptr)},
                       {"rows", std::move(rows)}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stats

inline json stats_json(const StatsReport& s) {
  json layers = json::array();
  for (std::size_t l = 0; l < s.per_layer_total_activations.size(); ++l) {
    layers.push_back(json{{"layer", l},
                          {"total_activations", s.per_layer_total_activations[l]},
                          {"mean_activations_per_token", s.mean_activations_per_token(l)}});
  }
  return json{{"num_sequences", s.num_sequences},
              {"total_tokens", s.total_tokens},
              {"min_sequence_length", s.min_sequence_length},
              {"max_sequence_length", s.max_sequence_length},
              {"tokens_per_domain", s.tokens_per_domain},
              {"sequences_per_domain", s.sequences_per_domain},
              {"layers", std::move(layers)}};
}

// ---------------------------------------------------------------------------
// Bundle

struct ReportBundle {
  std::string model_id;
  ReportConfig config;
  StatsReport stats;
  std::vector<SrpRow> srp_expert;
  std::vector<SrpRow> srp_layer;
  std::vector<SrpRow> srp_model;
  LoadBalanceReport load_balance;
  std::vector<SpecRow> specialization;
  json correlation;
  std::vector<SweepResult> sch;
};

inline ReportBundle build_report(const ReportAccumulator& acc, const TraceHeader& header, ReportConfig config) {
  if (config.capacities.empty()) config.capacities = default_capacities(header);
  ReportBundle b;
  b.model_id = header.model_id;
  b.stats = acc.stats.report();
  b.srp_expert = srp_rows(acc.segments, header, SrpScope::Expert, config.segment_lengths);
  b.srp_layer = srp_rows(acc.segments, header, SrpScope::Layer, config.segment_lengths);
  b.srp_model = srp_rows(acc.segments, header, SrpScope::Model, config.segment_lengths);
  if (acc.activity.tokens() > 0) b.load_balance = load_balance_sd(acc.activity);
  b.specialization = spec_rows(acc.activity, acc.segments, config.spec_m, config.min_support);
  b.correlation = correlation_summary(b.specialization, config.spec_m);
  b.sch = sweeps(acc.cache, config.capacities);
  b.config = std::move(config);
  return b;
}

inline ReportBundle build_report(SequenceSource& source, const ReportConfig& config) {
  const auto header = source.header();
  const auto acc = accumulate(source, config.threads, [&] { return ReportAccumulator(header, config); });
  return build_report(acc, header, config);
}

inline json report_json(const ReportBundle& b) {
  return json{{"tool", "moelab"},
              {"version", kToolVersion},
              {"model_id", b.model_id},
              {"config", b.config.to_json()},
              {"stats", stats_json(b.stats)},
              {"srp", json{{"expert", srp_json(b.srp_expert)},
                           {"layer", srp_json(b.srp_layer)},
                           {"model", srp_json(b.srp_model)}}},
              {"load_balance", lb_json(b.load_balance)},
              {"specialization", spec_json(b.specialization, b.config.spec_m)},
              {"correlation", b.correlation},
              {"sch", sweep_json(b.sch)}};
}

}  // namespace moelab
