// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "moelab/trace.hpp"

namespace moelab::fixtures {

using TokenLists = std::vector<std::vector<std::uint32_t>>;

/// One layer of `experts` experts; seqs[s][t] lists the experts of token t.
inline RoutingTrace one_layer(std::uint32_t experts, const std::vector<TokenLists>& seqs,
                              std::uint16_t top_k = 0) {
  RoutingTrace trace;
  trace.header = TraceHeader::uniform("test", 1, experts, top_k);
  for (const auto& tokens : seqs) {
    Sequence seq;
    seq.activations.resize(1);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      seq.token_ids.push_back(static_cast<std::uint32_t>(t));
      seq.activations[0].push_token(tokens[t]);
    }
    trace.sequences.push_back(std::move(seq));
  }
  return trace;
}

/// One layer with one activation per token, e.g. {0, 0, 1, 1}.
inline RoutingTrace top1(std::uint32_t experts, const std::vector<std::uint32_t>& acts) {
  TokenLists tokens;
  for (auto e : acts) tokens.push_back({e});
  return one_layer(experts, {tokens}, 1);
}

/// Single-expert trace from activation bits, one entry per sequence.
inline RoutingTrace from_bits(const std::vector<std::vector<int>>& bits) {
  std::vector<TokenLists> seqs;
  for (const auto& b : bits) {
    TokenLists tokens;
    for (int x : b) tokens.push_back(x ? std::vector<std::uint32_t>{0} : std::vector<std::uint32_t>{});
    seqs.push_back(std::move(tokens));
  }
  return one_layer(1, seqs);
}

struct RandomShape {
  std::uint32_t layers = 1;
  std::uint32_t experts = 4;
  std::size_t max_sequences = 3;
  std::size_t max_len = 8;
  std::size_t min_len = 0;
  /// Each (token, expert) fires with this probability, drawn per trace when < 0.
  double density = -1.0;
  bool with_streams = false;
  std::uint32_t vocab = 16;
};

/// Variable-k random trace (nominal_top_k = 0) that always validates.
inline RoutingTrace random_trace(std::mt19937_64& rng, const RandomShape& shape) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> nseq(1, shape.max_sequences);
  std::uniform_int_distribution<std::size_t> len(shape.min_len, shape.max_len);
  std::uniform_int_distribution<std::uint32_t> tok(0, shape.vocab - 1);
  const double p = shape.density >= 0.0 ? shape.density : unit(rng);
  const char* domains[] = {"a", "b", "c"};

  RoutingTrace trace;
  trace.header = TraceHeader::uniform("random", shape.layers, shape.experts, 0, shape.vocab);
  const auto n_seq = nseq(rng);
  for (std::size_t s = 0; s < n_seq; ++s) {
    Sequence seq;
    seq.domain = domains[rng() % 3];
    const auto n = len(rng);
    for (std::size_t t = 0; t < n; ++t) seq.token_ids.push_back(tok(rng));
    if (shape.with_streams) {
      if (rng() & 1) {
        seq.predicted_ids.emplace();
        for (std::size_t t = 0; t < n; ++t) seq.predicted_ids->push_back(tok(rng));
      }
      if (rng() & 1) {
        seq.ground_truth_ids.emplace();
        for (std::size_t t = 0; t < n; ++t) seq.ground_truth_ids->push_back(tok(rng));
      }
    }
    seq.activations.resize(shape.layers);
    for (auto& routing : seq.activations) {
      std::vector<std::uint32_t> active;
      for (std::size_t t = 0; t < n; ++t) {
        active.clear();
        for (std::uint32_t e = 0; e < shape.experts; ++e) {
          if (unit(rng) < p) active.push_back(e);
        }
        routing.push_token(active);
      }
    }
    trace.sequences.push_back(std::move(seq));
  }
  return trace;
}

}  // namespace moelab::fixtures
