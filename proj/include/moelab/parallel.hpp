// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "moelab/codec.hpp"
#include "moelab/trace.hpp"

namespace moelab {

/// 0 means "use MOELAB_THREADS, else the hardware concurrency".
inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MOELAB_THREADS"); env && *env) {
    try {
      const auto v = std::stoul(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(worker, begin, end) over [0, n) split into contiguous chunks.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    fn(0u, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const auto begin = std::min(n, w * chunk);
    const auto end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Feeds every sequence of an in-memory trace into per-worker accumulators
/// built by make(), then merges them. Accumulators hold integer counts, so
/// the result does not depend on the worker count.
template <typename Make>
auto accumulate(const RoutingTrace& trace, unsigned threads, Make&& make) {
  threads = resolve_threads(threads);
  using Acc = decltype(make());
  std::vector<Acc> parts;
  const auto workers = std::min<std::size_t>(threads, std::max<std::size_t>(trace.sequences.size(), 1));
  parts.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) parts.push_back(make());
  parallel_chunks(trace.sequences.size(), static_cast<unsigned>(workers),
                  [&](unsigned w, std::size_t begin, std::size_t end) {
                    for (auto i = begin; i < end; ++i) parts[w].add(trace.sequences[i]);
                  });
  for (std::size_t w = 1; w < parts.size(); ++w) parts[0].merge(parts[w]);
  return std::move(parts[0]);
}

/// Streaming variant: reads batches from the source so memory stays bounded
/// by batch size regardless of trace length.
template <typename Make>
auto accumulate(SequenceSource& source, unsigned threads, Make&& make, std::size_t batch = 256) {
  threads = resolve_threads(threads);
  using Acc = decltype(make());
  std::vector<Acc> parts;
  for (unsigned w = 0; w < threads; ++w) parts.push_back(make());
  std::vector<Sequence> buffer(batch);
  for (;;) {
    std::size_t filled = 0;
    while (filled < batch && source.next(buffer[filled])) ++filled;
    if (filled == 0) break;
    parallel_chunks(filled, threads, [&](unsigned w, std::size_t begin, std::size_t end) {
      for (auto i = begin; i < end; ++i) parts[w].add(buffer[i]);
    });
    if (filled < batch) break;
  }
  for (std::size_t w = 1; w < parts.size(); ++w) parts[0].merge(parts[w]);
  return std::move(parts[0]);
}

}  // namespace moelab
