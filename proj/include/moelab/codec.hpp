// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary (.moet) and JSONL codecs for routing traces.
//
// Binary layout, all integers little-endian:
//   "MOET" | version u16 | model_id (u16 len + UTF-8) | num_layers u32
//   | per layer: experts u32, top_k u16, stream_kind u8 | vocab_size u32
//   | num_sequences u64
//   | per sequence: domain (u16 len + UTF-8) | num_tokens u32 | flags u8
//       (bit0 predicted_ids, bit1 ground_truth_ids) | token_ids u32 x n
//       | [predicted_ids u32 x n] | [ground_truth_ids u32 x n]
//       | per layer, per token: count u8, expert indices u32 x count

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "moelab/error.hpp"
#include "moelab/trace.hpp"

namespace moelab {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline constexpr std::array<char, 4> kMagic{'M', 'O', 'E', 'T'};

class ByteSink {
 public:
  explicit ByteSink(std::ostream& os) : os_(os) {}

  void raw(const void* data, std::size_t n) { os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  template <typename T>
  void le(T value) {
    std::array<char, sizeof(T)> buf{};
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    raw(buf.data(), buf.size());
  }

  void u32_array(std::span<const std::uint32_t> values) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(values.data(), values.size() * sizeof(std::uint32_t));
    } else {
      for (auto v : values) le<std::uint32_t>(v);
    }
  }

  void str16(std::string_view s) {
    le<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    raw(s.data(), s.size());
  }

 private:
  std::ostream& os_;
};

/// Buffered little-endian reader; every short read is a Truncated error.
class ByteSource {
 public:
  explicit ByteSource(std::istream& is) : is_(is), buf_(1 << 20) {}

  std::size_t read_some(void* out, std::size_t n) {
    auto* dst = static_cast<char*>(out);
    std::size_t got = 0;
    while (got < n) {
      if (pos_ == end_ && !refill()) break;
      const auto take = std::min(n - got, end_ - pos_);
      std::memcpy(dst + got, buf_.data() + pos_, take);
      pos_ += take;
      got += take;
    }
    return got;
  }

  void read(void* out, std::size_t n, const char* what) {
    if (read_some(out, n) != n) {
      throw Error(ErrorCode::Truncated, std::string("unexpected end of input reading ") + what);
    }
  }

  template <typename T>
  T le(const char* what) {
    std::array<unsigned char, sizeof(T)> buf{};
    read(buf.data(), buf.size(), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    return value;
  }

  void u32_array(std::uint32_t* out, std::size_t n, const char* what) {
    read(out, n * sizeof(std::uint32_t), what);
    if constexpr (std::endian::native != std::endian::little) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = out[i];
        out[i] = (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
      }
    }
  }

  std::string str16(const char* what) {
    const auto len = le<std::uint16_t>(what);
    std::string s(len, '\0');
    read(s.data(), len, what);
    return s;
  }

  bool at_end() {
    return pos_ == end_ && !refill();
  }

 private:
  bool refill() {
    is_.read(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    pos_ = 0;
    end_ = static_cast<std::size_t>(is_.gcount());
    return end_ > 0;
  }

  std::istream& is_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

[[noreturn]] inline void throw_violation(const Violation& v) {
  throw Error(ErrorCode::InvariantViolation, v.describe());
}

}  // namespace detail

/// Pull-style access to a trace one sequence at a time. Lets the analytics
/// run over traces larger than memory.
class SequenceSource {
 public:
  virtual ~SequenceSource() = default;
  virtual const TraceHeader& header() const = 0;
  /// Fills `seq` and returns true, or returns false when exhausted.
  virtual bool next(Sequence& seq) = 0;
};

/// Iterates an in-memory trace.
class TraceSource final : public SequenceSource {
 public:
  explicit TraceSource(const RoutingTrace& trace) : trace_(trace) {}
  const TraceHeader& header() const override { return trace_.header; }
  bool next(Sequence& seq) override {
    if (pos_ >= trace_.sequences.size()) return false;
    seq = trace_.sequences[pos_++];
    return true;
  }

 private:
  const RoutingTrace& trace_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Binary

class BinaryWriter {
 public:
  BinaryWriter(std::ostream& os, const TraceHeader& header, std::uint64_t num_sequences)
      : sink_(os), header_(header) {
    sink_.raw(detail::kMagic.data(), detail::kMagic.size());
    sink_.le<std::uint16_t>(header.format_version);
    sink_.str16(header.model_id);
    sink_.le<std::uint32_t>(static_cast<std::uint32_t>(header.num_layers()));
    for (std::size_t l = 0; l < header.num_layers(); ++l) {
      sink_.le<std::uint32_t>(header.experts_per_layer[l]);
      sink_.le<std::uint16_t>(header.nominal_top_k[l]);
      sink_.le<std::uint8_t>(static_cast<std::uint8_t>(header.stream_kind[l]));
    }
    sink_.le<std::uint32_t>(header.vocab_size);
    sink_.le<std::uint64_t>(num_sequences);
  }

  void write(const Sequence& seq) {
    sink_.str16(seq.domain);
    const auto n = seq.token_ids.size();
    sink_.le<std::uint32_t>(static_cast<std::uint32_t>(n));
    std::uint8_t flags = 0;
    if (seq.predicted_ids) flags |= 1u;
    if (seq.ground_truth_ids) flags |= 2u;
    sink_.le<std::uint8_t>(flags);
    sink_.u32_array(seq.token_ids);
    if (seq.predicted_ids) sink_.u32_array(*seq.predicted_ids);
    if (seq.ground_truth_ids) sink_.u32_array(*seq.ground_truth_ids);
    for (const auto& routing : seq.activations) {
      for (std::size_t t = 0; t < n; ++t) {
        const auto active = routing.token(t);
        sink_.le<std::uint8_t>(static_cast<std::uint8_t>(active.size()));
        sink_.u32_array(active);
      }
    }
  }

 private:
  detail::ByteSink sink_;
  TraceHeader header_;
};

/// Reads the binary format incrementally, validating as it goes.
class BinaryReader final : public SequenceSource {
 public:
  /// With validating=false the caller is responsible for checking the
  /// header and every sequence (the validate command does this to list all
  /// violations instead of stopping at the first).
  explicit BinaryReader(std::istream& is, bool validating = true) : src_(is), validating_(validating) {
    std::array<char, 4> magic{};
    if (src_.read_some(magic.data(), magic.size()) != magic.size() || magic != detail::kMagic) {
      throw Error(ErrorCode::BadMagic, "input does not start with \"MOET\"");
    }
    header_.format_version = src_.le<std::uint16_t>("version");
    if (header_.format_version != kFormatVersion) {
      throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(header_.format_version));
    }
    header_.model_id = src_.str16("model_id");
    const auto layers = src_.le<std::uint32_t>("num_layers");
    for (std::uint32_t l = 0; l < layers; ++l) {
      header_.experts_per_layer.push_back(src_.le<std::uint32_t>("experts"));
      header_.nominal_top_k.push_back(src_.le<std::uint16_t>("top_k"));
      const auto kind = src_.le<std::uint8_t>("stream_kind");
      if (kind > 1) {
        throw Error(ErrorCode::InvariantViolation, "layer " + std::to_string(l) + ": unknown stream_kind");
      }
      header_.stream_kind.push_back(static_cast<StreamKind>(kind));
    }
    header_.vocab_size = src_.le<std::uint32_t>("vocab_size");
    remaining_ = src_.le<std::uint64_t>("num_sequences");
    num_sequences_ = remaining_;
    if (validating_) {
      if (auto v = validate_header(header_); !v.empty()) detail::throw_violation(v.front());
    }
  }

  const TraceHeader& header() const override { return header_; }
  std::uint64_t num_sequences() const noexcept { return num_sequences_; }

  bool next(Sequence& seq) override {
    if (remaining_ == 0) {
      if (!finished_) {
        finished_ = true;
        if (!src_.at_end()) throw Error(ErrorCode::TrailingBytes, "data after last sequence");
      }
      return false;
    }
    --remaining_;
    seq.domain = src_.str16("domain");
    const auto n = src_.le<std::uint32_t>("num_tokens");
    const auto flags = src_.le<std::uint8_t>("flags");
    seq.token_ids.resize(n);
    src_.u32_array(seq.token_ids.data(), n, "token_ids");
    seq.predicted_ids.reset();
    seq.ground_truth_ids.reset();
    if (flags & 1u) {
      seq.predicted_ids.emplace(n);
      src_.u32_array(seq.predicted_ids->data(), n, "predicted_ids");
    }
    if (flags & 2u) {
      seq.ground_truth_ids.emplace(n);
      src_.u32_array(seq.ground_truth_ids->data(), n, "ground_truth_ids");
    }
    seq.activations.assign(header_.num_layers(), LayerRouting{});
    std::array<std::uint32_t, 256> active{};
    for (auto& routing : seq.activations) {
      routing.reserve(n, n * 8);
      for (std::uint32_t t = 0; t < n; ++t) {
        const auto count = src_.le<std::uint8_t>("activation count");
        src_.u32_array(active.data(), count, "expert indices");
        routing.push_token(std::span<const std::uint32_t>(active.data(), count));
      }
    }
    if (!validating_) return true;
    std::vector<Violation> v;
    validate_sequence(header_, seq, static_cast<std::int64_t>(num_sequences_ - remaining_ - 1), v);
    if (!v.empty()) detail::throw_violation(v.front());
    return true;
  }

 private:
  detail::ByteSource src_;
  TraceHeader header_;
  std::uint64_t remaining_ = 0;
  std::uint64_t num_sequences_ = 0;
  bool finished_ = false;
  bool validating_ = true;
};

inline void write_binary(std::ostream& os, const RoutingTrace& trace) {
  BinaryWriter writer(os, trace.header, trace.sequences.size());
  for (const auto& seq : trace.sequences) writer.write(seq);
}

inline Bytes encode_binary(const RoutingTrace& trace) {
  std::ostringstream os(std::ios::binary);
  write_binary(os, trace);
  const auto s = std::move(os).str();
  return Bytes(s.begin(), s.end());
}

inline RoutingTrace read_binary(std::istream& is) {
  BinaryReader reader(is);
  RoutingTrace trace;
  trace.header = reader.header();
  Sequence seq;
  while (reader.next(seq)) trace.sequences.push_back(std::move(seq));
  return trace;
}

inline RoutingTrace decode_binary(std::span<const std::uint8_t> bytes) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_binary(is);
}

// ---------------------------------------------------------------------------
// JSONL

namespace detail {

using nlohmann::json;

inline json header_to_json(const TraceHeader& h) {
  json kinds = json::array();
  for (auto k : h.stream_kind) kinds.push_back(to_string(k));
  return json{{"format_version", h.format_version},
              {"model_id", h.model_id},
              {"num_layers", h.num_layers()},
              {"experts_per_layer", h.experts_per_layer},
              {"nominal_top_k", h.nominal_top_k},
              {"stream_kind", kinds},
              {"vocab_size", h.vocab_size}};
}

inline json sequence_to_json(const Sequence& seq) {
  json j{{"domain", seq.domain}, {"tokens", seq.token_ids}};
  if (seq.predicted_ids) j["pred"] = *seq.predicted_ids;
  if (seq.ground_truth_ids) j["truth"] = *seq.ground_truth_ids;
  json acts = json::array();
  for (const auto& routing : seq.activations) {
    json layer = json::array();
    for (std::size_t t = 0; t < routing.num_tokens(); ++t) {
      const auto a = routing.token(t);
      layer.push_back(std::vector<std::uint32_t>(a.begin(), a.end()));
    }
    acts.push_back(std::move(layer));
  }
  j["acts"] = std::move(acts);
  return j;
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline TraceHeader header_from_json(const json& j, std::size_t line, bool validating = true) {
  try {
    TraceHeader h;
    h.format_version = j.value("format_version", kFormatVersion);
    if (h.format_version != kFormatVersion) {
      throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(h.format_version));
    }
    h.model_id = j.value("model_id", std::string{});
    h.experts_per_layer = j.at("experts_per_layer").get<std::vector<std::uint32_t>>();
    const auto layers = j.value("num_layers", h.experts_per_layer.size());
    h.nominal_top_k = j.contains("nominal_top_k")
                          ? j.at("nominal_top_k").get<std::vector<std::uint16_t>>()
                          : std::vector<std::uint16_t>(layers, 0);
    if (j.contains("stream_kind")) {
      for (const auto& k : j.at("stream_kind")) {
        const auto name = k.get<std::string>();
        if (name == "decoder") h.stream_kind.push_back(StreamKind::Decoder);
        else if (name == "encoder") h.stream_kind.push_back(StreamKind::Encoder);
        else parse_fail(line, "unknown stream_kind \"" + name + "\"");
      }
    } else {
      h.stream_kind.assign(layers, StreamKind::Decoder);
    }
    h.vocab_size = j.value("vocab_size", std::uint32_t{0});
    if (layers != h.experts_per_layer.size()) {
      throw Error(ErrorCode::InvariantViolation, "num_layers disagrees with experts_per_layer");
    }
    if (validating) {
      if (auto v = validate_header(h); !v.empty()) throw_violation(v.front());
    }
    return h;
  } catch (const json::exception& e) {
    parse_fail(line, e.what());
  }
}

inline Sequence sequence_from_json(const json& j, std::size_t line) {
  try {
    Sequence seq;
    seq.domain = j.value("domain", std::string("unknown"));
    seq.token_ids = j.at("tokens").get<std::vector<std::uint32_t>>();
    if (j.contains("pred")) seq.predicted_ids = j.at("pred").get<std::vector<std::uint32_t>>();
    if (j.contains("truth")) seq.ground_truth_ids = j.at("truth").get<std::vector<std::uint32_t>>();
    std::vector<std::uint32_t> active;
    for (const auto& layer : j.at("acts")) {
      LayerRouting routing;
      for (const auto& token : layer) {
        active = token.get<std::vector<std::uint32_t>>();
        routing.push_token(active);
      }
      seq.activations.push_back(std::move(routing));
    }
    return seq;
  } catch (const json::exception& e) {
    parse_fail(line, e.what());
  }
}

}  // namespace detail

class JsonlReader final : public SequenceSource {
 public:
  explicit JsonlReader(std::istream& is, bool validating = true) : is_(is), validating_(validating) {
    std::string text;
    if (!next_line(text)) detail::parse_fail(1, "missing header line");
    detail::json j;
    try {
      j = detail::json::parse(text);
    } catch (const detail::json::exception& e) {
      detail::parse_fail(line_, e.what());
    }
    header_ = detail::header_from_json(j, line_, validating_);
  }

  const TraceHeader& header() const override { return header_; }

  bool next(Sequence& seq) override {
    std::string text;
    if (!next_line(text)) return false;
    detail::json j;
    try {
      j = detail::json::parse(text);
    } catch (const detail::json::exception& e) {
      detail::parse_fail(line_, e.what());
    }
    seq = detail::sequence_from_json(j, line_);
    if (!validating_) return true;
    std::vector<Violation> v;
    validate_sequence(header_, seq, index_++, v);
    if (!v.empty()) {
      throw Error(ErrorCode::InvariantViolation,
                  "line " + std::to_string(line_) + ": " + v.front().describe());
    }
    return true;
  }

 private:
  bool next_line(std::string& out) {
    while (std::getline(is_, out)) {
      ++line_;
      if (out.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  std::istream& is_;
  TraceHeader header_;
  std::size_t line_ = 0;
  std::int64_t index_ = 0;
  bool validating_ = true;
};

class JsonlWriter {
 public:
  JsonlWriter(std::ostream& os, const TraceHeader& header) : os_(os) {
    os_ << detail::header_to_json(header).dump() << '\n';
  }
  void write(const Sequence& seq) { os_ << detail::sequence_to_json(seq).dump() << '\n'; }

 private:
  std::ostream& os_;
};

inline void write_jsonl(std::ostream& os, const RoutingTrace& trace) {
  JsonlWriter writer(os, trace.header);
  for (const auto& seq : trace.sequences) writer.write(seq);
}

inline std::string dump_jsonl(const RoutingTrace& trace) {
  std::ostringstream os;
  write_jsonl(os, trace);
  return std::move(os).str();
}

inline RoutingTrace load_jsonl(std::string_view text) {
  std::istringstream is{std::string(text)};
  JsonlReader reader(is);
  RoutingTrace trace;
  trace.header = reader.header();
  Sequence seq;
  while (reader.next(seq)) trace.sequences.push_back(std::move(seq));
  return trace;
}

// ---------------------------------------------------------------------------
// Files

inline bool is_jsonl_path(std::string_view path) {
  return path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
}

/// Owns the stream behind a file-backed SequenceSource.
class FileSource final : public SequenceSource {
 public:
  explicit FileSource(const std::string& path, bool validating = true)
      : file_(std::make_unique<std::ifstream>(path, std::ios::binary)) {
    if (!*file_) throw Error(ErrorCode::Io, "cannot open " + path);
    if (is_jsonl_path(path)) {
      inner_ = std::make_unique<JsonlReader>(*file_, validating);
    } else {
      inner_ = std::make_unique<BinaryReader>(*file_, validating);
    }
  }

  const TraceHeader& header() const override { return inner_->header(); }
  bool next(Sequence& seq) override { return inner_->next(seq); }

 private:
  std::unique_ptr<std::ifstream> file_;
  std::unique_ptr<SequenceSource> inner_;
};

inline RoutingTrace load_trace(const std::string& path) {
  FileSource source(path);
  RoutingTrace trace;
  trace.header = source.header();
  Sequence seq;
  while (source.next(seq)) trace.sequences.push_back(std::move(seq));
  return trace;
}

inline void save_trace(const std::string& path, const RoutingTrace& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  if (is_jsonl_path(path)) write_jsonl(os, trace);
  else write_binary(os, trace);
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
}

}  // namespace moelab
