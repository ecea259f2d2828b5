// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "moelab/moelab.hpp"
#include "moelab/oracle.hpp"

namespace moelab::cli {
namespace {

enum class Format { Csv, Json };

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Format pick_format(const std::string& flag, const std::string& out) {
  if (flag == "json") return Format::Json;
  if (flag == "csv") return Format::Csv;
  return ends_with(out, ".json") ? Format::Json : Format::Csv;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  os << text;
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json meta(const std::string& model_id, json config) {
  return json{{"tool", "moelab"}, {"version", kToolVersion}, {"model_id", model_id}, {"config", std::move(config)}};
}

std::vector<std::uint32_t> normalized(std::vector<std::uint32_t> caps, const TraceHeader& header) {
  if (caps.empty()) return default_capacities(header);
  std::sort(caps.begin(), caps.end());
  caps.erase(std::unique(caps.begin(), caps.end()), caps.end());
  return caps;
}

std::vector<std::size_t> normalized(std::vector<std::size_t> ms) {
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  return ms;
}

ExpertKey parse_expert(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    return {static_cast<std::uint32_t>(std::stoul(s.substr(0, colon))),
            static_cast<std::uint32_t>(std::stoul(s.substr(colon + 1)))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--expert", "expected LAYER:INDEX, got \"" + s + "\"");
  }
}

// Shared option blocks ------------------------------------------------------

struct Io {
  std::string trace;
  std::string out;
  std::string format;
  unsigned threads = 0;
};

void add_trace(CLI::App* sub, Io& io) {
  sub->add_option("--trace", io.trace, "Input trace (.moet or .jsonl)")->required()->check(CLI::ExistingFile);
}

void add_output(CLI::App* sub, Io& io) {
  sub->add_option("--out", io.out, "Output file (default: stdout)");
  sub->add_option("--format", io.format, "csv or json (default: from --out extension, else csv)")
      ->check(CLI::IsMember({"csv", "json"}));
}

void add_threads(CLI::App* sub, Io& io) {
  sub->add_option("--threads", io.threads, "Worker threads (0: MOELAB_THREADS or all cores)");
}

struct SpecAccumulator {
  SpecAccumulator(const TraceHeader& header, std::size_t m) : segments(header, {m}), activity(header) {}
  void add(const Sequence& seq) {
    segments.add(seq);
    activity.add(seq);
  }
  void merge(const SpecAccumulator& other) {
    segments.merge(other.segments);
    activity.merge(other.activity);
  }
  SegmentCounter segments;
  ActivityCounter activity;
};

// Subcommands ---------------------------------------------------------------

int cmd_convert(const Io& io, std::ostream& out) {
  const auto trace = load_trace(io.trace);
  save_trace(io.out, trace);
  out << "wrote " << trace.sequences.size() << " sequences to " << io.out << "\n";
  return kExitOk;
}

int cmd_validate(const Io& io, std::ostream& out, std::ostream& err) {
  constexpr std::size_t kPrintLimit = 100;
  FileSource source(io.trace, false);
  const auto& header = source.header();
  auto violations = validate_header(header);
  std::uint64_t sequences = 0;
  std::uint64_t tokens = 0;
  if (violations.empty()) {
    Sequence seq;
    while (source.next(seq)) {
      validate_sequence(header, seq, static_cast<std::int64_t>(sequences), violations);
      ++sequences;
      tokens += seq.size();
    }
  }
  for (std::size_t i = 0; i < std::min(violations.size(), kPrintLimit); ++i) err << violations[i].describe() << "\n";
  if (violations.size() > kPrintLimit) err << "... " << violations.size() - kPrintLimit << " more\n";

  if (!io.out.empty()) {
    json list = json::array();
    for (const auto& v : violations) {
      list.push_back(json{{"kind", to_string(v.kind)},
                          {"sequence", v.sequence},
                          {"layer", v.layer},
                          {"token", v.token},
                          {"detail", v.detail}});
    }
    emit(dump(json{{"valid", violations.empty()},
                   {"num_sequences", sequences},
                   {"total_tokens", tokens},
                   {"violations", std::move(list)}}),
         io.out, out);
  }
  if (!violations.empty()) {
    err << violations.size() << " violation(s)\n";
    return kExitData;
  }
  out << "ok: " << sequences << " sequences, " << tokens << " tokens\n";
  return kExitOk;
}

int cmd_stats(const Io& io, std::ostream& out) {
  FileSource source(io.trace);
  const auto header = source.header();
  const auto counter = accumulate(source, io.threads, [&] { return StatsCounter(header); });
  emit(dump(stats_json(counter.report())), io.out, out);
  return kExitOk;
}

int cmd_srp(const Io& io, std::vector<std::size_t> ms, const std::string& scope, std::ostream& out) {
  ms = normalized(std::move(ms));
  std::vector<SrpRow> rows;
  std::string model_id;
  if (scope == "position") {
    const auto trace = load_trace(io.trace);
    model_id = trace.header.model_id;
    const auto experts = all_experts(trace.header);
    for (auto m : ms) {
      const auto pos = srp_per_position(trace, experts, m);
      for (std::size_t p = 0; p < pos.by_position.size(); ++p) {
        rows.push_back({"position", std::nullopt, std::nullopt, p, pos.by_position[p], std::nullopt, {}});
      }
    }
  } else {
    FileSource source(io.trace);
    const auto header = source.header();
    model_id = header.model_id;
    const auto counter = accumulate(source, io.threads, [&] { return SegmentCounter(header, ms); });
    const auto s = scope == "expert" ? SrpScope::Expert : scope == "layer" ? SrpScope::Layer : SrpScope::Model;
    rows = srp_rows(counter, header, s, ms);
  }
  if (pick_format(io.format, io.out) == Format::Json) {
    auto j = meta(model_id, json{{"m", ms}, {"scope", scope}});
    j["rows"] = srp_json(rows);
    emit(dump(j), io.out, out);
  } else {
    emit(srp_csv(rows), io.out, out);
  }
  return kExitOk;
}

int cmd_sch(const Io& io, std::size_t m, std::vector<std::uint32_t> caps, std::optional<std::uint32_t> layer,
            std::ostream& out) {
  FileSource source(io.trace);
  const auto header = source.header();
  if (layer && *layer >= header.num_layers()) {
    throw Error(ErrorCode::ExpertOutOfRange, "layer " + std::to_string(*layer) + " not in trace");
  }
  caps = normalized(std::move(caps), header);
  const auto counter = accumulate(source, io.threads, [&] { return CacheCounter(header, m); });
  std::vector<SweepResult> results;
  if (layer) {
    results.push_back(capacity_sweep(counter, *layer, caps));
  } else {
    results = sweeps(counter, caps);
  }
  if (pick_format(io.format, io.out) == Format::Json) {
    auto j = meta(header.model_id, json{{"m", m}, {"capacities", caps}});
    j["sweeps"] = sweep_json(results);
    emit(dump(j), io.out, out);
  } else {
    emit(sweep_csv(results), io.out, out);
  }
  return kExitOk;
}

SpecAccumulator count_spec(const Io& io, std::size_t m, TraceHeader& header) {
  FileSource source(io.trace);
  header = source.header();
  return accumulate(source, io.threads, [&] { return SpecAccumulator(header, m); });
}

int cmd_spec(const Io& io, std::size_t m, std::uint32_t min_support, std::ostream& out) {
  TraceHeader header;
  const auto acc = count_spec(io, m, header);
  const auto rows = spec_rows(acc.activity, acc.segments, m, min_support);
  if (pick_format(io.format, io.out) == Format::Json) {
    auto j = meta(header.model_id, json{{"m", m}, {"min_support", min_support}});
    j["experts"] = spec_json(rows, m);
    emit(dump(j), io.out, out);
  } else {
    emit(spec_csv(rows, m), io.out, out);
  }
  return kExitOk;
}

int cmd_corr(const Io& io, std::size_t m, std::uint32_t min_support, std::ostream& out) {
  TraceHeader header;
  const auto acc = count_spec(io, m, header);
  const auto rows = spec_rows(acc.activity, acc.segments, m, min_support);
  auto j = meta(header.model_id, json{{"m", m}, {"min_support", min_support}});
  j["correlation"] = correlation_summary(rows, m);
  emit(dump(j), io.out, out);
  return kExitOk;
}

int cmd_lb(const Io& io, std::ostream& out) {
  FileSource source(io.trace);
  const auto header = source.header();
  const auto counter = accumulate(source, io.threads, [&] { return ActivityCounter(header, false); });
  const auto lb = load_balance_sd(counter);
  if (pick_format(io.format, io.out) == Format::Json) {
    auto j = meta(header.model_id, json::object());
    j["load_balance"] = lb_json(lb);
    emit(dump(j), io.out, out);
  } else {
    emit(lb_csv(lb), io.out, out);
  }
  return kExitOk;
}

/// Generates in batches on worker threads and writes sequentially, so the
/// file is identical for every thread count.
template <typename Writer>
void write_generated(const TraceGenerator& gen, Writer& writer, unsigned threads) {
  constexpr std::size_t kBatch = 256;
  const auto total = gen.config().num_sequences;
  std::vector<Sequence> buffer(kBatch);
  for (std::uint64_t base = 0; base < total; base += kBatch) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(kBatch, total - base));
    parallel_chunks(n, threads, [&](unsigned, std::size_t begin, std::size_t end) {
      for (auto i = begin; i < end; ++i) buffer[i] = gen.sequence(base + i);
    });
    for (std::size_t i = 0; i < n; ++i) writer.write(buffer[i]);
  }
}

int cmd_synth(const Io& io, const GeneratorConfig& config, std::ostream& out) {
  const TraceGenerator gen(config);
  std::ofstream os(io.out, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + io.out + " for writing");
  const auto threads = resolve_threads(io.threads);
  if (is_jsonl_path(io.out)) {
    JsonlWriter writer(os, gen.header());
    write_generated(gen, writer, threads);
  } else {
    BinaryWriter writer(os, gen.header(), config.num_sequences);
    write_generated(gen, writer, threads);
  }
  os.flush();
  if (!os) throw Error(ErrorCode::Io, "write failed: " + io.out);
  out << "wrote " << config.num_sequences << " sequences to " << io.out << "\n";
  return kExitOk;
}

GeneratorConfig read_generator_config(const std::string& path, GeneratorConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return generator_config_from_json(j, std::move(base));
}

int cmd_report(const Io& io, const std::string& synth_config, ReportConfig config, std::ostream& out) {
  config.segment_lengths = normalized(std::move(config.segment_lengths));
  config.threads = io.threads;
  std::unique_ptr<SequenceSource> source;
  std::optional<TraceGenerator> gen;
  if (!synth_config.empty()) {
    gen.emplace(read_generator_config(synth_config));
    source = std::make_unique<GeneratorSource>(*gen);
  } else {
    source = std::make_unique<FileSource>(io.trace);
  }
  if (!config.capacities.empty()) config.capacities = normalized(std::move(config.capacities), source->header());
  const auto bundle = build_report(*source, config);

  const std::filesystem::path dir(io.out);
  std::filesystem::create_directories(dir);
  auto j = report_json(bundle);
  if (gen) j["generator"] = to_json(gen->config());
  const auto path = [&](const char* name) { return (dir / name).string(); };
  emit(dump(j), path("report.json"), out);
  emit(dump(stats_json(bundle.stats)), path("stats.json"), out);
  emit(srp_csv(bundle.srp_expert), path("srp_expert.csv"), out);
  emit(srp_csv(bundle.srp_layer), path("srp_layer.csv"), out);
  emit(srp_csv(bundle.srp_model), path("srp_model.csv"), out);
  emit(lb_csv(bundle.load_balance), path("lb.csv"), out);
  emit(spec_csv(bundle.specialization, bundle.config.spec_m), path("spec.csv"), out);
  emit(dump(bundle.correlation), path("corr.json"), out);
  emit(sweep_csv(bundle.sch), path("sch.csv"), out);
  out << "wrote report to " << dir.string() << "\n";
  return kExitOk;
}

struct OracleArgs {
  std::string mode = "srp";
  std::vector<std::string> experts;
  std::size_t m = 2;
  std::uint32_t layer = 0;
  std::uint32_t capacity = 1;
  double p = 0.125;
  std::size_t budget = 20;
};

int cmd_oracle(const Io& io, const OracleArgs& a, std::ostream& out) {
  json j;
  if (a.mode == "binomial") {
    j = json{{"p", a.p}, {"m", a.m}, {"srp", oracle::binomial_srp(a.p, a.m)}};
  } else if (io.trace.empty()) {
    throw CLI::RequiredError("--trace");
  } else if (a.mode == "cache") {
    const auto trace = load_trace(io.trace);
    const auto r = oracle::brute_force_cache(trace, a.layer, a.capacity, a.m);
    j = json{{"layer", a.layer}, {"capacity", a.capacity}, {"m", a.m},           {"hits", r.hits},
             {"total", r.total}, {"hit_rate", r.hit_rate}, {"no_activations", r.no_activations}};
  } else {
    const auto trace = load_trace(io.trace);
    std::vector<ExpertKey> keys;
    for (const auto& s : a.experts) keys.push_back(parse_expert(s));
    if (keys.empty()) keys = all_experts(trace.header);
    const auto r = oracle::brute_force_srp_enum(trace, keys, a.m, {a.budget});
    json witness = json::array();
    for (const auto& w : r.witness) {
      witness.push_back(json{{"layer", w.expert.layer},
                             {"expert", w.expert.index},
                             {"sequence", w.sequence},
                             {"start", w.start},
                             {"frequency", w.frequency},
                             {"active", w.active}});
    }
    j = json{{"m", a.m},
             {"undefined", r.undefined},
             {"best_num", r.best.num},
             {"best_den", r.best.den},
             {"best", r.undefined ? json(nullptr) : json(r.best.value())},
             {"threshold", oracle::witness_threshold(r, a.m)},
             {"witness", std::move(witness)}};
  }
  emit(dump(j), io.out, out);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSegmentLength:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Routing-trace analytics for mixture-of-experts models", "moelab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Io io;

  auto* convert = app.add_subcommand("convert", "Convert between .moet and .jsonl");
  add_trace(convert, io);
  convert->add_option("--out", io.out, "Output trace (.moet or .jsonl)")->required();

  auto* validate = app.add_subcommand("validate", "Check a trace and list every violation");
  add_trace(validate, io);
  validate->add_option("--out", io.out, "Write the violation list as JSON");

  auto* stats = app.add_subcommand("stats", "Corpus statistics (JSON)");
  add_trace(stats, io);
  stats->add_option("--out", io.out, "Output file (default: stdout)");
  add_threads(stats, io);

  std::vector<std::size_t> ms = default_segment_lengths();
  std::string scope = "model";
  auto* srp = app.add_subcommand("srp", "Segment routing best performance");
  add_trace(srp, io);
  add_output(srp, io);
  add_threads(srp, io);
  srp->add_option("--m", ms, "Segment lengths")->delimiter(',')->check(CLI::PositiveNumber)->capture_default_str();
  srp->add_option("--scope", scope, "expert, layer, model or position")
      ->check(CLI::IsMember({"expert", "layer", "model", "position"}))
      ->capture_default_str();

  std::size_t single_m = 16;
  std::vector<std::uint32_t> caps;
  std::optional<std::uint32_t> layer;
  auto* sch = app.add_subcommand("sch", "Segment cache best hit rate and LRU sweep");
  add_trace(sch, io);
  add_output(sch, io);
  add_threads(sch, io);
  sch->add_option("--m", single_m, "Segment length")->check(CLI::PositiveNumber)->capture_default_str();
  sch->add_option("--capacities", caps, "Capacities (default: 0, powers of two, all experts)")->delimiter(',');
  sch->add_option("--layer", layer, "Single layer (default: every layer plus the aggregate)");

  std::uint32_t min_support = kDefaultMinSupport;
  auto* spec = app.add_subcommand("spec", "Per-expert specialization table");
  add_trace(spec, io);
  add_output(spec, io);
  add_threads(spec, io);
  spec->add_option("--m", single_m, "Segment length of the SRP column")->check(CLI::PositiveNumber)->capture_default_str();
  spec->add_option("--min-support", min_support, "Minimum token occurrences for vocabulary scores")
      ->capture_default_str();

  auto* lb = app.add_subcommand("lb", "Load-balance standard deviation");
  add_trace(lb, io);
  add_output(lb, io);
  add_threads(lb, io);

  auto* corr = app.add_subcommand("corr", "Correlate specialization scores with per-expert SRP (JSON)");
  add_trace(corr, io);
  corr->add_option("--out", io.out, "Output file (default: stdout)");
  add_threads(corr, io);
  corr->add_option("--m", single_m, "Segment length of the SRP column")->check(CLI::PositiveNumber)->capture_default_str();
  corr->add_option("--min-support", min_support, "Minimum token occurrences for vocabulary scores")
      ->capture_default_str();

  GeneratorConfig gen_defaults;
  GeneratorConfig g = gen_defaults;
  std::string gen_kind = "iid";
  std::string config_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace");
  synth->add_option("--out", io.out, "Output trace (.moet or .jsonl)")->required();
  add_threads(synth, io);
  synth->add_option("--config", config_path, "JSON config; flags given explicitly override it")
      ->check(CLI::ExistingFile);
  auto* o_gen = synth->add_option("--gen", gen_kind, "iid, sticky or domain")
                    ->check(CLI::IsMember({"iid", "sticky", "domain"}));
  auto* o_seed = synth->add_option("--seed", g.seed);
  auto* o_layers = synth->add_option("--layers", g.num_layers);
  auto* o_experts = synth->add_option("--experts", g.experts_per_layer);
  auto* o_topk = synth->add_option("--topk", g.top_k);
  auto* o_seqs = synth->add_option("--seqs", g.num_sequences);
  auto* o_len = synth->add_option("--len", g.seq_len);
  auto* o_vocab = synth->add_option("--vocab", g.vocab_size);
  auto* o_model = synth->add_option("--model-id", g.model_id);
  auto* o_sigma = synth->add_option("--sigma", g.logit_skew, "SD of per-expert logits");
  auto* o_rho = synth->add_option("--rho", g.persistence, "Probability of reusing the previous token's experts");
  auto* o_beta = synth->add_option("--beta", g.domain_boost, "Home-domain logit boost");
  auto* o_domains = synth->add_option("--domains", g.domains, "Domain labels")->delimiter(',');
  auto* o_frac = synth->add_option("--specialist-fraction", g.specialist_fraction,
                                   "Fraction of experts with a home domain");

  ReportConfig rc;
  std::string synth_config;
  auto* report = app.add_subcommand("report", "Every table at once, written into --out");
  auto* r_trace = report->add_option("--trace", io.trace, "Input trace")->check(CLI::ExistingFile);
  auto* r_synth = report->add_option("--synth", synth_config, "Stream a generator config instead of a trace file")
                      ->check(CLI::ExistingFile);
  r_trace->excludes(r_synth);
  report->add_option("--out", io.out, "Output directory")->required();
  add_threads(report, io);
  report->add_option("--m", rc.segment_lengths, "Segment lengths")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  report->add_option("--spec-m", rc.spec_m, "Segment length of the specialization SRP column")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  report->add_option("--cache-m", rc.cache_m, "Segment length of the cache sweep")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  report->add_option("--capacities", rc.capacities, "Cache capacities")->delimiter(',');
  report->add_option("--min-support", rc.min_support, "Minimum token occurrences for vocabulary scores")
      ->capture_default_str();

  OracleArgs oa;
  auto* orc = app.add_subcommand("oracle", "Brute-force references (debugging)");
  orc->group("");
  orc->add_option("--trace", io.trace)->check(CLI::ExistingFile);
  orc->add_option("--out", io.out);
  orc->add_option("--mode", oa.mode)->check(CLI::IsMember({"srp", "cache", "binomial"}));
  orc->add_option("--expert", oa.experts, "LAYER:INDEX, repeatable");
  orc->add_option("--m", oa.m)->check(CLI::PositiveNumber);
  orc->add_option("--layer", oa.layer);
  orc->add_option("--capacity", oa.capacity);
  orc->add_option("--p", oa.p);
  orc->add_option("--budget", oa.budget);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (report->parsed() && io.trace.empty() && synth_config.empty()) {
      throw CLI::RequiredError("--trace or --synth");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (convert->parsed()) return cmd_convert(io, out);
    if (validate->parsed()) return cmd_validate(io, out, err);
    if (stats->parsed()) return cmd_stats(io, out);
    if (srp->parsed()) return cmd_srp(io, ms, scope, out);
    if (sch->parsed()) return cmd_sch(io, single_m, caps, layer, out);
    if (spec->parsed()) return cmd_spec(io, single_m, min_support, out);
    if (lb->parsed()) return cmd_lb(io, out);
    if (corr->parsed()) return cmd_corr(io, single_m, min_support, out);
    if (synth->parsed()) {
      GeneratorConfig config = config_path.empty() ? gen_defaults : read_generator_config(config_path);
      if (o_gen->count()) config.kind = generator_kind_from_string(gen_kind);
      if (o_seed->count()) config.seed = g.seed;
      if (o_layers->count()) config.num_layers = g.num_layers;
      if (o_experts->count()) config.experts_per_layer = g.experts_per_layer;
      if (o_topk->count()) config.top_k = g.top_k;
      if (o_seqs->count()) config.num_sequences = g.num_sequences;
      if (o_len->count()) config.seq_len = g.seq_len;
      if (o_vocab->count()) config.vocab_size = g.vocab_size;
      if (o_model->count()) config.model_id = g.model_id;
      if (o_sigma->count()) config.logit_skew = g.logit_skew;
      if (o_rho->count()) config.persistence = g.persistence;
      if (o_beta->count()) config.domain_boost = g.domain_boost;
      if (o_domains->count()) config.domains = g.domains;
      if (o_frac->count()) config.specialist_fraction = g.specialist_fraction;
      return cmd_synth(io, config, out);
    }
    if (report->parsed()) return cmd_report(io, synth_config, rc, out);
    if (orc->parsed()) return cmd_oracle(io, oa, out);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace moelab::cli
