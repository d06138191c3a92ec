// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0
//
// toxred: red-team evaluation pipeline for Chinese toxicity detectors.
// Subcommands cover corpus construction (ingest/synthesize/filter/split),
// variant rewriting, detector runs, the evaluation tables, and the toy
// GRPO simulator. Exit codes: 0 ok, 1 usage, 2 runtime, 3 configuration.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "toxred/corpus.hpp"
#include "toxred/evaluation.hpp"
#include "toxred/gateway.hpp"
#include "toxred/grpo.hpp"
#include "toxred/jsonl.hpp"
#include "toxred/obfuscation.hpp"
#include "toxred/rng.hpp"
#include "toxred/unicode.hpp"

namespace {

using nlohmann::json;
using toxred::Error;
using toxred::ErrorKind;
namespace corpus = toxred::corpus;
namespace eval = toxred::eval;
namespace gateway = toxred::gateway;
namespace grpo = toxred::grpo;
namespace obf = toxred::obf;

struct GlobalOptions {
  bool offline = false;
  std::string config_path;
  json config = json::object();
};

json config_section(const GlobalOptions& global, const std::string& key) {
  if (global.config.contains(key)) return global.config.at(key);
  return json::object();
}

std::string config_str(const GlobalOptions& global, const std::string& key) {
  if (global.config.contains(key) && global.config.at(key).is_string()) {
    return global.config.at(key).get<std::string>();
  }
  return {};
}

// Flags override the run configuration file.
std::string pick(const std::string& flag_value, const GlobalOptions& global,
                 const std::string& config_key) {
  return flag_value.empty() ? config_str(global, config_key) : flag_value;
}

std::string require_value(std::string value, const std::string& what) {
  if (value.empty()) {
    toxred::raise(ErrorKind::kConfig,
                  what + " is required (flag or config key)");
  }
  return value;
}

std::string rfc3339_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&now));
  return buf;
}

void require_online(const GlobalOptions& global, const std::string& what) {
  if (global.offline) {
    toxred::raise(ErrorKind::kConfig,
                  what + " needs a network but --offline is set");
  }
}

gateway::ChatEndpoint chat_endpoint_from_json(const json& doc) {
  gateway::ChatEndpoint endpoint;
  endpoint.base_url = doc.value("base_url", std::string());
  endpoint.chat_path = doc.value("chat_path", std::string("/v1/chat/completions"));
  endpoint.model_name = doc.value("model_name", std::string());
  endpoint.credential_env = doc.value("credential_env", std::string());
  endpoint.temperature = doc.value("temperature", 0.0);
  if (doc.contains("retry")) {
    endpoint.retry.max_attempts = doc.at("retry").value("max_attempts", 3);
    if (doc.at("retry").contains("backoff_ms")) {
      endpoint.retry.backoff_ms =
          doc.at("retry").at("backoff_ms").get<std::vector<int>>();
    }
  }
  return endpoint;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) toxred::raise(ErrorKind::kIo, "cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    toxred::raise(ErrorKind::kFormat, path.string() + ": invalid JSON");
  }
  return doc;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) toxred::raise(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_commas(const std::string& joined) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (begin <= joined.size()) {
    const std::size_t comma = joined.find(',', begin);
    const std::string part = joined.substr(
        begin, comma == std::string::npos ? std::string::npos : comma - begin);
    if (!part.empty()) parts.push_back(part);
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return parts;
}

std::map<std::string, gateway::DetectorSpec> load_specs_by_id(
    const std::filesystem::path& path) {
  std::map<std::string, gateway::DetectorSpec> by_id;
  for (gateway::DetectorSpec& spec : gateway::load_detector_config(path)) {
    by_id.emplace(spec.id, std::move(spec));
  }
  return by_id;
}

// Offline runs may only touch the specs that need no network; merely
// declaring remote detectors in the config file is fine.
void check_offline_spec(const GlobalOptions& global,
                        const gateway::DetectorSpec& spec) {
  if (global.offline && spec.backend != gateway::Backend::LEXICON_MOCK) {
    toxred::raise(ErrorKind::kConfig,
                  "detector '" + spec.id +
                      "' uses a network backend but --offline is set");
  }
}

const gateway::DetectorSpec& spec_or_die(
    const std::map<std::string, gateway::DetectorSpec>& specs,
    const std::string& id) {
  auto it = specs.find(id);
  if (it == specs.end()) {
    toxred::raise(ErrorKind::kConfig, "no detector spec with id '" + id + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// corpus pipeline commands

struct IngestArgs {
  std::string input;
  std::string source = "OTHER";
  std::string out_posts;
  std::string manifest;
  bool append = false;
  corpus::IngestOptions fields;
};

void run_ingest(const IngestArgs& args) {
  const corpus::Source source = corpus::source_from_string(args.source);
  const corpus::IngestResult result =
      corpus::ingest_posts(args.input, source, args.fields);

  std::vector<json> rows;
  if (args.append && std::filesystem::exists(args.out_posts)) {
    rows = toxred::jsonl::read_file(args.out_posts);
  }
  std::set<std::string> existing_ids;
  for (const json& row : rows) {
    existing_ids.insert(row.at("id").get<std::string>());
  }
  for (const corpus::ToxicPost& post : result.posts) {
    if (!existing_ids.insert(post.id).second) {
      toxred::raise(ErrorKind::kFormat,
                    "post id '" + post.id + "' already present in " +
                        args.out_posts);
    }
    rows.push_back(corpus::post_to_json(post));
  }
  toxred::jsonl::write_file(args.out_posts, rows);

  if (!args.manifest.empty()) {
    corpus::CorpusManifest manifest;
    if (std::filesystem::exists(args.manifest)) {
      manifest = corpus::CorpusManifest::load(args.manifest);
    }
    manifest.per_source[corpus::to_string(source)].candidate_count +=
        static_cast<long long>(result.posts.size());
    manifest.save(args.manifest);
  }
  json summary{{"posts", result.posts.size()},
               {"dropped_empty", result.dropped_empty},
               {"source", corpus::to_string(source)}};
  std::cout << summary.dump() << '\n';
}

struct SynthesizeArgs {
  std::string input;
  std::string output;
  std::string endpoint_config;
  int max_parallel = 4;
};

void run_synthesize(const SynthesizeArgs& args, const GlobalOptions& global) {
  corpus::SynthesisConfig config;
  if (!args.endpoint_config.empty()) {
    const json doc = load_json_file(args.endpoint_config);
    const std::string kind = doc.value("kind", std::string("http"));
    if (kind == "mock") {
      config.kind = corpus::SynthesisConfig::Kind::MOCK;
    } else if (kind == "http") {
      config.kind = corpus::SynthesisConfig::Kind::HTTP;
      config.endpoint = chat_endpoint_from_json(doc);
    } else {
      toxred::raise(ErrorKind::kConfig, "endpoint kind must be http or mock");
    }
  }
  if (config.kind == corpus::SynthesisConfig::Kind::HTTP) {
    require_online(global, "context synthesis over HTTP");
  }
  config.max_parallel = std::max(1, args.max_parallel);

  std::vector<corpus::ToxicPost> posts;
  for (const json& row : toxred::jsonl::read_file(args.input)) {
    posts.push_back(corpus::post_from_json(row));
  }
  std::shared_ptr<gateway::Transport> transport;
  if (config.kind == corpus::SynthesisConfig::Kind::HTTP) {
    transport = gateway::make_http_transport();
  }

  std::vector<json> out_rows(posts.size());
  std::vector<std::string> errors(posts.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(config.max_parallel), posts.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(workers, 1); ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= posts.size()) return;
        try {
          out_rows[i] = corpus::pair_to_json(
              corpus::synthesize_context(posts[i], config, transport.get()));
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();

  long long failed = 0;
  std::vector<json> rows;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      continue;
    }
    rows.push_back(std::move(out_rows[i]));
  }
  if (failed > 0) {
    toxred::raise(ErrorKind::kEndpoint,
                  std::to_string(failed) + " of " + std::to_string(posts.size()) +
                      " posts failed context synthesis (first error: " +
                      [&] {
                        for (const std::string& e : errors) {
                          if (!e.empty()) return e;
                        }
                        return std::string();
                      }() +
                      ")");
  }
  toxred::jsonl::write_file(args.output, rows);
  std::cout << json{{"pairs", rows.size()}}.dump() << '\n';
}

struct FilterArgs {
  std::string input;
  std::string output;
  std::string judge_config;
};

void run_filter(const FilterArgs& args, const GlobalOptions& global) {
  std::vector<corpus::ContextResponsePair> pairs;
  for (const json& row : toxred::jsonl::read_file(args.input)) {
    pairs.push_back(corpus::pair_from_json(row));
  }
  std::optional<corpus::JudgeConfig> judge;
  std::shared_ptr<gateway::Transport> transport;
  if (!args.judge_config.empty()) {
    require_online(global, "judge-backed filtering");
    judge = corpus::JudgeConfig{chat_endpoint_from_json(load_json_file(args.judge_config))};
    transport = gateway::make_http_transport();
  }
  const corpus::FilterResult result = corpus::filter_pairs(
      pairs, judge ? &*judge : nullptr, transport.get());

  std::vector<json> rows;
  rows.reserve(result.pairs.size());
  for (const corpus::ContextResponsePair& pair : result.pairs) {
    rows.push_back(corpus::pair_to_json(pair));
  }
  toxred::jsonl::write_file(args.output, rows);

  json rejected = json::object();
  for (const auto& [status, count] : result.rejected) {
    rejected[corpus::to_string(status)] = count;
  }
  json summary{{"kept", result.kept},
               {"rejected", rejected},
               {"pending", result.pending_pair_ids}};
  std::cout << summary.dump() << '\n';
}

struct SplitArgs {
  std::string input;
  std::string posts;
  std::string manifest;
  double eval_fraction = 0.1;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& args) {
  std::vector<corpus::ContextResponsePair> kept;
  for (const json& row : toxred::jsonl::read_file(args.input)) {
    corpus::ContextResponsePair pair = corpus::pair_from_json(row);
    if (pair.filter_status == corpus::FilterStatus::KEPT) {
      kept.push_back(std::move(pair));
    }
  }
  std::optional<std::map<std::string, corpus::Source>> sources;
  if (!args.posts.empty()) {
    sources.emplace();
    for (const json& row : toxred::jsonl::read_file(args.posts)) {
      const corpus::ToxicPost post = corpus::post_from_json(row);
      (*sources)[post.id] = post.source;
    }
  }
  corpus::CorpusManifest manifest = corpus::split_corpus(
      kept, args.eval_fraction, args.seed, sources ? &*sources : nullptr);

  if (std::filesystem::exists(args.manifest)) {
    // Preserve ingest-time candidate counts.
    const corpus::CorpusManifest existing =
        corpus::CorpusManifest::load(args.manifest);
    for (auto& [name, counts] : manifest.per_source) {
      auto it = existing.per_source.find(name);
      if (it != existing.per_source.end()) {
        counts.candidate_count = it->second.candidate_count;
      }
    }
    manifest.validate();
  }
  manifest.save(args.manifest);
  std::cout << json{{"train", manifest.train_count()},
                    {"eval", manifest.eval_count()}}
                   .dump()
            << '\n';
}

// ---------------------------------------------------------------------------
// rewriting and detector commands

struct RewriteArgs {
  std::string input;
  std::string output;
  std::string tables;
  std::string posts;
  std::uint64_t seed = 0;
  int max_edits = 3;
  bool emit_base = false;
  std::string base_stage = "HIL";
};

// Accepts either the pair schema (KEPT responses become base texts) or the
// sample schema; emits one CITA sample per variant kind.
void run_rewrite(RewriteArgs args, const GlobalOptions& global) {
  args.tables = require_value(pick(args.tables, global, "tables"), "--tables");
  const obf::RuleTableSet tables = obf::RuleTableSet::load_tsv(args.tables);
  const obf::RewriteOptions options{.max_edits = args.max_edits};

  std::map<std::string, std::optional<eval::Category>> categories;
  if (!args.posts.empty()) {
    for (const json& row : toxred::jsonl::read_file(args.posts)) {
      const corpus::ToxicPost post = corpus::post_from_json(row);
      categories[post.id] = post.category;
    }
  }

  struct BaseText {
    std::string id;
    std::string text;
    std::optional<eval::Category> category;
  };
  std::vector<BaseText> bases;
  const std::vector<json> rows = toxred::jsonl::read_file(args.input);
  if (rows.empty()) {
    toxred::raise(ErrorKind::kFormat, args.input + ": no rows");
  }
  const bool is_pairs = rows.front().contains("response") &&
                        rows.front().contains("pair_id");
  for (const json& row : rows) {
    if (is_pairs) {
      const corpus::ContextResponsePair pair = corpus::pair_from_json(row);
      if (pair.filter_status != corpus::FilterStatus::KEPT) continue;
      BaseText base{pair.pair_id, pair.response, std::nullopt};
      auto it = categories.find(pair.source_post_id);
      if (it != categories.end()) base.category = it->second;
      bases.push_back(std::move(base));
    } else {
      const eval::Sample sample = eval::sample_from_json(row);
      bases.push_back({sample.sample_id, sample.text, sample.category});
    }
  }
  if (bases.empty()) {
    toxred::raise(ErrorKind::kFormat, args.input + ": nothing to rewrite");
  }

  const eval::Stage base_stage = eval::stage_from_string(args.base_stage);
  std::vector<json> out_rows;
  for (const BaseText& base : bases) {
    if (args.emit_base) {
      eval::Sample sample;
      sample.sample_id = base.id;
      sample.text = base.text;
      sample.stage = base_stage;
      sample.category = base.category;
      out_rows.push_back(eval::sample_to_json(sample));
    }
    const std::uint64_t text_seed =
        toxred::rng::mix(toxred::rng::splitmix64(args.seed),
                         toxred::rng::hash_bytes(base.id));
    for (const obf::RewriteOutcome& outcome :
         obf::generate_variant_set(base.text, tables, text_seed, options)) {
      eval::Sample sample;
      sample.sample_id = base.id + "#" + obf::to_string(outcome.kind);
      sample.text = outcome.variant;
      sample.stage = eval::Stage::CITA;
      sample.variant_kind = outcome.kind;
      sample.category = base.category;
      out_rows.push_back(eval::sample_to_json(sample));
    }
  }
  toxred::jsonl::write_file(args.output, out_rows);
  std::cout << json{{"samples", out_rows.size()}}.dump() << '\n';
}

struct DetectArgs {
  std::string input;
  std::string output;
  std::string detector_config;
  std::string ids;       // comma-joined; empty = all specs
  std::string judge_id;  // attach j_tox when set
  std::string cache;
  bool judge_only = false;
};

void run_detect(DetectArgs args, const GlobalOptions& global) {
  args.detector_config = require_value(
      pick(args.detector_config, global, "detector_config"), "--detector-config");
  args.judge_id = pick(args.judge_id, global, "j_tox_id");
  args.cache = pick(args.cache, global, "cache");
  if (args.judge_only && args.judge_id.empty()) {
    toxred::raise(ErrorKind::kConfig, "judge needs --judge-id or config j_tox_id");
  }
  const std::map<std::string, gateway::DetectorSpec> specs =
      load_specs_by_id(args.detector_config);
  std::vector<std::string> detector_ids = split_commas(args.ids);
  if (detector_ids.empty() && !args.judge_only) {
    for (const auto& [id, spec] : specs) {
      if (id != args.judge_id) detector_ids.push_back(id);
    }
  }
  for (const std::string& id : detector_ids) {
    check_offline_spec(global, spec_or_die(specs, id));
  }
  if (!args.judge_id.empty()) {
    check_offline_spec(global, spec_or_die(specs, args.judge_id));
    gateway::RoleConfig roles{.f_adv_id = config_str(global, "f_adv_id"),
                              .j_tox_id = args.judge_id,
                              .evaluated_ids = detector_ids};
    roles.validate();
  }

  std::shared_ptr<gateway::VerdictCache> cache;
  if (!args.cache.empty()) {
    cache = std::make_shared<gateway::VerdictCache>(args.cache);
  }
  bool needs_network = false;
  for (const std::string& id : detector_ids) {
    if (spec_or_die(specs, id).backend != gateway::Backend::LEXICON_MOCK) {
      needs_network = true;
    }
  }
  if (!args.judge_id.empty() &&
      spec_or_die(specs, args.judge_id).backend != gateway::Backend::LEXICON_MOCK) {
    needs_network = true;
  }
  // Mock-only runs never touch the transport; a refusing stand-in keeps that
  // guarantee checkable.
  class NullTransport : public gateway::Transport {
    gateway::HttpResponse post(const std::string&, const gateway::Headers&,
                               const std::string&) override {
      toxred::raise(ErrorKind::kConfig, "network use in a mock-only run");
    }
  };
  std::shared_ptr<gateway::Transport> transport;
  if (needs_network) {
    transport = gateway::make_http_transport();
  } else {
    transport = std::make_shared<NullTransport>();
  }
  gateway::Gateway gw(transport, cache);

  const std::vector<json> rows = toxred::jsonl::read_file(args.input);
  if (rows.empty()) {
    toxred::raise(ErrorKind::kFormat, args.input + ": no rows");
  }
  const bool labeled_schema =
      rows.front().contains("gold") && !rows.front().contains("sample_id");

  std::vector<std::string> texts;
  std::vector<json> out_rows = rows;
  texts.reserve(rows.size());
  for (const json& row : rows) {
    texts.push_back(row.at("text").get<std::string>());
  }

  const auto attach = [&](const std::string& id, bool as_judge) {
    const gateway::DetectorSpec& spec = spec_or_die(specs, id);
    const std::vector<gateway::BatchItem> items = gw.classify_batch(texts, spec);
    std::vector<std::string> item_errors;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i].ok()) {
        item_errors.push_back(std::to_string(i) + ": " + items[i].error);
        continue;
      }
      json verdict{{"label", gateway::to_string(items[i].verdict->label)},
                   {"detector_id", items[i].verdict->detector_id},
                   {"raw", items[i].verdict->raw},
                   {"cached", items[i].verdict->cached},
                   {"latency_ms", items[i].verdict->latency_ms}};
      if (as_judge) {
        out_rows[i]["j_tox"] = std::move(verdict);
      } else if (labeled_schema) {
        out_rows[i]["verdicts"][id] = std::move(verdict);
      } else {
        out_rows[i]["detector_verdicts"][id] = std::move(verdict);
      }
    }
    if (!item_errors.empty()) {
      toxred::raise(ErrorKind::kEndpoint,
                    "detector '" + id + "': " +
                        std::to_string(item_errors.size()) +
                        " items failed (first: " + item_errors.front() + ")");
    }
  };

  for (const std::string& id : detector_ids) attach(id, false);
  if (!args.judge_id.empty()) attach(args.judge_id, true);

  toxred::jsonl::write_file(args.output, out_rows);
  std::cout << json{{"rows", out_rows.size()},
                    {"detectors", detector_ids},
                    {"judge", args.judge_id}}
                   .dump()
            << '\n';
}

// ---------------------------------------------------------------------------
// evaluation commands

std::vector<eval::Sample> load_samples(const std::string& path) {
  std::vector<eval::Sample> samples;
  for (const json& row : toxred::jsonl::read_file(path)) {
    samples.push_back(eval::sample_from_json(row));
  }
  if (samples.empty()) {
    toxred::raise(ErrorKind::kFormat, path + ": no samples");
  }
  return samples;
}

void enforce_judge_id(const std::vector<eval::Sample>& samples,
                      const std::string& judge_id,
                      const std::vector<std::string>& detector_ids,
                      const GlobalOptions& global) {
  gateway::RoleConfig roles{.f_adv_id = config_str(global, "f_adv_id"),
                            .j_tox_id = judge_id,
                            .evaluated_ids = detector_ids};
  roles.validate();
  for (const eval::Sample& sample : samples) {
    if (sample.j_tox && sample.j_tox->detector_id != judge_id) {
      toxred::raise(ErrorKind::kConfig,
                    "sample '" + sample.sample_id +
                        "' carries a judge verdict from '" +
                        sample.j_tox->detector_id + "', expected '" + judge_id +
                        "'");
    }
  }
}

struct EvalArgs {
  std::string input;
  std::string output;       // empty = stdout
  std::string detectors;    // comma-joined detector ids
  std::string judge_id;
  std::string format = "json";
  std::string metric = "ordinal";  // eval-agreement only
  std::string detector_id;         // eval-defense only
  bool stamp = false;              // add a wall-clock timestamp to metadata
};

void emit(const EvalArgs& args, eval::EvalReport report,
          const GlobalOptions& global) {
  report.metadata["judge_id"] = args.judge_id;
  report.metadata["detectors"] = split_commas(args.detectors);
  const json rewards_cfg = config_section(global, "reward_weights");
  if (!rewards_cfg.empty()) report.metadata["reward_weights"] = rewards_cfg;
  if (global.config.contains("seed")) {
    report.metadata["seed"] = global.config.at("seed");
  }
  if (args.stamp) {
    report.metadata["timestamp"] = rfc3339_now();
  }
  const std::string text = eval::emit_report(
      report, eval::report_format_from_string(args.format));
  if (args.output.empty()) {
    std::cout << text;
  } else {
    write_text_file(args.output, text);
  }
}

void run_eval_asr(EvalArgs args, const GlobalOptions& global) {
  args.judge_id = pick(args.judge_id, global, "j_tox_id");
  const std::vector<eval::Sample> samples = load_samples(args.input);
  const std::vector<std::string> detector_ids = split_commas(args.detectors);
  if (!args.judge_id.empty()) {
    enforce_judge_id(samples, args.judge_id, detector_ids, global);
  }
  eval::EvalReport report = eval::stage_asr_table(samples, detector_ids);
  report.metadata["samples"] = samples.size();
  emit(args, std::move(report), global);
}

void run_eval_variants(EvalArgs args, const GlobalOptions& global) {
  args.judge_id = pick(args.judge_id, global, "j_tox_id");
  std::vector<eval::Sample> all = load_samples(args.input);
  std::vector<eval::Sample> cita;
  for (eval::Sample& sample : all) {
    if (sample.stage == eval::Stage::CITA) cita.push_back(std::move(sample));
  }
  const std::vector<std::string> detector_ids = split_commas(args.detectors);
  if (!args.judge_id.empty()) {
    enforce_judge_id(cita, args.judge_id, detector_ids, global);
  }
  eval::EvalReport report = eval::variant_asr_table(cita, detector_ids);
  report.metadata["samples"] = cita.size();
  emit(args, std::move(report), global);
}

void run_eval_categories(EvalArgs args, const GlobalOptions& global) {
  args.judge_id = pick(args.judge_id, global, "j_tox_id");
  const std::vector<eval::Sample> samples = load_samples(args.input);
  const std::vector<std::string> detector_ids = split_commas(args.detectors);
  if (!args.judge_id.empty()) {
    enforce_judge_id(samples, args.judge_id, detector_ids, global);
  }
  eval::EvalReport report = eval::category_asr_table(samples, detector_ids);
  report.metadata["samples"] = samples.size();
  emit(args, std::move(report), global);
}

void run_eval_defense(const EvalArgs& args, const GlobalOptions& global) {
  if (args.detector_id.empty()) {
    toxred::raise(ErrorKind::kConfig, "eval-defense needs --detector-id");
  }
  struct Row {
    eval::LabeledText labeled;
    gateway::Verdict verdict;
    std::string dataset;
  };
  std::vector<Row> items;
  for (const json& row : toxred::jsonl::read_file(args.input)) {
    Row item;
    item.labeled.text = row.at("text").get<std::string>();
    const std::string gold = row.at("gold").get<std::string>();
    if (gold == "toxic") {
      item.labeled.gold = eval::GoldLabel::TOXIC;
    } else if (gold == "nontoxic") {
      item.labeled.gold = eval::GoldLabel::NONTOXIC;
    } else {
      toxred::raise(ErrorKind::kFormat, "gold must be toxic|nontoxic: " + gold);
    }
    item.dataset = row.value("dataset", std::string("all"));
    const json& verdicts = row.at("verdicts");
    if (!verdicts.contains(args.detector_id)) {
      toxred::raise(ErrorKind::kEvaluation,
                    "row lacks a verdict from '" + args.detector_id + "'");
    }
    const json& v = verdicts.at(args.detector_id);
    item.verdict.label = gateway::label_from_string(v.at("label").get<std::string>());
    item.verdict.detector_id = v.at("detector_id").get<std::string>();
    items.push_back(std::move(item));
  }
  if (items.empty()) {
    toxred::raise(ErrorKind::kFormat, args.input + ": no rows");
  }

  std::map<std::string, std::pair<std::vector<eval::LabeledText>,
                                  std::vector<gateway::Verdict>>> by_dataset;
  for (const Row& item : items) {
    by_dataset[item.dataset].first.push_back(item.labeled);
    by_dataset[item.dataset].second.push_back(item.verdict);
  }
  eval::EvalReport report;
  report.title = "Defense accuracy";
  report.row_header = "detector";
  report.row_labels = {args.detector_id};
  report.cells.emplace_back();
  for (const auto& [dataset, data] : by_dataset) {
    report.col_labels.push_back(dataset);
    const double accuracy =
        eval::defense_accuracy(data.first, args.detector_id, data.second);
    eval::EvalReport::Cell cell;
    cell.denominator = static_cast<long long>(data.first.size());
    cell.numerator = static_cast<long long>(
        std::llround(accuracy * static_cast<double>(data.first.size())));
    cell.percent = accuracy * 100.0;
    report.cells[0].push_back(cell);
  }
  report.metadata["detector_id"] = args.detector_id;
  emit(args, std::move(report), global);
}

void run_eval_agreement(const EvalArgs& args, const GlobalOptions&) {
  const json doc = load_json_file(args.input);
  std::map<std::string, eval::Ratings> dimensions;
  const json& dims = doc.contains("dimensions") ? doc.at("dimensions") : doc;
  for (const auto& [dimension, items] : dims.items()) {
    eval::Ratings ratings;
    for (const auto& [item, by_annotator] : items.items()) {
      for (const auto& [annotator, rating] : by_annotator.items()) {
        ratings[item][annotator] = rating.get<int>();
      }
    }
    dimensions[dimension] = std::move(ratings);
  }
  if (dimensions.empty()) {
    toxred::raise(ErrorKind::kFormat, args.input + ": no rating dimensions");
  }
  const eval::AlphaMetric metric = args.metric == "interval"
                                       ? eval::AlphaMetric::INTERVAL
                                       : eval::AlphaMetric::ORDINAL;
  json out{{"metric", args.metric}, {"dimensions", json::object()}};
  for (const auto& [dimension, ratings] : dimensions) {
    const std::optional<double> alpha = eval::krippendorff_alpha(ratings, metric);
    json entry{{"likert_mean", eval::aggregate_likert(ratings)}};
    if (alpha) {
      entry["krippendorff_alpha"] = *alpha;
    } else {
      entry["krippendorff_alpha"] = nullptr;
    }
    out["dimensions"][dimension] = std::move(entry);
  }
  const std::string text = out.dump(2) + "\n";
  if (args.output.empty()) {
    std::cout << text;
  } else {
    write_text_file(args.output, text);
  }
}

// ---------------------------------------------------------------------------
// GRPO simulator command

struct GrpoSimArgs {
  std::string output;
  std::string env_file;
  int queries = 4;
  int responses = 6;
  grpo::GrpoConfig config;
};

grpo::SyntheticEnv default_env(int queries, int responses, std::uint64_t seed) {
  grpo::SyntheticEnv env;
  for (int q = 0; q < queries; ++q) {
    const std::string query_id = "q" + std::to_string(q);
    auto rng = toxred::rng::KeyedRng::keyed(seed, 0xE17ULL,
                                            static_cast<std::uint64_t>(q));
    const int best = static_cast<int>(rng.below(static_cast<std::uint64_t>(responses)));
    std::vector<grpo::ResponseOutcome> outcomes;
    for (int a = 0; a < responses; ++a) {
      if (a == best) {
        outcomes.push_back({.safe = true, .quality_score = 5});
      } else {
        outcomes.push_back(
            {.safe = false,
             .quality_score = 1 + static_cast<int>(rng.below(5))});
      }
    }
    env.query_ids.push_back(query_id);
    env.outcomes[query_id] = std::move(outcomes);
  }
  return env;
}

grpo::SyntheticEnv env_from_json(const json& doc) {
  grpo::SyntheticEnv env;
  if (doc.contains("weights")) {
    env.weights.lambda_eva = doc.at("weights").value("lambda_eva", 0.5);
    env.weights.lambda_qual = doc.at("weights").value("lambda_qual", 0.5);
  }
  env.f_adv_id = doc.value("f_adv_id", std::string("f_adv_synth"));
  for (const json& query : doc.at("queries")) {
    const std::string query_id = query.at("id").get<std::string>();
    std::vector<grpo::ResponseOutcome> outcomes;
    for (const json& response : query.at("responses")) {
      outcomes.push_back({.safe = response.at("safe").get<bool>(),
                          .quality_score = response.at("quality_score").get<int>()});
    }
    env.query_ids.push_back(query_id);
    env.outcomes[query_id] = std::move(outcomes);
  }
  return env;
}

void run_grpo_sim(const GrpoSimArgs& args, const GlobalOptions& global) {
  grpo::SyntheticEnv env =
      args.env_file.empty()
          ? default_env(args.queries, args.responses, args.config.seed)
          : env_from_json(load_json_file(args.env_file));
  const json weights = config_section(global, "reward_weights");
  if (args.env_file.empty() && !weights.empty()) {
    env.weights.lambda_eva = weights.value("lambda_eva", env.weights.lambda_eva);
    env.weights.lambda_qual = weights.value("lambda_qual", env.weights.lambda_qual);
  }
  const grpo::TrainingResult result = grpo::simulate_training(env, args.config);
  std::ofstream out(args.output, std::ios::binary);
  if (!out) toxred::raise(ErrorKind::kIo, "cannot write " + args.output);
  grpo::write_trace_csv(out, result.trace);

  json modal = json::object();
  for (const auto& [query_id, action] :
       result.trace.back().modal_responses) {
    modal[query_id] = action;
  }
  std::cout << json{{"iterations", result.trace.size()},
                    {"final_expected_reward",
                     result.trace.back().expected_reward},
                    {"modal_responses", modal}}
                   .dump()
            << '\n';
}

// ---------------------------------------------------------------------------

int exit_code_for(const Error& error) {
  return error.kind() == ErrorKind::kConfig ? 3 : 2;
}

void print_error(const Error& error) {
  const json doc{{"error", {{"kind", toxred::to_string(error.kind())},
                            {"message", error.what()}}}};
  std::cerr << doc.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"red-team evaluation pipeline for Chinese toxicity detectors"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_flag("--offline", global.offline,
               "fail any command that would need a network");
  app.add_option("--config", global.config_path, "run configuration JSON");

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand("ingest", "ingest toxic posts");
  ingest->add_option("--in", ingest_args.input, "JSONL or CSV export")->required();
  ingest->add_option("--source", ingest_args.source, "COLD|SWSR|SCCD|CNTP|ToxiCN|OTHER")
      ->required();
  ingest->add_option("--out-posts", ingest_args.out_posts, "posts JSONL")->required();
  ingest->add_option("--manifest", ingest_args.manifest, "manifest JSON to update");
  ingest->add_flag("--append", ingest_args.append, "append to existing posts file");
  ingest->add_option("--text-field", ingest_args.fields.text_field);
  ingest->add_option("--id-field", ingest_args.fields.id_field);
  ingest->add_option("--category-field", ingest_args.fields.category_field);

  SynthesizeArgs synthesize_args;
  CLI::App* synthesize =
      app.add_subcommand("synthesize", "synthesize discussion contexts");
  synthesize->add_option("--in", synthesize_args.input, "posts JSONL")->required();
  synthesize->add_option("--out", synthesize_args.output, "pairs JSONL")->required();
  synthesize->add_option("--endpoint-config", synthesize_args.endpoint_config,
                         "chat endpoint JSON (kind http|mock; default mock)");
  synthesize->add_option("--max-parallel", synthesize_args.max_parallel);

  FilterArgs filter_args;
  CLI::App* filter = app.add_subcommand("filter", "resolve pair filter status");
  filter->add_option("--in", filter_args.input, "pairs JSONL")->required();
  filter->add_option("--out", filter_args.output, "pairs JSONL")->required();
  filter->add_option("--judge-config", filter_args.judge_config,
                     "judge chat endpoint JSON (absent = permissive mode)");

  SplitArgs split_args;
  CLI::App* split = app.add_subcommand("split", "assign train/eval partitions");
  split->add_option("--in", split_args.input, "pairs JSONL")->required();
  split->add_option("--posts", split_args.posts, "posts JSONL for source counts");
  split->add_option("--manifest", split_args.manifest, "manifest JSON")->required();
  split->add_option("--eval-fraction", split_args.eval_fraction)->required();
  split->add_option("--seed", split_args.seed);

  RewriteArgs rewrite_args;
  CLI::App* rewrite = app.add_subcommand("rewrite", "generate variant sets");
  rewrite->add_option("--in", rewrite_args.input, "pairs or samples JSONL")->required();
  rewrite->add_option("--out", rewrite_args.output, "samples JSONL")->required();
  rewrite->add_option("--tables", rewrite_args.tables, "rule tables TSV")->required();
  rewrite->add_option("--posts", rewrite_args.posts, "posts JSONL for categories");
  rewrite->add_option("--seed", rewrite_args.seed);
  rewrite->add_option("--max-edits", rewrite_args.max_edits);
  rewrite->add_flag("--emit-base", rewrite_args.emit_base,
                    "also emit the unrewritten base samples");
  rewrite->add_option("--base-stage", rewrite_args.base_stage, "HIL|HIL_ITE");

  DetectArgs detect_args;
  CLI::App* detect = app.add_subcommand("detect", "attach detector verdicts");
  detect->add_option("--in", detect_args.input)->required();
  detect->add_option("--out", detect_args.output)->required();
  detect->add_option("--detector-config", detect_args.detector_config)->required();
  detect->add_option("--ids", detect_args.ids, "comma-joined detector ids");
  detect->add_option("--judge-id", detect_args.judge_id,
                     "also attach the independent judge verdict");
  detect->add_option("--cache", detect_args.cache, "verdict cache JSONL");

  DetectArgs judge_args;
  judge_args.judge_only = true;
  CLI::App* judge = app.add_subcommand("judge", "attach the independent judge verdict");
  judge->add_option("--in", judge_args.input)->required();
  judge->add_option("--out", judge_args.output)->required();
  judge->add_option("--detector-config", judge_args.detector_config)->required();
  judge->add_option("--judge-id", judge_args.judge_id)->required();
  judge->add_option("--cache", judge_args.cache, "verdict cache JSONL");

  EvalArgs asr_args, variants_args, categories_args, defense_args, agreement_args;
  CLI::App* eval_asr = app.add_subcommand("eval-asr", "stage-level ASR table");
  eval_asr->add_option("--in", asr_args.input)->required();
  eval_asr->add_option("--detectors", asr_args.detectors)->required();
  eval_asr->add_option("--judge-id", asr_args.judge_id);
  eval_asr->add_option("--format", asr_args.format, "json|csv|markdown");
  eval_asr->add_option("--out", asr_args.output, "output file (default stdout)");

  CLI::App* eval_variants =
      app.add_subcommand("eval-variants", "per-variant ASR table");
  eval_variants->add_option("--in", variants_args.input)->required();
  eval_variants->add_option("--detectors", variants_args.detectors)->required();
  eval_variants->add_option("--judge-id", variants_args.judge_id);
  eval_variants->add_option("--format", variants_args.format);
  eval_variants->add_option("--out", variants_args.output);

  CLI::App* eval_categories =
      app.add_subcommand("eval-categories", "per-category ASR table");
  eval_categories->add_option("--in", categories_args.input)->required();
  eval_categories->add_option("--detectors", categories_args.detectors)->required();
  eval_categories->add_option("--judge-id", categories_args.judge_id);
  eval_categories->add_option("--format", categories_args.format);
  eval_categories->add_option("--out", categories_args.output);

  CLI::App* eval_defense =
      app.add_subcommand("eval-defense", "defense classifier accuracy");
  eval_defense->add_option("--in", defense_args.input)->required();
  eval_defense->add_option("--detector-id", defense_args.detector_id)->required();
  eval_defense->add_option("--format", defense_args.format);
  eval_defense->add_option("--out", defense_args.output);

  CLI::App* eval_agreement =
      app.add_subcommand("eval-agreement", "Likert means and Krippendorff alpha");
  eval_agreement->add_option("--in", agreement_args.input)->required();
  eval_agreement->add_option("--metric", agreement_args.metric, "ordinal|interval");
  eval_agreement->add_option("--out", agreement_args.output);

  GrpoSimArgs grpo_args;
  CLI::App* grpo_sim = app.add_subcommand("grpo-sim", "toy policy trainer");
  grpo_sim->add_option("--out", grpo_args.output, "trace CSV")->required();
  grpo_sim->add_option("--env", grpo_args.env_file, "environment JSON");
  grpo_sim->add_option("--queries", grpo_args.queries);
  grpo_sim->add_option("--responses", grpo_args.responses);
  grpo_sim->add_option("--seed", grpo_args.config.seed);
  grpo_sim->add_option("--iterations", grpo_args.config.iterations);
  grpo_sim->add_option("--group-size", grpo_args.config.group_size);
  grpo_sim->add_option("--clip-epsilon", grpo_args.config.clip_epsilon);
  grpo_sim->add_option("--kl-coef", grpo_args.config.kl_coefficient);
  grpo_sim->add_option("--advantage-eps", grpo_args.config.advantage_epsilon);
  grpo_sim->add_option("--learning-rate", grpo_args.config.learning_rate);

  try {
    app.parse(argc, argv);
    if (!global.config_path.empty()) {
      global.config = load_json_file(global.config_path);
    }
    if (ingest->parsed()) run_ingest(ingest_args);
    if (synthesize->parsed()) run_synthesize(synthesize_args, global);
    if (filter->parsed()) run_filter(filter_args, global);
    if (split->parsed()) run_split(split_args);
    if (rewrite->parsed()) run_rewrite(rewrite_args);
    if (detect->parsed()) run_detect(detect_args, global);
    if (judge->parsed()) run_detect(judge_args, global);
    if (eval_asr->parsed()) run_eval_asr(asr_args, global);
    if (eval_variants->parsed()) run_eval_variants(variants_args, global);
    if (eval_categories->parsed()) run_eval_categories(categories_args, global);
    if (eval_defense->parsed()) run_eval_defense(defense_args, global);
    if (eval_agreement->parsed()) run_eval_agreement(agreement_args, global);
    if (grpo_sim->parsed()) run_grpo_sim(grpo_args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << e.what() << '\n';
    const json doc{{"error", {{"kind", "usage"}, {"message", e.what()}}}};
    std::cerr << doc.dump() << '\n';
    return 1;
  } catch (const Error& e) {
    print_error(e);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    const json doc{{"error", {{"kind", "runtime"}, {"message", e.what()}}}};
    std::cerr << doc.dump() << '\n';
    return 2;
  }
  return 0;
}
