// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#include "toxred/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "toxred/jsonl.hpp"
#include "toxred/prompts.hpp"
#include "toxred/rng.hpp"
#include "toxred/unicode.hpp"

namespace toxred::corpus {

using nlohmann::json;

const char* to_string(Source source) {
  switch (source) {
    case Source::COLD: return "COLD";
    case Source::SWSR: return "SWSR";
    case Source::SCCD: return "SCCD";
    case Source::CNTP: return "CNTP";
    case Source::TOXICN: return "ToxiCN";
    case Source::OTHER: return "OTHER";
  }
  return "OTHER";
}

Source source_from_string(const std::string& s) {
  std::string upper = s;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) {
    return static_cast<char>(std::toupper(c));
  });
  if (upper == "COLD") return Source::COLD;
  if (upper == "SWSR") return Source::SWSR;
  if (upper == "SCCD") return Source::SCCD;
  if (upper == "CNTP") return Source::CNTP;
  if (upper == "TOXICN") return Source::TOXICN;
  if (upper == "OTHER") return Source::OTHER;
  raise(ErrorKind::kConfig, "unknown source: " + s);
}

json post_to_json(const ToxicPost& post) {
  json row{{"id", post.id}, {"text", post.text}, {"source", to_string(post.source)}};
  if (post.category) row["category"] = eval::to_string(*post.category);
  return row;
}

ToxicPost post_from_json(const json& row) {
  ToxicPost post;
  post.id = row.at("id").get<std::string>();
  post.text = row.at("text").get<std::string>();
  post.source = source_from_string(row.at("source").get<std::string>());
  if (row.contains("category")) {
    post.category = eval::category_from_string(row.at("category").get<std::string>());
  }
  return post;
}

const char* to_string(FilterStatus status) {
  switch (status) {
    case FilterStatus::PENDING: return "PENDING";
    case FilterStatus::KEPT: return "KEPT";
    case FilterStatus::REJECTED_INCOHERENT: return "REJECTED_INCOHERENT";
    case FilterStatus::REJECTED_TARGET_INCONSISTENT:
      return "REJECTED_TARGET_INCONSISTENT";
    case FilterStatus::REJECTED_DUPLICATE: return "REJECTED_DUPLICATE";
    case FilterStatus::REJECTED_HARMFULNESS_ALTERED:
      return "REJECTED_HARMFULNESS_ALTERED";
    case FilterStatus::REJECTED_UNSUPPORTED: return "REJECTED_UNSUPPORTED";
  }
  return "PENDING";
}

FilterStatus filter_status_from_string(const std::string& s) {
  for (FilterStatus status :
       {FilterStatus::PENDING, FilterStatus::KEPT,
        FilterStatus::REJECTED_INCOHERENT,
        FilterStatus::REJECTED_TARGET_INCONSISTENT,
        FilterStatus::REJECTED_DUPLICATE,
        FilterStatus::REJECTED_HARMFULNESS_ALTERED,
        FilterStatus::REJECTED_UNSUPPORTED}) {
    if (s == to_string(status)) return status;
  }
  raise(ErrorKind::kFormat, "unknown filter status: " + s);
}

void ContextResponsePair::validate() const {
  if (pair_id.empty()) raise(ErrorKind::kFormat, "pair without pair_id");
  if (filter_status == FilterStatus::KEPT &&
      (context.empty() || response.empty())) {
    raise(ErrorKind::kFormat,
          "pair '" + pair_id + "': KEPT requires non-empty context and response");
  }
}

json pair_to_json(const ContextResponsePair& pair) {
  return json{{"pair_id", pair.pair_id},
              {"context", pair.context},
              {"response", pair.response},
              {"source_post_id", pair.source_post_id},
              {"filter_status", to_string(pair.filter_status)},
              {"audit", pair.audit}};
}

ContextResponsePair pair_from_json(const json& row) {
  ContextResponsePair pair;
  pair.pair_id = row.at("pair_id").get<std::string>();
  pair.context = row.at("context").get<std::string>();
  pair.response = row.at("response").get<std::string>();
  pair.source_post_id = row.at("source_post_id").get<std::string>();
  pair.filter_status =
      filter_status_from_string(row.at("filter_status").get<std::string>());
  pair.audit = row.value("audit", std::string());
  pair.validate();
  return pair;
}

const char* to_string(Split split) {
  return split == Split::TRAIN ? "TRAIN" : "EVAL";
}

Split split_from_string(const std::string& s) {
  if (s == "TRAIN") return Split::TRAIN;
  if (s == "EVAL") return Split::EVAL;
  raise(ErrorKind::kFormat, "unknown split: " + s);
}

long long CorpusManifest::train_count() const {
  long long n = 0;
  for (const auto& [id, split] : split) {
    if (split == Split::TRAIN) ++n;
  }
  return n;
}

long long CorpusManifest::eval_count() const {
  return static_cast<long long>(split.size()) - train_count();
}

void CorpusManifest::validate() const {
  for (const auto& [name, counts] : per_source) {
    if (counts.final_count > counts.candidate_count) {
      raise(ErrorKind::kFormat,
            "manifest: source " + name + " has final_count > candidate_count");
    }
  }
}

json CorpusManifest::to_json() const {
  json sources = json::object();
  for (const auto& [name, counts] : per_source) {
    sources[name] = json{{"candidate_count", counts.candidate_count},
                         {"final_count", counts.final_count}};
  }
  json split_map = json::object();
  for (const auto& [pair_id, assignment] : split) {
    split_map[pair_id] = to_string(assignment);
  }
  return json{{"sources", std::move(sources)}, {"split", std::move(split_map)}};
}

CorpusManifest CorpusManifest::from_json(const json& doc) {
  CorpusManifest manifest;
  if (doc.contains("sources")) {
    for (const auto& [name, counts] : doc.at("sources").items()) {
      manifest.per_source[name] =
          SourceCount{counts.at("candidate_count").get<long long>(),
                      counts.at("final_count").get<long long>()};
    }
  }
  if (doc.contains("split")) {
    for (const auto& [pair_id, assignment] : doc.at("split").items()) {
      manifest.split[pair_id] = split_from_string(assignment.get<std::string>());
    }
  }
  manifest.validate();
  return manifest;
}

CorpusManifest CorpusManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open manifest " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorKind::kFormat, path.string() + ": invalid JSON");
  }
  return from_json(doc);
}

void CorpusManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kIo, "cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

namespace {

// RFC 4180-style CSV line splitting with quoted fields; no multi-line fields.
std::vector<std::string> split_csv_line(const std::string& line,
                                        const std::string& where) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  if (quoted) {
    raise(ErrorKind::kFormat, where + ": unterminated quoted field");
  }
  fields.push_back(std::move(field));
  return fields;
}

bool is_blank(const std::string& text) {
  return uni::collapse_whitespace(text).empty();
}

struct RawRow {
  std::string id;
  std::string text;
  std::string category;
  bool has_id = false;
};

std::vector<RawRow> read_jsonl_rows(const std::filesystem::path& path,
                                    const IngestOptions& options) {
  std::vector<RawRow> rows;
  for (const json& row : jsonl::read_file(path)) {
    if (!row.is_object()) {
      raise(ErrorKind::kFormat, path.string() + ": row is not an object");
    }
    RawRow raw;
    if (row.contains(options.text_field) && row.at(options.text_field).is_string()) {
      raw.text = row.at(options.text_field).get<std::string>();
    }
    if (row.contains(options.id_field) && !row.at(options.id_field).is_null()) {
      const json& id = row.at(options.id_field);
      raw.id = id.is_string() ? id.get<std::string>() : id.dump();
      raw.has_id = true;
    }
    if (row.contains(options.category_field) &&
        row.at(options.category_field).is_string()) {
      raw.category = row.at(options.category_field).get<std::string>();
    }
    rows.push_back(std::move(raw));
  }
  return rows;
}

std::vector<RawRow> read_csv_rows(const std::filesystem::path& path,
                                  const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    raise(ErrorKind::kFormat, path.string() + ": empty CSV");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header =
      split_csv_line(line, path.string() + ":1");
  const auto column_of = [&](const std::string& name) -> std::ptrdiff_t {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const std::ptrdiff_t text_col = column_of(options.text_field);
  const std::ptrdiff_t id_col = column_of(options.id_field);
  const std::ptrdiff_t category_col = column_of(options.category_field);
  if (text_col < 0) {
    raise(ErrorKind::kFormat,
          path.string() + ": no '" + options.text_field + "' column");
  }
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields =
        split_csv_line(line, path.string() + ":" + std::to_string(line_no));
    RawRow raw;
    if (static_cast<std::size_t>(text_col) < fields.size()) {
      raw.text = fields[static_cast<std::size_t>(text_col)];
    }
    if (id_col >= 0 && static_cast<std::size_t>(id_col) < fields.size() &&
        !fields[static_cast<std::size_t>(id_col)].empty()) {
      raw.id = fields[static_cast<std::size_t>(id_col)];
      raw.has_id = true;
    }
    if (category_col >= 0 &&
        static_cast<std::size_t>(category_col) < fields.size()) {
      raw.category = fields[static_cast<std::size_t>(category_col)];
    }
    rows.push_back(std::move(raw));
  }
  return rows;
}

}  // namespace

IngestResult ingest_posts(const std::filesystem::path& path, Source source,
                          const IngestOptions& options) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorKind::kIo, "input file does not exist: " + path.string());
  }
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  std::vector<RawRow> rows;
  if (ext == ".jsonl" || ext == ".ndjson") {
    rows = read_jsonl_rows(path, options);
  } else if (ext == ".csv") {
    rows = read_csv_rows(path, options);
  } else {
    raise(ErrorKind::kFormat,
          "unknown input format '" + ext + "' (expected .jsonl or .csv)");
  }

  IngestResult result;
  std::set<std::string> seen_ids;
  std::size_t row_index = 0;
  for (RawRow& raw : rows) {
    ++row_index;
    if (is_blank(raw.text)) {
      ++result.dropped_empty;
      continue;
    }
    ToxicPost post;
    post.text = std::move(raw.text);
    post.source = source;
    post.id = raw.has_id ? raw.id
                         : std::string(to_string(source)) + "-" +
                               std::to_string(row_index);
    if (!raw.category.empty()) {
      post.category = eval::category_from_string(raw.category);
    }
    if (!seen_ids.insert(post.id).second) {
      raise(ErrorKind::kFormat,
            path.string() + ": duplicate post id '" + post.id + "'");
    }
    result.posts.push_back(std::move(post));
  }
  if (result.posts.empty()) {
    raise(ErrorKind::kFormat, path.string() + ": zero valid rows");
  }
  return result;
}

ContextResponsePair synthesize_context(const ToxicPost& post,
                                       const SynthesisConfig& config,
                                       gateway::Transport* transport) {
  if (is_blank(post.text)) {
    raise(ErrorKind::kInvalidArgument, "post '" + post.id + "' has empty text");
  }
  ContextResponsePair pair;
  pair.pair_id = "pair-" + post.id;
  pair.response = post.text;
  pair.source_post_id = post.id;
  pair.filter_status = FilterStatus::PENDING;

  if (config.kind == SynthesisConfig::Kind::MOCK) {
    // Deterministic stand-in context: a short lead-in quoting the head of
    // the post, so downstream stages see distinct, reproducible contexts.
    const std::u32string cps = uni::decode_utf8(post.text);
    const std::u32string head = cps.substr(0, std::min<std::size_t>(cps.size(), 12));
    pair.context = "论坛里有人聊到“" + uni::encode_utf8(head) + "”，你怎么看？";
    pair.audit = pair.context;
    return pair;
  }
  if (transport == nullptr) {
    raise(ErrorKind::kConfig, "synthesize_context: HTTP endpoint needs a transport");
  }
  const gateway::ChatResult result = gateway::chat_complete(
      *transport, config.endpoint, prompts::context_synthesis(post.text));
  if (is_blank(result.content)) {
    raise(ErrorKind::kParse, "context synthesis returned empty output");
  }
  pair.context = result.content;
  pair.audit = result.body;
  return pair;
}

namespace {

FilterStatus filter_status_from_judge_label(const std::string& label) {
  if (label == "keep") return FilterStatus::KEPT;
  if (label == "incoherent") return FilterStatus::REJECTED_INCOHERENT;
  if (label == "target_inconsistent") {
    return FilterStatus::REJECTED_TARGET_INCONSISTENT;
  }
  if (label == "harmfulness_altered") {
    return FilterStatus::REJECTED_HARMFULNESS_ALTERED;
  }
  if (label == "unsupported") return FilterStatus::REJECTED_UNSUPPORTED;
  raise(ErrorKind::kParse, "judge returned unknown filter label: " + label);
}

}  // namespace

FilterResult filter_pairs(std::span<const ContextResponsePair> pairs,
                          const JudgeConfig* judge,
                          gateway::Transport* transport) {
  if (judge != nullptr && transport == nullptr) {
    raise(ErrorKind::kConfig, "filter_pairs: judge endpoint needs a transport");
  }
  FilterResult result;
  result.pairs.reserve(pairs.size());
  std::set<std::string> seen_responses;
  for (const ContextResponsePair& input : pairs) {
    ContextResponsePair pair = input;
    const std::string dedup_key = uni::normalize_text(pair.response);
    if (pair.filter_status != FilterStatus::PENDING) {
      // Already resolved: untouched, so re-filtering changes nothing.
      seen_responses.insert(dedup_key);
      result.pairs.push_back(std::move(pair));
      continue;
    }
    if (seen_responses.contains(dedup_key)) {
      pair.filter_status = FilterStatus::REJECTED_DUPLICATE;
    } else if (judge == nullptr) {
      pair.filter_status = FilterStatus::KEPT;  // permissive mode
    } else {
      try {
        const gateway::ChatResult judged = gateway::chat_complete(
            *transport, judge->endpoint,
            prompts::pair_filter_judge(pair.context, pair.response));
        nlohmann::json doc = json::parse(judged.content, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || doc.size() != 1 ||
            !doc.contains("filter_label") || !doc.at("filter_label").is_string()) {
          raise(ErrorKind::kParse,
                "judge output is not {\"filter_label\": ...}: '" +
                    judged.content + "'");
        }
        pair.filter_status = filter_status_from_judge_label(
            doc.at("filter_label").get<std::string>());
      } catch (const Error&) {
        // Left PENDING and reported; ambiguous pairs are surfaced, not kept.
        result.pending_pair_ids.push_back(pair.pair_id);
        seen_responses.insert(dedup_key);
        result.pairs.push_back(std::move(pair));
        continue;
      }
    }
    if (pair.filter_status == FilterStatus::KEPT) {
      ++result.kept;
    } else {
      ++result.rejected[pair.filter_status];
    }
    seen_responses.insert(dedup_key);
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

CorpusManifest split_corpus(std::span<const ContextResponsePair> kept_pairs,
                            double eval_fraction, std::uint64_t seed,
                            const std::map<std::string, Source>* post_sources) {
  if (!(eval_fraction > 0.0) || !(eval_fraction < 1.0)) {
    raise(ErrorKind::kInvalidArgument,
          "eval_fraction must lie strictly between 0 and 1");
  }
  if (kept_pairs.size() < 2) {
    raise(ErrorKind::kInvalidArgument, "split_corpus: fewer than 2 pairs");
  }
  std::set<std::string> ids;
  for (const ContextResponsePair& pair : kept_pairs) {
    if (pair.filter_status != FilterStatus::KEPT) {
      raise(ErrorKind::kInvalidArgument,
            "split_corpus: pair '" + pair.pair_id + "' is not KEPT");
    }
    if (!ids.insert(pair.pair_id).second) {
      raise(ErrorKind::kInvalidArgument,
            "split_corpus: duplicate pair id '" + pair.pair_id + "'");
    }
  }

  const auto n = static_cast<long long>(kept_pairs.size());
  auto eval_count = static_cast<long long>(
      std::ceil(static_cast<double>(n) * eval_fraction));
  eval_count = std::clamp<long long>(eval_count, 1, n - 1);

  // Rank ids by a seed-keyed hash: a pure function of (ids, fraction, seed),
  // independent of input order.
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  ranked.reserve(ids.size());
  for (const std::string& id : ids) {
    ranked.emplace_back(rng::mix(rng::splitmix64(seed), rng::hash_bytes(id)), id);
  }
  std::sort(ranked.begin(), ranked.end());

  CorpusManifest manifest;
  for (long long i = 0; i < n; ++i) {
    manifest.split[ranked[static_cast<std::size_t>(i)].second] =
        i < eval_count ? Split::EVAL : Split::TRAIN;
  }
  for (const ContextResponsePair& pair : kept_pairs) {
    Source source = Source::OTHER;
    if (post_sources != nullptr) {
      auto it = post_sources->find(pair.source_post_id);
      if (it == post_sources->end()) {
        raise(ErrorKind::kFormat,
              "split_corpus: no source recorded for post '" +
                  pair.source_post_id + "'");
      }
      source = it->second;
    }
    ++manifest.per_source[to_string(source)].final_count;
  }
  // Candidate counts live in the ingest-time manifest; a standalone split
  // knows only the survivors.
  for (auto& [name, counts] : manifest.per_source) {
    counts.candidate_count = counts.final_count;
  }
  return manifest;
}

}  // namespace toxred::corpus
