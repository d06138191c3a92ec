// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "toxred/evaluation.hpp"
#include "toxred/gateway.hpp"

namespace toxred::corpus {

enum class Source { COLD, SWSR, SCCD, CNTP, TOXICN, OTHER };

const char* to_string(Source source);
Source source_from_string(const std::string& s);

struct ToxicPost {
  std::string id;
  std::string text;
  Source source = Source::OTHER;
  std::optional<eval::Category> category;
};

nlohmann::json post_to_json(const ToxicPost& post);
ToxicPost post_from_json(const nlohmann::json& row);

enum class FilterStatus {
  PENDING,
  KEPT,
  REJECTED_INCOHERENT,
  REJECTED_TARGET_INCONSISTENT,
  REJECTED_DUPLICATE,
  REJECTED_HARMFULNESS_ALTERED,
  REJECTED_UNSUPPORTED,
};

const char* to_string(FilterStatus status);
FilterStatus filter_status_from_string(const std::string& s);

// A synthesized discussion context paired with the toxic response it could
// plausibly elicit. `audit` holds the raw model output verbatim.
struct ContextResponsePair {
  std::string pair_id;
  std::string context;
  std::string response;
  std::string source_post_id;
  FilterStatus filter_status = FilterStatus::PENDING;
  std::string audit;

  void validate() const;
};

nlohmann::json pair_to_json(const ContextResponsePair& pair);
ContextResponsePair pair_from_json(const nlohmann::json& row);

enum class Split { TRAIN, EVAL };

const char* to_string(Split split);
Split split_from_string(const std::string& s);

struct SourceCount {
  long long candidate_count = 0;
  long long final_count = 0;
};

struct CorpusManifest {
  std::map<std::string, SourceCount> per_source;  // keyed by source name
  std::map<std::string, Split> split;             // pair_id -> assignment

  long long train_count() const;
  long long eval_count() const;
  void validate() const;  // final_count <= candidate_count per source

  nlohmann::json to_json() const;
  static CorpusManifest from_json(const nlohmann::json& doc);
  static CorpusManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct IngestOptions {
  std::string text_field = "text";
  std::string id_field = "id";
  std::string category_field = "category";
};

struct IngestResult {
  std::vector<ToxicPost> posts;
  long long dropped_empty = 0;
};

// JSONL preferred, CSV accepted; rows with empty text are dropped and
// counted; duplicate ids are an error; zero valid rows is an error.
IngestResult ingest_posts(const std::filesystem::path& path, Source source,
                          const IngestOptions& options = {});

// Context synthesis endpoint: a chat-completion endpoint, or a deterministic
// offline mock for network-free runs.
struct SynthesisConfig {
  enum class Kind { HTTP, MOCK };
  Kind kind = Kind::MOCK;
  gateway::ChatEndpoint endpoint;  // HTTP only
  int max_parallel = 4;
};

// Produces a PENDING pair for one post. HTTP failures and empty model output
// raise; no pair is emitted for failed posts.
ContextResponsePair synthesize_context(const ToxicPost& post,
                                       const SynthesisConfig& config,
                                       gateway::Transport* transport);

// Judge endpoint for the delegated filter criteria.
struct JudgeConfig {
  gateway::ChatEndpoint endpoint;
};

struct FilterResult {
  std::vector<ContextResponsePair> pairs;
  long long kept = 0;
  std::map<FilterStatus, long long> rejected;
  // Pairs whose judge call failed or answered unparseably stay PENDING and
  // are reported here, never silently kept.
  std::vector<std::string> pending_pair_ids;
};

// Exact duplicate detection (NFC + whitespace collapse on the response) is
// local and deterministic; the other four criteria go to the judge when one
// is configured, otherwise pairs pass them (permissive mode). Pairs that are
// already resolved pass through unchanged, so re-filtering is a no-op.
FilterResult filter_pairs(std::span<const ContextResponsePair> pairs,
                          const JudgeConfig* judge,
                          gateway::Transport* transport);

// Deterministic split, a pure function of (pair ids, fraction, seed).
// eval side takes ceil(N * eval_fraction) clamped to [1, N-1], which keeps
// both partitions within one element of the requested fraction.
CorpusManifest split_corpus(std::span<const ContextResponsePair> kept_pairs,
                            double eval_fraction, std::uint64_t seed,
                            const std::map<std::string, Source>* post_sources = nullptr);

}  // namespace toxred::corpus
