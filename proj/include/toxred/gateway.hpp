// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "toxred/verdict.hpp"

namespace toxred::gateway {

enum class Backend { MODERATION_API, CHAT_JUDGE, LEXICON_MOCK };

const char* to_string(Backend backend);
Backend backend_from_string(const std::string& s);

struct RetryPolicy {
  int max_attempts = 3;
  // Sleep before attempt k+1 is backoff_ms[min(k-1, size-1)].
  std::vector<int> backoff_ms = {100, 400};
};

// One detector or judge endpoint. Moderation responses are adapted through a
// config-declared JSON pointer plus value->label map; chat judges use the
// binary safe/unsafe prompt; the lexicon mock needs no network at all.
struct DetectorSpec {
  std::string id;
  Backend backend = Backend::LEXICON_MOCK;
  std::string base_url;        // absent for the mock
  std::string model_name;
  std::string credential_env;  // name of the env var holding the secret
  int max_parallel = 4;
  RetryPolicy retry;

  // CHAT_JUDGE
  std::string chat_path = "/v1/chat/completions";
  double temperature = 0.0;

  // MODERATION_API
  std::string request_text_field = "text";
  nlohmann::json extra_body = nlohmann::json::object();
  std::string label_pointer;                      // JSON pointer into the response
  std::map<std::string, std::string> label_map;   // provider value -> safe|toxic

  // LEXICON_MOCK
  std::vector<std::string> lexicon;

  void validate() const;
};

DetectorSpec detector_spec_from_json(const nlohmann::json& doc);
std::vector<DetectorSpec> load_detector_config(const std::filesystem::path& path);

struct HttpResponse {
  int status = 0;
  std::string body;
  bool network_error = false;
  std::string error;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const Headers& headers,
                            const std::string& body) = 0;
};

// cpp-httplib-backed transport (HTTP and HTTPS).
std::shared_ptr<Transport> make_http_transport();

// POST with transient-failure retries (network errors, 408/429/5xx).
HttpResponse post_with_retry(Transport& transport, const std::string& url,
                             const Headers& headers, const std::string& body,
                             const RetryPolicy& retry);

struct ChatEndpoint {
  std::string base_url;
  std::string chat_path = "/v1/chat/completions";
  std::string model_name;
  std::string credential_env;
  double temperature = 0.0;
  RetryPolicy retry;
};

struct ChatResult {
  std::string content;  // assistant message content
  std::string body;     // verbatim response payload
  double latency_ms = 0.0;
};

// Single-turn chat completion; raises on endpoint failure, empty content, or
// a body that does not carry choices[0].message.content.
ChatResult chat_complete(Transport& transport, const ChatEndpoint& endpoint,
                         const std::string& prompt);

// Content-addressed verdict cache: (detector id, SHA-256 of NFC-normalized
// text) -> verdict. Persisted as an append-only JSONL file; safe under
// concurrent reads and serialized appends.
class VerdictCache {
 public:
  VerdictCache() = default;  // in-memory only
  explicit VerdictCache(std::filesystem::path path);

  static std::string content_key(std::string_view text);

  std::optional<Verdict> lookup(const std::string& detector_id,
                                const std::string& key) const;
  void store(const std::string& detector_id, const std::string& key,
             const Verdict& verdict);

  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, Verdict> entries_;
  std::optional<std::ofstream> file_;
};

struct BatchItem {
  std::optional<Verdict> verdict;
  std::string error;

  bool ok() const { return verdict.has_value(); }
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Transport> transport,
                   std::shared_ptr<VerdictCache> cache = nullptr);

  Verdict classify(const std::string& text, const DetectorSpec& spec);

  // Bounded-parallel classify: at most spec.max_parallel requests in flight,
  // output order matches input order, per-item failures do not abort the rest.
  std::vector<BatchItem> classify_batch(std::span<const std::string> texts,
                                        const DetectorSpec& spec);

  // Strict JSON {"quality_score": n}, n in 1..5; chat backend only.
  QualityScore judge_quality(const std::string& context,
                             const std::string& response,
                             const DetectorSpec& spec);

  // Same mechanics as classify; the caller designates this spec as the
  // independent judge and RoleConfig enforces the id separation.
  Verdict judge_toxicity(const std::string& text, const DetectorSpec& spec);

 private:
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<VerdictCache> cache_;
};

// Role separation: the training-time adversarial detector, the independent
// toxicity judge, and the evaluated detectors must be pairwise distinct.
struct RoleConfig {
  std::string f_adv_id;
  std::string j_tox_id;
  std::vector<std::string> evaluated_ids;

  void validate() const;
};

}  // namespace toxred::gateway
