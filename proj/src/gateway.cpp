// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#include "toxred/gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <set>
#include <thread>

#include "toxred/jsonl.hpp"
#include "toxred/prompts.hpp"
#include "toxred/unicode.hpp"

namespace toxred::gateway {

using nlohmann::json;

const char* to_string(Backend backend) {
  switch (backend) {
    case Backend::MODERATION_API: return "moderation_api";
    case Backend::CHAT_JUDGE: return "chat_judge";
    case Backend::LEXICON_MOCK: return "lexicon_mock";
  }
  return "unknown";
}

Backend backend_from_string(const std::string& s) {
  if (s == "moderation_api") return Backend::MODERATION_API;
  if (s == "chat_judge") return Backend::CHAT_JUDGE;
  if (s == "lexicon_mock") return Backend::LEXICON_MOCK;
  raise(ErrorKind::kConfig, "unknown backend: " + s);
}

void DetectorSpec::validate() const {
  if (id.empty()) raise(ErrorKind::kConfig, "detector spec without id");
  const bool has_url = !base_url.empty();
  if (backend == Backend::LEXICON_MOCK && has_url) {
    raise(ErrorKind::kConfig, "detector '" + id + "': mock takes no base_url");
  }
  if (backend != Backend::LEXICON_MOCK && !has_url) {
    raise(ErrorKind::kConfig, "detector '" + id + "': base_url required");
  }
  if (max_parallel < 1) {
    raise(ErrorKind::kConfig, "detector '" + id + "': max_parallel must be >= 1");
  }
  if (retry.max_attempts < 1) {
    raise(ErrorKind::kConfig, "detector '" + id + "': max_attempts must be >= 1");
  }
  if (backend == Backend::MODERATION_API) {
    if (label_pointer.empty() || label_map.empty()) {
      raise(ErrorKind::kConfig,
            "detector '" + id +
                "': moderation backend needs label_pointer and label_map");
    }
    for (const auto& [value, mapped] : label_map) {
      if (mapped != "safe" && mapped != "toxic") {
        raise(ErrorKind::kConfig,
              "detector '" + id + "': label_map values must be safe|toxic");
      }
    }
  }
}

DetectorSpec detector_spec_from_json(const json& doc) {
  DetectorSpec spec;
  spec.id = doc.at("id").get<std::string>();
  spec.backend = backend_from_string(doc.at("backend").get<std::string>());
  spec.base_url = doc.value("base_url", std::string());
  spec.model_name = doc.value("model_name", std::string());
  spec.credential_env = doc.value("credential_env", std::string());
  spec.max_parallel = doc.value("max_parallel", 4);
  if (doc.contains("retry")) {
    const json& retry = doc.at("retry");
    spec.retry.max_attempts = retry.value("max_attempts", 3);
    if (retry.contains("backoff_ms")) {
      spec.retry.backoff_ms = retry.at("backoff_ms").get<std::vector<int>>();
    }
  }
  spec.chat_path = doc.value("chat_path", std::string("/v1/chat/completions"));
  spec.temperature = doc.value("temperature", 0.0);
  spec.request_text_field = doc.value("request_text_field", std::string("text"));
  if (doc.contains("extra_body")) spec.extra_body = doc.at("extra_body");
  spec.label_pointer = doc.value("label_pointer", std::string());
  if (doc.contains("label_map")) {
    spec.label_map =
        doc.at("label_map").get<std::map<std::string, std::string>>();
  }
  if (doc.contains("lexicon")) {
    spec.lexicon = doc.at("lexicon").get<std::vector<std::string>>();
  }
  spec.validate();
  return spec;
}

std::vector<DetectorSpec> load_detector_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open detector config " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains("detectors")) {
    raise(ErrorKind::kConfig,
          path.string() + ": expected {\"detectors\": [...]}");
  }
  std::vector<DetectorSpec> specs;
  std::set<std::string> seen;
  for (const json& entry : doc.at("detectors")) {
    DetectorSpec spec = detector_spec_from_json(entry);
    if (!seen.insert(spec.id).second) {
      raise(ErrorKind::kConfig, "duplicate detector id '" + spec.id + "'");
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace {

class HttpTransport : public Transport {
 public:
  HttpResponse post(const std::string& url, const Headers& headers,
                    const std::string& body) override {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      raise(ErrorKind::kConfig, "URL without scheme: " + url);
    }
    const std::size_t path_start = url.find('/', scheme_end + 3);
    const std::string origin =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers request_headers;
    for (const auto& [name, value] : headers) {
      request_headers.emplace(name, value);
    }
    httplib::Result result =
        client.Post(path, request_headers, body, "application/json");
    HttpResponse response;
    if (!result) {
      response.network_error = true;
      response.error = httplib::to_string(result.error());
      return response;
    }
    response.status = result->status;
    response.body = result->body;
    return response;
  }
};

bool is_transient(const HttpResponse& response) {
  if (response.network_error) return true;
  return response.status == 408 || response.status == 429 ||
         response.status >= 500;
}

std::string trim_ascii(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string lower_ascii(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return text;
}

Headers auth_headers(const std::string& credential_env) {
  Headers headers;
  if (!credential_env.empty()) {
    const char* secret = std::getenv(credential_env.c_str());
    if (secret == nullptr || *secret == '\0') {
      raise(ErrorKind::kConfig,
            "credential environment variable '" + credential_env + "' is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + secret);
  }
  return headers;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

std::shared_ptr<Transport> make_http_transport() {
  return std::make_shared<HttpTransport>();
}

HttpResponse post_with_retry(Transport& transport, const std::string& url,
                             const Headers& headers, const std::string& body,
                             const RetryPolicy& retry) {
  HttpResponse response;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    response = transport.post(url, headers, body);
    if (!is_transient(response)) break;
    if (attempt == retry.max_attempts) {
      raise(ErrorKind::kEndpoint,
            "request to " + url + " failed after " +
                std::to_string(retry.max_attempts) + " attempts: " +
                (response.network_error ? response.error
                                        : "HTTP " + std::to_string(response.status)));
    }
    const std::size_t slot = std::min<std::size_t>(
        static_cast<std::size_t>(attempt - 1),
        retry.backoff_ms.empty() ? 0 : retry.backoff_ms.size() - 1);
    const int sleep_ms = retry.backoff_ms.empty() ? 0 : retry.backoff_ms[slot];
    if (sleep_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
    }
  }
  if (response.status < 200 || response.status >= 300) {
    raise(ErrorKind::kEndpoint,
          "request to " + url + " returned HTTP " + std::to_string(response.status));
  }
  return response;
}

ChatResult chat_complete(Transport& transport, const ChatEndpoint& endpoint,
                         const std::string& prompt) {
  json body{{"model", endpoint.model_name},
            {"temperature", endpoint.temperature},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
  Headers headers = auth_headers(endpoint.credential_env);
  const auto start = std::chrono::steady_clock::now();
  const HttpResponse response = post_with_retry(
      transport, endpoint.base_url + endpoint.chat_path, headers, body.dump(),
      endpoint.retry);
  ChatResult result;
  result.latency_ms = elapsed_ms(start);
  result.body = response.body;
  json doc = json::parse(response.body, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorKind::kParse, "chat response is not JSON");
  }
  try {
    result.content =
        doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    raise(ErrorKind::kParse, "chat response lacks choices[0].message.content");
  }
  if (result.content.empty()) {
    raise(ErrorKind::kParse, "chat response content is empty");
  }
  return result;
}

VerdictCache::VerdictCache(std::filesystem::path path) {
  if (std::filesystem::exists(path)) {
    for (const json& row : jsonl::read_file(path)) {
      Verdict verdict;
      verdict.label = label_from_string(row.at("label").get<std::string>());
      verdict.detector_id = row.at("detector_id").get<std::string>();
      verdict.raw = row.value("raw", std::string());
      verdict.latency_ms = row.value("latency_ms", 0.0);
      entries_[{verdict.detector_id, row.at("key").get<std::string>()}] =
          std::move(verdict);
    }
  }
  file_.emplace(path, std::ios::app | std::ios::binary);
  if (!*file_) {
    raise(ErrorKind::kIo, "cannot open cache file " + path.string());
  }
}

std::string VerdictCache::content_key(std::string_view text) {
  return uni::sha256_hex(uni::nfc(text));
}

std::optional<Verdict> VerdictCache::lookup(const std::string& detector_id,
                                            const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find({detector_id, key});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void VerdictCache::store(const std::string& detector_id, const std::string& key,
                         const Verdict& verdict) {
  std::lock_guard lock(mutex_);
  entries_[{detector_id, key}] = verdict;
  if (file_) {
    const json row{{"detector_id", detector_id},
                   {"key", key},
                   {"label", to_string(verdict.label)},
                   {"raw", verdict.raw},
                   {"latency_ms", verdict.latency_ms}};
    *file_ << row.dump() << '\n';
    file_->flush();
  }
}

std::size_t VerdictCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Gateway::Gateway(std::shared_ptr<Transport> transport,
                 std::shared_ptr<VerdictCache> cache)
    : transport_(std::move(transport)), cache_(std::move(cache)) {
  if (!transport_) {
    raise(ErrorKind::kConfig, "Gateway needs a transport");
  }
}

Verdict Gateway::classify(const std::string& text, const DetectorSpec& spec) {
  spec.validate();
  const std::string key = VerdictCache::content_key(text);
  if (cache_) {
    if (std::optional<Verdict> hit = cache_->lookup(spec.id, key)) {
      hit->cached = true;
      hit->latency_ms = 0.0;
      return *hit;
    }
  }

  Verdict verdict;
  verdict.detector_id = spec.id;
  switch (spec.backend) {
    case Backend::LEXICON_MOCK: {
      const std::string normalized = uni::nfc(text);
      json matched = json::array();
      for (const std::string& term : spec.lexicon) {
        if (normalized.find(uni::nfc(term)) != std::string::npos) {
          matched.push_back(term);
        }
      }
      verdict.label = matched.empty() ? Label::SAFE : Label::TOXIC;
      verdict.raw =
          json{{"backend", "lexicon_mock"}, {"matched", matched}}.dump();
      verdict.latency_ms = 0.0;
      break;
    }
    case Backend::CHAT_JUDGE: {
      ChatEndpoint endpoint{.base_url = spec.base_url,
                            .chat_path = spec.chat_path,
                            .model_name = spec.model_name,
                            .credential_env = spec.credential_env,
                            .temperature = spec.temperature,
                            .retry = spec.retry};
      const ChatResult result =
          chat_complete(*transport_, endpoint, prompts::blue_defense(text));
      const std::string answer = lower_ascii(trim_ascii(result.content));
      if (answer == "safe") {
        verdict.label = Label::SAFE;
      } else if (answer == "unsafe") {
        verdict.label = Label::TOXIC;
      } else {
        raise(ErrorKind::kParse,
              "detector '" + spec.id + "' answered neither safe nor unsafe: '" +
                  result.content + "'");
      }
      verdict.raw = result.body;
      verdict.latency_ms = result.latency_ms;
      break;
    }
    case Backend::MODERATION_API: {
      json body = spec.extra_body;
      if (!body.is_object()) body = json::object();
      body[spec.request_text_field] = text;
      Headers headers = auth_headers(spec.credential_env);
      const auto start = std::chrono::steady_clock::now();
      const HttpResponse response = post_with_retry(
          *transport_, spec.base_url, headers, body.dump(), spec.retry);
      verdict.latency_ms = elapsed_ms(start);
      verdict.raw = response.body;
      json doc = json::parse(response.body, nullptr, false);
      if (doc.is_discarded()) {
        raise(ErrorKind::kParse,
              "detector '" + spec.id + "' returned non-JSON body");
      }
      json value;
      try {
        value = doc.at(json::json_pointer(spec.label_pointer));
      } catch (const json::exception&) {
        raise(ErrorKind::kParse,
              "detector '" + spec.id + "': label_pointer '" +
                  spec.label_pointer + "' not found in response");
      }
      const std::string provider_value =
          value.is_string() ? value.get<std::string>() : value.dump();
      auto it = spec.label_map.find(provider_value);
      if (it == spec.label_map.end()) {
        raise(ErrorKind::kParse,
              "detector '" + spec.id + "': unmapped provider value '" +
                  provider_value + "'");
      }
      verdict.label = it->second == "safe" ? Label::SAFE : Label::TOXIC;
      break;
    }
  }
  if (cache_) {
    cache_->store(spec.id, key, verdict);
  }
  return verdict;
}

std::vector<BatchItem> Gateway::classify_batch(std::span<const std::string> texts,
                                               const DetectorSpec& spec) {
  spec.validate();
  if (texts.empty()) {
    raise(ErrorKind::kInvalidArgument, "classify_batch: empty input");
  }
  // Identical texts are classified once; later occurrences share the verdict
  // as cache hits. This keeps the cached flag deterministic under parallel
  // execution.
  std::vector<std::size_t> representative(texts.size());
  std::vector<std::size_t> unique_indices;
  {
    std::map<std::string, std::size_t> first_seen;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto [it, inserted] =
          first_seen.try_emplace(VerdictCache::content_key(texts[i]), i);
      representative[i] = it->second;
      if (inserted) unique_indices.push_back(i);
    }
  }

  std::vector<BatchItem> results(texts.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(spec.max_parallel), unique_indices.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t u = next.fetch_add(1);
        if (u >= unique_indices.size()) return;
        const std::size_t i = unique_indices[u];
        try {
          results[i].verdict = classify(texts[i], spec);
        } catch (const Error& e) {
          results[i].error = e.what();
        } catch (const std::exception& e) {
          results[i].error = e.what();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::size_t rep = representative[i];
    if (rep == i) continue;
    results[i] = results[rep];
    if (results[i].verdict) {
      results[i].verdict->cached = true;
      results[i].verdict->latency_ms = 0.0;
    }
  }
  return results;
}

QualityScore Gateway::judge_quality(const std::string& context,
                                    const std::string& response,
                                    const DetectorSpec& spec) {
  spec.validate();
  if (spec.backend != Backend::CHAT_JUDGE) {
    raise(ErrorKind::kConfig,
          "judge_quality requires a chat_judge backend, got " +
              std::string(to_string(spec.backend)));
  }
  ChatEndpoint endpoint{.base_url = spec.base_url,
                        .chat_path = spec.chat_path,
                        .model_name = spec.model_name,
                        .credential_env = spec.credential_env,
                        .temperature = spec.temperature,
                        .retry = spec.retry};
  const ChatResult result = chat_complete(
      *transport_, endpoint, prompts::quality_rubric(context, response));
  json doc = json::parse(trim_ascii(result.content), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.size() != 1 ||
      !doc.contains("quality_score") ||
      !doc.at("quality_score").is_number_integer()) {
    raise(ErrorKind::kParse,
          "quality judge did not return {\"quality_score\": n}: '" +
              result.content + "'");
  }
  const int score = doc.at("quality_score").get<int>();
  if (score < 1 || score > 5) {
    raise(ErrorKind::kParse,
          "quality_score " + std::to_string(score) + " outside 1..5");
  }
  return QualityScore{.score = score, .raw = result.body};
}

Verdict Gateway::judge_toxicity(const std::string& text,
                                const DetectorSpec& spec) {
  return classify(text, spec);
}

void RoleConfig::validate() const {
  if (j_tox_id.empty()) {
    raise(ErrorKind::kConfig, "role config needs an independent judge id");
  }
  // f_adv may be unset in evaluation-only runs; when set it must stay
  // separate from both other roles.
  if (!f_adv_id.empty() && f_adv_id == j_tox_id) {
    raise(ErrorKind::kConfig,
          "the adversarial detector and the independent judge must differ");
  }
  for (const std::string& id : evaluated_ids) {
    if (id == j_tox_id) {
      raise(ErrorKind::kConfig,
            "independent judge '" + id + "' cannot be an evaluated detector");
    }
    if (!f_adv_id.empty() && id == f_adv_id) {
      raise(ErrorKind::kConfig,
            "adversarial detector '" + id +
                "' is excluded from final evaluation");
    }
  }
}

}  // namespace toxred::gateway
