// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "toxred/gateway.hpp"

namespace toxred::testing {

// Scripted transport with concurrency instrumentation.
class FakeTransport : public gateway::Transport {
 public:
  using Handler = std::function<gateway::HttpResponse(
      const std::string& url, const gateway::Headers& headers,
      const std::string& body)>;

  explicit FakeTransport(Handler handler, int delay_ms = 0)
      : handler_(std::move(handler)), delay_ms_(delay_ms) {}

  gateway::HttpResponse post(const std::string& url,
                             const gateway::Headers& headers,
                             const std::string& body) override {
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    if (delay_ms_ > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    }
    gateway::HttpResponse response = handler_(url, headers, body);
    --in_flight_;
    ++calls_;
    return response;
  }

  int max_in_flight() const { return max_in_flight_.load(); }
  int calls() const { return calls_.load(); }

 private:
  Handler handler_;
  int delay_ms_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> calls_{0};
};

// 200 response shaped like a chat completion carrying `content`.
inline gateway::HttpResponse chat_response(const std::string& content) {
  nlohmann::json body{
      {"choices",
       nlohmann::json::array(
           {nlohmann::json{{"message", {{"role", "assistant"},
                                        {"content", content}}}}})}};
  return gateway::HttpResponse{.status = 200, .body = body.dump()};
}

// Extracts the user prompt from a chat-completion request body.
inline std::string prompt_of(const std::string& request_body) {
  const nlohmann::json doc = nlohmann::json::parse(request_body);
  return doc.at("messages").at(0).at("content").get<std::string>();
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("toxred_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct CliResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

// Runs the CLI binary with the given argument string.
inline CliResult run_cli(const std::string& binary, const std::string& args,
                         const TempDir& dir) {
  const std::filesystem::path out_path = dir.file("cli_stdout.txt");
  const std::filesystem::path err_path = dir.file("cli_stderr.txt");
  const std::string command = binary + " " + args + " > " + out_path.string() +
                              " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

}  // namespace toxred::testing
