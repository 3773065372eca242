#pragma once

// Scripted, in-process HTTP endpoint speaking the chat-completions and
// embeddings wire formats. Used by tests and `judgekit serve-mock`.
//
// Scenario JSONL, one entry per line:
//   {"match": <fingerprint or "*">, "respond": text, "status": int,
//    "delay_ms": int, "times": int}
// plus optional "model" (only match requests for that model), "echo"
// (reply with the prompt itself) and "embedding" (vector served from
// /embeddings for a matching input). Entries are tried in file order, exact
// fingerprints before "*". An entry with "times" is exhausted after that
// many uses.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "judgekit/error.hpp"

namespace httplib {
class Server;
class Request;
class Response;
}  // namespace httplib

namespace judgekit::inference {

class BindError : public Error {
 public:
  using Error::Error;
};

/// 16 lowercase hex digits of the FNV-1a 64 hash of the prompt bytes.
std::string prompt_fingerprint(std::string_view prompt);

struct ScenarioEntry {
  std::string match = "*";
  std::optional<std::string> model;
  std::string respond;
  int status = 200;
  int delay_ms = 0;
  std::optional<int> times;
  bool echo = false;
  std::optional<std::vector<double>> embedding;
};

/// Throws ParseError with the offending line.
std::vector<ScenarioEntry> load_scenario(const std::filesystem::path& path);

struct TranscriptEntry {
  std::size_t seq = 0;
  std::string path;
  std::string model;
  std::string fingerprint;
  std::string prompt;
  int status = 0;
};

struct MockServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  /// Reply for unmatched prompts; unmatched requests get 404 when unset.
  std::optional<std::string> default_response;
};

class MockServer {
 public:
  /// Starts listening immediately. Throws BindError when the port is taken.
  explicit MockServer(std::vector<ScenarioEntry> scenario, MockServerOptions options = {});
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const noexcept { return port_; }
  std::string base_url() const;

  std::vector<TranscriptEntry> transcript() const;
  std::size_t request_count() const;
  /// Highest number of requests handled at the same time.
  std::size_t peak_in_flight() const noexcept { return peak_.load(); }

  /// Transcript as JSONL.
  void write_transcript(const std::filesystem::path& path) const;

  void stop();

 private:
  struct Match {
    int status = 404;
    std::string content;
    int delay_ms = 0;
    const std::vector<double>* embedding = nullptr;
  };

  Match take(std::string_view fingerprint, std::string_view model, std::string_view prompt, bool want_embedding);
  void record(std::string_view path, std::string_view model, std::string_view fingerprint,
              std::string_view prompt, int status);
  void handle_chat(const httplib::Request& req, httplib::Response& res);
  void handle_embeddings(const httplib::Request& req, httplib::Response& res);

  class InFlight;

  std::vector<ScenarioEntry> scenario_;
  std::vector<int> uses_;
  MockServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex mu_;
  std::vector<TranscriptEntry> transcript_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

}  // namespace judgekit::inference
