#pragma once

// Chat-completion and embedding clients.
//
// Wire format: POST {base_url}/chat/completions with a single user message,
// reading choices[0].message.content; POST {base_url}/embeddings reading
// data[i].embedding. The bearer token comes from the environment variable
// named by EndpointConfig::api_key_env, never from config files.

#include <atomic>
#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "judgekit/embedding.hpp"
#include "judgekit/error.hpp"

namespace judgekit::inference {

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  double temperature = 0.0;
  int max_tokens = 2048;
  int max_in_flight = 4;
  int timeout_ms = 60000;
  int retries = 3;
  int backoff_ms = 500;

  /// Throws DomainError when an invariant does not hold.
  void validate() const;
};

enum class ErrorKind {
  Timeout,
  RateLimited,
  ServerError,
  Transport,
  MalformedResponse,
  Unauthorized,
  HttpStatus,
};

std::string_view to_string(ErrorKind k) noexcept;

class InferenceError : public Error {
 public:
  InferenceError(ErrorKind kind, const std::string& what, int status = 0)
      : Error(what), kind_(kind), status_(status) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// HTTP status when one was received, else 0.
  int status() const noexcept { return status_; }

 private:
  ErrorKind kind_;
  int status_;
};

struct RequestOptions {
  /// Overrides EndpointConfig::temperature for this request.
  std::optional<double> temperature;
};

/// Anything that can answer prompts. Implementations must be safe to call
/// from several threads at once.
class InferenceClient {
 public:
  virtual ~InferenceClient() = default;

  /// Returns the first choice's message content.
  virtual std::string complete(const std::string& prompt, const RequestOptions& options = {}) = 0;

  /// Raw (unnormalized) vectors, one per text, in input order.
  virtual std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) = 0;

  /// Upper bound on concurrently outstanding requests.
  virtual std::size_t max_in_flight() const = 0;
};

/// HTTP implementation with retries, exponential backoff and a global
/// in-flight bound shared by every caller of this instance.
class HttpClient final : public InferenceClient {
 public:
  explicit HttpClient(EndpointConfig cfg);
  ~HttpClient() override;

  HttpClient(const HttpClient&) = delete;
  HttpClient& operator=(const HttpClient&) = delete;

  std::string complete(const std::string& prompt, const RequestOptions& options = {}) override;
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) override;
  std::size_t max_in_flight() const override;

  const EndpointConfig& config() const noexcept { return cfg_; }
  /// HTTP requests sent, including retries.
  std::size_t attempts() const noexcept { return attempts_.load(); }

 private:
  struct Response;
  Response post_with_retries(const std::string& path, const std::string& body);

  EndpointConfig cfg_;
  std::string origin_;  // scheme://host[:port]
  std::string prefix_;  // path below the origin, no trailing slash
  std::counting_semaphore<> in_flight_;
  std::atomic<std::size_t> attempts_{0};
};

struct SlotError {
  ErrorKind kind;
  std::string message;
};

/// Outcome for one prompt of a batch.
struct CompletionResult {
  std::optional<std::string> text;
  std::optional<SlotError> error;

  bool ok() const noexcept { return text.has_value(); }
};

/// Fans prompts out over at most client.max_in_flight() workers. Results are
/// index-aligned with `prompts`; failures are captured per slot.
std::vector<CompletionResult> complete_batch(InferenceClient& client, std::span<const std::string> prompts,
                                             const RequestOptions& options = {});

/// Embeds `texts` and normalizes the result. `ids` defaults to "0".."n-1".
/// Throws DimensionMismatch on ragged replies and DomainError on zero vectors.
EmbeddingSet embed(InferenceClient& client, std::span<const std::string> texts,
                   std::span<const std::string> ids = {});

/// Builds the /chat/completions request body.
std::string chat_request_body(const EndpointConfig& cfg, const std::string& prompt, double temperature);

}  // namespace judgekit::inference
