#include "judgekit/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace judgekit::inference {
namespace {

using json = nlohmann::json;

constexpr int kMaxBackoffMs = 30'000;

bool retryable(ErrorKind k) noexcept {
  return k == ErrorKind::Timeout || k == ErrorKind::RateLimited || k == ErrorKind::ServerError ||
         k == ErrorKind::Transport;
}

// Releases one in-flight slot on scope exit.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

ErrorKind kind_for_status(int status) noexcept {
  if (status == 401 || status == 403) {
    return ErrorKind::Unauthorized;
  }
  if (status == 429) {
    return ErrorKind::RateLimited;
  }
  if (status == 408) {
    return ErrorKind::Timeout;
  }
  if (status >= 500) {
    return ErrorKind::ServerError;
  }
  return ErrorKind::HttpStatus;
}

std::ptrdiff_t validated_bound(const EndpointConfig& cfg) {
  cfg.validate();
  return cfg.max_in_flight;
}

}  // namespace

std::string_view to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::Timeout:
      return "Timeout";
    case ErrorKind::RateLimited:
      return "RateLimited";
    case ErrorKind::ServerError:
      return "ServerError";
    case ErrorKind::Transport:
      return "Transport";
    case ErrorKind::MalformedResponse:
      return "MalformedResponse";
    case ErrorKind::Unauthorized:
      return "Unauthorized";
    case ErrorKind::HttpStatus:
      return "HttpStatus";
  }
  return "?";
}

void EndpointConfig::validate() const {
  if (base_url.empty()) {
    throw DomainError("endpoint base_url is empty");
  }
  if (max_in_flight < 1) {
    throw DomainError("max_in_flight must be >= 1");
  }
  if (retries < 0) {
    throw DomainError("retries must be >= 0");
  }
  if (!(temperature >= 0.0)) {
    throw DomainError("temperature must be >= 0");
  }
  if (timeout_ms < 1 || backoff_ms < 0 || max_tokens < 1) {
    throw DomainError("timeout_ms and max_tokens must be positive, backoff_ms non-negative");
  }
}

struct HttpClient::Response {
  int status = 0;
  std::string body;
};

HttpClient::HttpClient(EndpointConfig cfg)
    : cfg_(std::move(cfg)), in_flight_(validated_bound(cfg_)) {
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw DomainError("base_url must include a scheme: " + cfg_.base_url);
  }
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  origin_ = cfg_.base_url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? std::string() : cfg_.base_url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') {
    prefix_.pop_back();
  }
}

HttpClient::~HttpClient() = default;

std::size_t HttpClient::max_in_flight() const { return static_cast<std::size_t>(cfg_.max_in_flight); }

HttpClient::Response HttpClient::post_with_retries(const std::string& path, const std::string& body) {
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const std::string url_path = prefix_ + path;
  const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);

  for (int attempt = 0;; ++attempt) {
    ErrorKind kind;
    std::string message;
    int status = 0;
    {
      SlotGuard slot(in_flight_);
      attempts_.fetch_add(1);
      httplib::Client http(origin_);
      http.set_connection_timeout(timeout);
      http.set_read_timeout(timeout);
      http.set_write_timeout(timeout);
      auto res = http.Post(url_path, headers, body, "application/json");
      if (res) {
        status = res->status;
        if (status >= 200 && status < 300) {
          return {status, std::move(res->body)};
        }
        kind = kind_for_status(status);
        message = "HTTP " + std::to_string(status) + " from " + origin_ + url_path;
      } else {
        const auto err = res.error();
        kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) ? ErrorKind::Timeout
                                                                                         : ErrorKind::Transport;
        message = httplib::to_string(err) + " (" + origin_ + url_path + ")";
      }
    }
    if (!retryable(kind) || attempt >= cfg_.retries) {
      if (retryable(kind) && cfg_.retries > 0) {
        message += " after " + std::to_string(attempt + 1) + " attempts";
      }
      throw InferenceError(kind, message, status);
    }
    const double delay = std::min<double>(kMaxBackoffMs, cfg_.backoff_ms * std::pow(2.0, attempt));
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(delay)));
  }
}

std::string chat_request_body(const EndpointConfig& cfg, const std::string& prompt, double temperature) {
  json body;
  body["model"] = cfg.model_name;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = temperature;
  body["max_tokens"] = cfg.max_tokens;
  body["stream"] = false;
  return body.dump();
}

std::string HttpClient::complete(const std::string& prompt, const RequestOptions& options) {
  const double temperature = options.temperature.value_or(cfg_.temperature);
  const auto res = post_with_retries("/chat/completions", chat_request_body(cfg_, prompt, temperature));
  json reply;
  try {
    reply = json::parse(res.body);
  } catch (const json::parse_error&) {
    throw InferenceError(ErrorKind::MalformedResponse, "chat completion reply is not JSON", res.status);
  }
  const json* content = nullptr;
  if (reply.is_object() && reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
    const json& first = reply["choices"][0];
    if (first.is_object() && first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content")) {
      content = &first["message"]["content"];
    }
  }
  if (content == nullptr || !content->is_string()) {
    throw InferenceError(ErrorKind::MalformedResponse, "chat completion reply has no choices[0].message.content",
                         res.status);
  }
  return content->get<std::string>();
}

std::vector<std::vector<double>> HttpClient::embed_raw(std::span<const std::string> texts) {
  if (texts.empty()) {
    return {};
  }
  json body;
  body["model"] = cfg_.model_name;
  body["input"] = json(std::vector<std::string>(texts.begin(), texts.end()));
  const auto res = post_with_retries("/embeddings", body.dump());
  json reply;
  try {
    reply = json::parse(res.body);
  } catch (const json::parse_error&) {
    throw InferenceError(ErrorKind::MalformedResponse, "embedding reply is not JSON", res.status);
  }
  if (!reply.is_object() || !reply.contains("data") || !reply["data"].is_array() ||
      reply["data"].size() != texts.size()) {
    throw InferenceError(ErrorKind::MalformedResponse, "embedding reply needs one data entry per input", res.status);
  }
  std::vector<std::vector<double>> out(texts.size());
  std::vector<bool> seen(texts.size(), false);
  for (std::size_t i = 0; i < reply["data"].size(); ++i) {
    const json& item = reply["data"][i];
    std::size_t index = i;
    if (item.contains("index") && item["index"].is_number_unsigned()) {
      index = item["index"].get<std::size_t>();
    }
    if (index >= texts.size() || seen[index] || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw InferenceError(ErrorKind::MalformedResponse, "malformed embedding entry " + std::to_string(i),
                           res.status);
    }
    seen[index] = true;
    for (const auto& x : item["embedding"]) {
      if (!x.is_number()) {
        throw InferenceError(ErrorKind::MalformedResponse, "non-numeric embedding value", res.status);
      }
      out[index].push_back(x.get<double>());
    }
  }
  return out;
}

std::vector<CompletionResult> complete_batch(InferenceClient& client, std::span<const std::string> prompts,
                                             const RequestOptions& options) {
  std::vector<CompletionResult> results(prompts.size());
  if (prompts.empty()) {
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < prompts.size(); i = next.fetch_add(1)) {
      try {
        results[i].text = client.complete(prompts[i], options);
      } catch (const InferenceError& e) {
        results[i].error = SlotError{e.kind(), e.what()};
      } catch (const std::exception& e) {
        results[i].error = SlotError{ErrorKind::Transport, e.what()};
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(client.max_in_flight(), prompts.size()));
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back(worker);
  }
  pool.clear();  // joins
  return results;
}

EmbeddingSet embed(InferenceClient& client, std::span<const std::string> texts, std::span<const std::string> ids) {
  std::vector<std::string> id_list;
  if (ids.empty()) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
      id_list.push_back(std::to_string(i));
    }
  } else {
    if (ids.size() != texts.size()) {
      throw SizeMismatch("embed: ids and texts differ in length");
    }
    id_list.assign(ids.begin(), ids.end());
  }
  auto vectors = client.embed_raw(texts);
  if (vectors.size() != texts.size()) {
    throw InferenceError(ErrorKind::MalformedResponse, "embedding count does not match input count");
  }
  return EmbeddingSet::from_raw(std::move(id_list), std::move(vectors));
}

}  // namespace judgekit::inference
