#include "judgekit/mock_server.hpp"

#include <chrono>
#include <cstdio>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "judgekit/random.hpp"
#include "judgekit/serialization.hpp"

namespace judgekit::inference {
namespace {

using json = nlohmann::json;

constexpr std::size_t kServerThreads = 32;

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json error_body(int status, std::string_view message) {
  return json{{"error", {{"message", message}, {"code", status}}}};
}

bool applies(const ScenarioEntry& e, std::string_view model) {
  return !e.model || *e.model == model;
}

}  // namespace

std::string prompt_fingerprint(std::string_view prompt) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
  return std::string(buf, 16);
}

std::vector<ScenarioEntry> load_scenario(const std::filesystem::path& path) {
  std::vector<ScenarioEntry> out;
  for_each_jsonl(path, [&](std::size_t, const Json& j) {
    if (!j.is_object()) {
      throw ParseError(0, "scenario entry must be an object");
    }
    ScenarioEntry e;
    e.match = j.value("match", std::string("*"));
    if (j.contains("model") && !j["model"].is_null()) {
      e.model = j["model"].get<std::string>();
    }
    if (j.contains("respond") && !j["respond"].is_null()) {
      e.respond = j["respond"].get<std::string>();
    }
    e.status = j.value("status", 200);
    e.delay_ms = j.value("delay_ms", 0);
    if (j.contains("times") && !j["times"].is_null()) {
      e.times = j["times"].get<int>();
      if (*e.times < 0) {
        throw ParseError(0, "'times' must be >= 0");
      }
    }
    e.echo = j.value("echo", false);
    if (j.contains("embedding") && !j["embedding"].is_null()) {
      e.embedding = j["embedding"].get<std::vector<double>>();
    }
    if (e.status < 100 || e.status > 599) {
      throw ParseError(0, "'status' must be an HTTP status code");
    }
    out.push_back(std::move(e));
  });
  return out;
}

class MockServer::InFlight {
 public:
  explicit InFlight(MockServer& s) : s_(s) {
    const std::size_t now = s_.in_flight_.fetch_add(1) + 1;
    std::size_t peak = s_.peak_.load();
    while (now > peak && !s_.peak_.compare_exchange_weak(peak, now)) {
    }
  }
  ~InFlight() { s_.in_flight_.fetch_sub(1); }
  InFlight(const InFlight&) = delete;
  InFlight& operator=(const InFlight&) = delete;

 private:
  MockServer& s_;
};

MockServer::MockServer(std::vector<ScenarioEntry> scenario, MockServerOptions options)
    : scenario_(std::move(scenario)),
      uses_(scenario_.size(), 0),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  server_->new_task_queue = [] { return new httplib::ThreadPool(kServerThreads); };
  // No SO_REUSEPORT: a taken port has to fail instead of being shared.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  server_->Post(R"(.*/chat/completions)",
                [this](const httplib::Request& req, httplib::Response& res) { handle_chat(req, res); });
  server_->Post(R"(.*/embeddings)",
                [this](const httplib::Request& req, httplib::Response& res) { handle_embeddings(req, res); });

  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw BindError("cannot bind mock server to " + options_.host + ":" + std::to_string(options_.port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockServer::~MockServer() { stop(); }

void MockServer::stop() {
  if (server_ && thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string MockServer::base_url() const { return "http://" + options_.host + ":" + std::to_string(port_); }

MockServer::Match MockServer::take(std::string_view fingerprint, std::string_view model, std::string_view prompt,
                                   bool want_embedding) {
  std::lock_guard lock(mu_);
  auto usable = [&](std::size_t i) {
    const auto& e = scenario_[i];
    if (!applies(e, model)) {
      return false;
    }
    if (e.times && uses_[i] >= *e.times) {
      return false;
    }
    // Embedding requests only consume entries that carry a vector (or a failure).
    return !want_embedding || e.embedding || e.status != 200;
  };
  std::optional<std::size_t> hit;
  for (std::size_t i = 0; i < scenario_.size() && !hit; ++i) {
    if (scenario_[i].match == fingerprint && usable(i)) {
      hit = i;
    }
  }
  for (std::size_t i = 0; i < scenario_.size() && !hit; ++i) {
    if (scenario_[i].match == "*" && usable(i)) {
      hit = i;
    }
  }
  Match m;
  if (!hit) {
    if (options_.default_response && !want_embedding) {
      m.status = 200;
      m.content = *options_.default_response;
    }
    return m;
  }
  ++uses_[*hit];
  const auto& e = scenario_[*hit];
  m.status = e.status;
  m.delay_ms = e.delay_ms;
  m.content = e.echo ? std::string(prompt) : e.respond;
  m.embedding = e.embedding ? &*e.embedding : nullptr;
  return m;
}

void MockServer::record(std::string_view path, std::string_view model, std::string_view fingerprint,
                        std::string_view prompt, int status) {
  std::lock_guard lock(mu_);
  TranscriptEntry t;
  t.seq = transcript_.size();
  t.path = path;
  t.model = model;
  t.fingerprint = fingerprint;
  t.prompt = prompt;
  t.status = status;
  transcript_.push_back(std::move(t));
}

void MockServer::handle_chat(const httplib::Request& req, httplib::Response& res) {
  InFlight guard(*this);
  json body = json::parse(req.body, nullptr, false);
  std::string model;
  std::string prompt;
  bool well_formed = body.is_object() && body.contains("messages") && body["messages"].is_array();
  if (well_formed) {
    model = body.value("model", std::string());
    for (const auto& m : body["messages"]) {
      if (m.is_object() && m.value("role", std::string()) == "user" && m.contains("content") &&
          m["content"].is_string()) {
        prompt = m["content"].get<std::string>();
      }
    }
  }
  if (!well_formed) {
    record(req.path, model, "", "", 400);
    reply_json(res, 400, error_body(400, "request needs a messages array"));
    return;
  }
  const std::string fp = prompt_fingerprint(prompt);
  const Match m = take(fp, model, prompt, false);
  record(req.path, model, fp, prompt, m.status);
  if (m.delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(m.delay_ms));
  }
  if (m.status != 200) {
    reply_json(res, m.status, error_body(m.status, m.status == 404 ? "no scripted response" : "scripted failure"));
    return;
  }
  json reply;
  reply["object"] = "chat.completion";
  reply["model"] = model;
  reply["choices"] = json::array(
      {json{{"index", 0}, {"message", {{"role", "assistant"}, {"content", m.content}}}, {"finish_reason", "stop"}}});
  reply_json(res, 200, reply);
}

void MockServer::handle_embeddings(const httplib::Request& req, httplib::Response& res) {
  InFlight guard(*this);
  json body = json::parse(req.body, nullptr, false);
  if (!body.is_object() || !body.contains("input")) {
    record(req.path, "", "", "", 400);
    reply_json(res, 400, error_body(400, "request needs an input"));
    return;
  }
  const std::string model = body.value("model", std::string());
  std::vector<std::string> inputs;
  if (body["input"].is_string()) {
    inputs.push_back(body["input"].get<std::string>());
  } else if (body["input"].is_array()) {
    for (const auto& x : body["input"]) {
      inputs.push_back(x.is_string() ? x.get<std::string>() : x.dump());
    }
  }
  json data = json::array();
  int delay_ms = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string fp = prompt_fingerprint(inputs[i]);
    const Match m = take(fp, model, inputs[i], true);
    record(req.path, model, fp, inputs[i], m.status);
    delay_ms = std::max(delay_ms, m.delay_ms);
    if (m.status != 200 || m.embedding == nullptr) {
      const int status = m.status != 200 ? m.status : 404;
      reply_json(res, status, error_body(status, "no scripted embedding"));
      return;
    }
    data.push_back(json{{"object", "embedding"}, {"index", i}, {"embedding", *m.embedding}});
  }
  if (delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
  }
  reply_json(res, 200, json{{"object", "list"}, {"model", model}, {"data", std::move(data)}});
}

std::vector<TranscriptEntry> MockServer::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

std::size_t MockServer::request_count() const {
  std::lock_guard lock(mu_);
  return transcript_.size();
}

void MockServer::write_transcript(const std::filesystem::path& path) const {
  JsonlWriter out(path);
  for (const auto& t : transcript()) {
    Json j;
    j["seq"] = t.seq;
    j["path"] = t.path;
    j["model"] = t.model;
    j["fingerprint"] = t.fingerprint;
    j["status"] = t.status;
    j["prompt"] = t.prompt;
    out.write(j);
  }
}

}  // namespace judgekit::inference
