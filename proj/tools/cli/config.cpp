#include "cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace judgekit::cli {
namespace {

// Typed access to one TOML table that rejects keys nobody asked about.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const noexcept { return t_ != nullptr; }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    known_.insert(key);
    if (t_ == nullptr) {
      return std::nullopt;
    }
    const toml::node* n = t_->get(key);
    if (n == nullptr) {
      return std::nullopt;
    }
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) {  // accepts integers too
        return *v;
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = n->value_exact<std::string>()) {
        return *v;
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = n->value_exact<bool>()) {
        return *v;
      }
    } else {
      if (auto v = n->value_exact<std::int64_t>()) {
        return static_cast<T>(*v);
      }
    }
    throw ConfigError(where(key) + ": wrong type");
  }

  template <typename T>
  void read(const std::string& key, T& into) {
    if (auto v = get<T>(key)) {
      into = *v;
    }
  }

  void read_path(const std::string& key, std::filesystem::path& into) {
    if (auto v = get<std::string>(key)) {
      into = *v;
    }
  }

  void read_path(const std::string& key, std::optional<std::filesystem::path>& into) {
    if (auto v = get<std::string>(key)) {
      into = std::filesystem::path(*v);
    }
  }

  std::int64_t non_negative(const std::string& key, std::int64_t fallback) {
    const auto v = get<std::int64_t>(key).value_or(fallback);
    if (v < 0) {
      throw ConfigError(where(key) + " must be >= 0");
    }
    return v;
  }

  Section sub(const std::string& key) {
    known_.insert(key);
    const toml::table* child = nullptr;
    if (t_ != nullptr) {
      if (const toml::node* n = t_->get(key)) {
        child = n->as_table();
        if (child == nullptr) {
          throw ConfigError(where(key) + " must be a table");
        }
      }
    }
    return Section(child, name_.empty() ? key : name_ + "." + key);
  }

  /// Keys present in the file, in file order.
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    if (t_ != nullptr) {
      for (const auto& [k, v] : *t_) {
        out.emplace_back(k.str());
      }
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& k : keys()) {
      if (known_.count(k) == 0) {
        throw ConfigError("unknown key " + where(k));
      }
    }
  }

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const toml::table* t_;
  std::string name_;
  std::set<std::string> known_;
};

inference::EndpointConfig read_endpoint(Section s) {
  inference::EndpointConfig e;
  if (s.get<std::string>("api_key")) {
    throw ConfigError(s.where("api_key") +
                      ": keys do not belong in config files; set api_key_env to the name of an environment variable");
  }
  s.read("base_url", e.base_url);
  s.read("model", e.model_name);
  s.read("api_key_env", e.api_key_env);
  s.read("temperature", e.temperature);
  s.read("max_tokens", e.max_tokens);
  s.read("max_in_flight", e.max_in_flight);
  s.read("timeout_ms", e.timeout_ms);
  s.read("retries", e.retries);
  s.read("backoff_ms", e.backoff_ms);
  s.reject_unknown();
  try {
    e.validate();
  } catch (const DomainError& err) {
    throw ConfigError(s.where("") + " " + err.what());
  }
  return e;
}

template <typename Fn>
auto checked(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

AppConfig build(const toml::table& root, const std::filesystem::path& base_dir) {
  AppConfig cfg;
  cfg.base_dir = base_dir;
  Section top(&root, "");
  cfg.seed = static_cast<std::uint64_t>(top.non_negative("seed", 0));

  Section endpoints = top.sub("endpoints");
  for (const auto& name : endpoints.keys()) {
    cfg.endpoints[name] = read_endpoint(endpoints.sub(name));
  }
  endpoints.reject_unknown();

  Section templates = top.sub("templates");
  if (auto v = templates.get<std::string>("variant")) {
    cfg.variant = checked("templates.variant", [&] { return prompt::parse_variant(*v); });
    if (!prompt::is_judgment(cfg.variant)) {
      throw ConfigError("templates.variant must be a judgment variant");
    }
  }
  templates.read_path("dir", cfg.template_dir);
  templates.reject_unknown();

  Section curate = top.sub("curate");
  curate.read_path("dataset", cfg.curate.dataset);
  curate.read_path("embeddings", cfg.curate.embeddings);
  curate.read_path("output", cfg.curate.output);
  curate.read_path("report", cfg.curate.report);
  curate.read_path("checkpoint_dir", cfg.curate.checkpoint_dir);
  cfg.curate.k = static_cast<std::size_t>(curate.non_negative("k", 3));
  curate.read("sample_temperature", cfg.curate.sample_temperature);
  if (curate.get<std::int64_t>("target_n")) {
    cfg.curate.target_n = static_cast<std::size_t>(curate.non_negative("target_n", 0));
  }
  if (cfg.curate.k < 1) {
    throw ConfigError("curate.k must be >= 1");
  }
  curate.reject_unknown();

  Section pairs = top.sub("pairs");
  pairs.read_path("dataset", cfg.pairs.dataset);
  pairs.read_path("output", cfg.pairs.output);
  pairs.read_path("stats", cfg.pairs.stats);
  pairs.read_path("judge_outputs", cfg.pairs.judge_outputs);
  pairs.read("mode", cfg.pairs.mode);
  pairs.read("iteration", cfg.pairs.iteration);
  pairs.read("critic_retries", cfg.pairs.critic_retries);
  cfg.pairs.sampling_n = static_cast<std::size_t>(pairs.non_negative("sampling_n", 16));
  pairs.read("sampling_temperature", cfg.pairs.sampling_temperature);
  if (cfg.pairs.mode != "critic" && cfg.pairs.mode != "sampling") {
    throw ConfigError("pairs.mode must be \"critic\" or \"sampling\"");
  }
  if (cfg.pairs.iteration < 1 || cfg.pairs.critic_retries < 0 || cfg.pairs.sampling_n < 2) {
    throw ConfigError("pairs: iteration >= 1, critic_retries >= 0 and sampling_n >= 2 required");
  }
  pairs.reject_unknown();

  Section rewards = top.sub("rewards");
  auto& w = cfg.rewards.weights;
  rewards.read("alpha", w.alpha);
  rewards.read("beta", w.beta_fmt);
  rewards.read("gamma", w.gamma);
  if (auto v = rewards.get<std::string>("strength_mode")) {
    w.strength_mode = checked("rewards.strength_mode", [&] { return parse_strength_mode(*v); });
  }
  rewards.read("margin", w.margin_enabled);
  if (auto v = rewards.get<std::string>("margin_sign")) {
    w.margin_sign = checked("rewards.margin_sign", [&] { return parse_margin_sign(*v); });
  }
  rewards.read_path("output", cfg.rewards.output);
  cfg.rewards.extreme_window = static_cast<std::size_t>(rewards.non_negative("extreme_window", 100));
  rewards.read("extreme_threshold", cfg.rewards.extreme_threshold);
  if (cfg.rewards.extreme_window < 1 || !(cfg.rewards.extreme_threshold > 0.0) ||
      cfg.rewards.extreme_threshold > 1.0) {
    throw ConfigError("rewards: extreme_window >= 1 and extreme_threshold in (0,1] required");
  }
  rewards.reject_unknown();

  Section losses = top.sub("losses");
  auto& o = cfg.losses.objectives;
  losses.read("beta_dpo", o.beta_dpo);
  losses.read("eps_clip", o.eps_clip);
  losses.read("beta_kl", o.beta_kl);
  losses.read("group_size", o.group_size);
  if (auto v = losses.get<std::string>("advantage_norm")) {
    o.advantage_norm = checked("losses.advantage_norm", [&] { return parse_advantage_norm(*v); });
  }
  losses.read_path("output", cfg.losses.output);
  checked("losses", [&] {
    o.validate();
    return 0;
  });
  losses.reject_unknown();

  Section eval = top.sub("eval");
  eval.read_path("suite", cfg.eval.suite);
  eval.read_path("output_dir", cfg.eval.output_dir);
  eval.read("bidirectional", cfg.eval.bidirectional);
  eval.read("weighting", cfg.eval.weighting);
  if (cfg.eval.weighting != "category" && cfg.eval.weighting != "prompt") {
    throw ConfigError("eval.weighting must be \"category\" or \"prompt\"");
  }
  eval.reject_unknown();

  top.reject_unknown();
  return cfg;
}

}  // namespace

const inference::EndpointConfig& AppConfig::endpoint(const std::string& name) const {
  auto it = endpoints.find(name);
  if (it == endpoints.end()) {
    throw ConfigError("no [endpoints." + name + "] in config");
  }
  return it->second;
}

std::filesystem::path AppConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

AppConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  try {
    const toml::table root = toml::parse(toml_text);
    return build(root, base_dir);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(path.string(), "cannot open config");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  auto dir = path.parent_path();
  if (dir.empty()) {
    dir = ".";
  }
  try {
    return parse_config(buf.str(), dir);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace judgekit::cli
