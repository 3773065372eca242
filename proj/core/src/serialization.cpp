#include "judgekit/serialization.hpp"

#include <cerrno>
#include <cstring>

#include "judgekit/error.hpp"

namespace judgekit {
namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) {
    throw ParseError(0, "expected a JSON object");
  }
  auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(0, std::string("missing field '") + key + "'");
  }
  return *it;
}

bool has_value(const Json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && !it->is_null();
}

std::string get_string(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_string()) {
    throw ParseError(0, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

double get_number(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number()) {
    throw ParseError(0, std::string("field '") + key + "' must be a number");
  }
  return v.get<double>();
}

int get_int(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer()) {
    throw ParseError(0, std::string("field '") + key + "' must be an integer");
  }
  return v.get<int>();
}

bool get_bool(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_boolean()) {
    throw ParseError(0, std::string("field '") + key + "' must be a boolean");
  }
  return v.get<bool>();
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!has_value(j, key)) {
    return std::nullopt;
  }
  return get_string(j, key);
}

std::optional<double> opt_number(const Json& j, const char* key) {
  if (!has_value(j, key)) {
    return std::nullopt;
  }
  return get_number(j, key);
}

std::optional<int> opt_int(const Json& j, const char* key) {
  if (!has_value(j, key)) {
    return std::nullopt;
  }
  return get_int(j, key);
}

template <typename T>
Json nullable(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

// Enum parsers throw DomainError; surface them as parse errors.
template <typename F>
auto enum_field(const Json& j, const char* key, F parse) {
  std::string s = get_string(j, key);
  try {
    return parse(s);
  } catch (const DomainError& e) {
    throw ParseError(0, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

Json encode(const PreferenceSample& v) {
  Json j;
  j["id"] = v.id;
  j["instruction"] = v.instruction;
  j["response_a"] = v.response_a;
  j["response_b"] = v.response_b;
  j["label"] = to_string(v.label);
  j["strength"] = nullable(v.strength_golden);
  j["category"] = nullable(v.category);
  j["score_a"] = nullable(v.score_a);
  j["score_b"] = nullable(v.score_b);
  j["source"] = v.source;
  return j;
}

template <>
PreferenceSample decode<PreferenceSample>(const Json& j) {
  PreferenceSample v;
  v.id = get_string(j, "id");
  v.instruction = get_string(j, "instruction");
  v.response_a = get_string(j, "response_a");
  v.response_b = get_string(j, "response_b");
  v.label = enum_field(j, "label", parse_label);
  v.strength_golden = opt_int(j, "strength");
  v.category = opt_string(j, "category");
  v.score_a = opt_number(j, "score_a");
  v.score_b = opt_number(j, "score_b");
  v.source = has_value(j, "source") ? get_string(j, "source") : std::string();
  return v;
}

Json encode(const ThinkingTrace& v) {
  Json j;
  j["raw"] = v.raw;
  j["clipped"] = nullable(v.clipped);
  j["origin"] = to_string(v.origin);
  return j;
}

template <>
ThinkingTrace decode<ThinkingTrace>(const Json& j) {
  ThinkingTrace v;
  v.raw = get_string(j, "raw");
  v.clipped = opt_string(j, "clipped");
  v.origin = enum_field(j, "origin", parse_trace_origin);
  return v;
}

Json encode(const JudgeVerdict& v) {
  Json j;
  j["choice"] = to_string(v.choice);
  j["strength_pred"] = nullable(v.strength_pred);
  if (v.quality_scores) {
    j["quality_scores"] = Json::array({v.quality_scores->first, v.quality_scores->second});
  } else {
    j["quality_scores"] = nullptr;
  }
  j["format_ok"] = v.format_ok;
  j["violations"] = v.violations;
  j["trace"] = encode(v.trace);
  return j;
}

template <>
JudgeVerdict decode<JudgeVerdict>(const Json& j) {
  JudgeVerdict v;
  v.choice = enum_field(j, "choice", parse_choice);
  v.strength_pred = opt_int(j, "strength_pred");
  if (has_value(j, "quality_scores")) {
    const Json& q = j.at("quality_scores");
    if (!q.is_array() || q.size() != 2 || !q[0].is_number_integer() || !q[1].is_number_integer()) {
      throw ParseError(0, "field 'quality_scores' must be a pair of integers");
    }
    v.quality_scores = std::make_pair(q[0].get<int>(), q[1].get<int>());
  }
  v.format_ok = get_bool(j, "format_ok");
  const Json& viol = field(j, "violations");
  if (!viol.is_array()) {
    throw ParseError(0, "field 'violations' must be an array");
  }
  for (const auto& code : viol) {
    if (!code.is_string()) {
      throw ParseError(0, "violation codes must be strings");
    }
    v.violations.push_back(code.get<std::string>());
  }
  v.trace = decode<ThinkingTrace>(field(j, "trace"));
  return v;
}

Json encode(const RewardWeights& v) {
  Json j;
  j["alpha"] = v.alpha;
  j["beta_fmt"] = v.beta_fmt;
  j["gamma"] = v.gamma;
  j["strength_mode"] = to_string(v.strength_mode);
  j["margin_enabled"] = v.margin_enabled;
  j["margin_sign"] = to_string(v.margin_sign);
  return j;
}

template <>
RewardWeights decode<RewardWeights>(const Json& j) {
  RewardWeights v;
  v.alpha = get_number(j, "alpha");
  v.beta_fmt = get_number(j, "beta_fmt");
  v.gamma = get_number(j, "gamma");
  v.strength_mode = enum_field(j, "strength_mode", parse_strength_mode);
  v.margin_enabled = get_bool(j, "margin_enabled");
  if (has_value(j, "margin_sign")) {
    v.margin_sign = enum_field(j, "margin_sign", parse_margin_sign);
  }
  return v;
}

Json encode(const ObjectiveConfig& v) {
  Json j;
  j["beta_dpo"] = v.beta_dpo;
  j["eps_clip"] = v.eps_clip;
  j["beta_kl"] = v.beta_kl;
  j["group_size"] = v.group_size;
  j["advantage_norm"] = to_string(v.advantage_norm);
  return j;
}

template <>
ObjectiveConfig decode<ObjectiveConfig>(const Json& j) {
  ObjectiveConfig v;
  v.beta_dpo = get_number(j, "beta_dpo");
  v.eps_clip = get_number(j, "eps_clip");
  v.beta_kl = get_number(j, "beta_kl");
  v.group_size = get_int(j, "group_size");
  v.advantage_norm = enum_field(j, "advantage_norm", parse_advantage_norm);
  return v;
}

Json encode(const PreferencePair& v) {
  Json j;
  j["prompt"] = v.prompt;
  j["chosen"] = v.chosen;
  j["rejected"] = v.rejected;
  j["provenance"] = to_string(v.provenance);
  j["iteration"] = v.iteration;
  if (v.sample_id) {
    j["sample_id"] = *v.sample_id;
  }
  return j;
}

template <>
PreferencePair decode<PreferencePair>(const Json& j) {
  PreferencePair v;
  v.prompt = get_string(j, "prompt");
  v.chosen = get_string(j, "chosen");
  v.rejected = get_string(j, "rejected");
  v.provenance = enum_field(j, "provenance", parse_provenance);
  v.iteration = get_int(j, "iteration");
  v.sample_id = opt_string(j, "sample_id");
  return v;
}

Json encode(const RolloutOutput& v) {
  Json j;
  j["text"] = v.text;
  j["logp_theta"] = v.logp_theta;
  j["logp_old"] = v.logp_old;
  j["logp_ref"] = v.logp_ref;
  j["reward"] = v.reward;
  if (v.advantage) {
    j["advantage"] = *v.advantage;
  }
  return j;
}

template <>
RolloutOutput decode<RolloutOutput>(const Json& j) {
  RolloutOutput v;
  v.text = get_string(j, "text");
  v.logp_theta = get_number(j, "logp_theta");
  v.logp_old = get_number(j, "logp_old");
  v.logp_ref = get_number(j, "logp_ref");
  v.reward = get_number(j, "reward");
  v.advantage = opt_number(j, "advantage");
  return v;
}

Json encode(const GroupRollout& v) {
  Json j;
  j["prompt_id"] = v.prompt_id;
  Json outputs = Json::array();
  for (const auto& o : v.outputs) {
    outputs.push_back(encode(o));
  }
  j["outputs"] = std::move(outputs);
  return j;
}

template <>
GroupRollout decode<GroupRollout>(const Json& j) {
  GroupRollout v;
  v.prompt_id = get_string(j, "prompt_id");
  const Json& outputs = field(j, "outputs");
  if (!outputs.is_array()) {
    throw ParseError(0, "field 'outputs' must be an array");
  }
  for (const auto& o : outputs) {
    v.outputs.push_back(decode<RolloutOutput>(o));
  }
  return v;
}

Json meta_record(std::string_view command, std::uint64_t seed) {
  Json meta;
  meta["tool"] = "judgekit";
  meta["command"] = command;
  meta["seed"] = seed;
  Json j;
  j["_meta"] = std::move(meta);
  return j;
}

bool is_meta_record(const Json& j) { return j.is_object() && j.contains("_meta"); }

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const Json&)>& fn) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(path.string(), std::strerror(errno));
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (is_meta_record(record)) {
      continue;
    }
    try {
      fn(line_no, record);
    } catch (const ParseError& e) {
      if (e.line() != 0) {
        throw;
      }
      throw ParseError(line_no, e.what());
    } catch (const Json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, Mode mode)
    : path_(path), out_(path, mode == Mode::Append ? std::ios::app : std::ios::trunc) {
  if (!out_) {
    throw IoError(path.string(), std::string("cannot open for writing: ") + std::strerror(errno));
  }
}

void JsonlWriter::write(const Json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) {
    throw IoError(path_.string(), "write failed");
  }
  ++count_;
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError(path.string(), std::string("cannot open for writing: ") + std::strerror(errno));
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError(path.string(), "write failed");
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(path.string(), std::strerror(errno));
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(0, path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace judgekit
