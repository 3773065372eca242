#pragma once

// JSON codecs for the record schemas and JSONL file helpers.
//
// Writers emit keys in schema order (ordered_json) so files are
// byte-stable across runs. Readers accept any key order and ignore
// unknown keys.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "judgekit/types.hpp"

namespace judgekit {

using Json = nlohmann::ordered_json;

Json encode(const PreferenceSample& v);
Json encode(const ThinkingTrace& v);
Json encode(const JudgeVerdict& v);
Json encode(const RewardWeights& v);
Json encode(const ObjectiveConfig& v);
Json encode(const PreferencePair& v);
Json encode(const RolloutOutput& v);
Json encode(const GroupRollout& v);

/// Decoders throw ParseError (line 0) on missing fields or wrong types.
template <typename T>
T decode(const Json& j);

template <> PreferenceSample decode<PreferenceSample>(const Json& j);
template <> ThinkingTrace decode<ThinkingTrace>(const Json& j);
template <> JudgeVerdict decode<JudgeVerdict>(const Json& j);
template <> RewardWeights decode<RewardWeights>(const Json& j);
template <> ObjectiveConfig decode<ObjectiveConfig>(const Json& j);
template <> PreferencePair decode<PreferencePair>(const Json& j);
template <> RolloutOutput decode<RolloutOutput>(const Json& j);
template <> GroupRollout decode<GroupRollout>(const Json& j);

/// First line of CLI output files: {"_meta":{"tool":"judgekit","command":...,"seed":...}}.
Json meta_record(std::string_view command, std::uint64_t seed);
bool is_meta_record(const Json& j);

/// Calls `fn(line_number, record)` for each non-blank, non-meta line.
/// Throws IoError when the file cannot be opened and ParseError (with the
/// 1-based line) on invalid JSON or when `fn` throws ParseError/json errors.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const Json&)>& fn);

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  for_each_jsonl(path, [&](std::size_t, const Json& j) { out.push_back(decode<T>(j)); });
  return out;
}

/// Line-oriented writer. Each record is flushed as one line.
class JsonlWriter {
 public:
  enum class Mode { Truncate, Append };

  explicit JsonlWriter(const std::filesystem::path& path, Mode mode = Mode::Truncate);

  void write(const Json& record);
  std::size_t count() const noexcept { return count_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Writes `j.dump(2)` plus a trailing newline; IoError on failure.
void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

}  // namespace judgekit
