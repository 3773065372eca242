#include "judgekit/prompt.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "judgekit/error.hpp"

namespace judgekit::prompt {
namespace {

constexpr std::array<std::string_view, 5> kVariantNames{
    "judgment_plain", "judgment_strength", "judgment_margin", "critic_plain", "critic_strength"};

constexpr std::size_t index_of(VariantKind k) noexcept { return static_cast<std::size_t>(k); }

constexpr std::string_view kJudgmentHeader =
    "Please act as an impartial judge and evaluate the quality of two AI assistant responses to the "
    "user instruction shown below. Decide which response is better. Consider helpfulness, "
    "correctness, harmlessness, level of detail, and how faithfully each response follows the "
    "instruction. Do not let the order in which the responses are presented, their length, or the "
    "names of the assistants influence your decision.\n\n"
    "[Instruction]\n{instruction}\n\n"
    "[Response (a)]\n{response_a}\n\n"
    "[Response (b)]\n{response_b}\n\n";

constexpr std::string_view kJudgmentPlainTail =
    "First think through the comparison between <think> and </think>. After </think>, give your "
    "verdict as a single sentence in exactly one of these forms:\n"
    "Therefore, Response (a) is better.\n"
    "Therefore, Response (b) is better.\n";

constexpr std::string_view kJudgmentStrengthTail =
    "First think through the comparison between <think> and </think>. After </think>, give your "
    "verdict and how strongly you prefer the better response, where 1 means slightly better, 2 "
    "means better and 3 means much better. Use exactly this form:\n"
    "Therefore, Response (x) is better, and the preference strength is [[k]].\n"
    "where x is a or b and k is 1, 2 or 3.\n";

constexpr std::string_view kJudgmentMarginTail =
    "First think through the comparison between <think> and </think>. After </think>, rate each "
    "response with an integer quality score from 0 to 100 and do not give both responses the same "
    "score. Use exactly this form:\n"
    "Therefore, the quality scores for Response (a) and Response (b) are [[x]] and [[y]], "
    "respectively.\n";

constexpr std::string_view kCriticHeader =
    "Below are a user instruction and two AI assistant responses, together with the result of a "
    "careful comparison between them. Write the reasoning that leads to this result, considering "
    "helpfulness, correctness, harmlessness, level of detail, and how faithfully each response "
    "follows the instruction.\n\n"
    "[Instruction]\n{instruction}\n\n"
    "[Response (a)]\n{response_a}\n\n"
    "[Response (b)]\n{response_b}\n\n";

constexpr std::string_view kCriticPlainTail =
    "[Judgment result]\n{target_choice} is better.\n\n"
    "Write your reasoning between <think> and </think>. After </think>, end with exactly this "
    "sentence:\n"
    "Therefore, {target_choice} is better.\n";

constexpr std::string_view kCriticStrengthTail =
    "[Judgment result]\n{target_choice} is better, with preference strength {target_strength} "
    "(1 = slightly better, 2 = better, 3 = much better).\n\n"
    "Write your reasoning between <think> and </think>. After </think>, end with exactly this "
    "sentence:\n"
    "Therefore, {target_choice} is better, and the preference strength is [[{target_strength}]].\n";

constexpr std::string_view kClausePrefix = "Response (";
constexpr std::string_view kClauseA = "Response (a) is better";
constexpr std::string_view kClauseB = "Response (b) is better";
constexpr std::string_view kPairSeparator = " and ";

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) {
    ++b;
  }
  while (e > b && is_space(s[e - 1])) {
    --e;
  }
  return s.substr(b, e - b);
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) noexcept {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

struct Clause {
  std::size_t pos;
  Choice choice;
};

std::vector<Clause> find_clauses(std::string_view text) {
  std::vector<Clause> out;
  for (std::size_t pos = text.find(kClausePrefix); pos != std::string_view::npos;
       pos = text.find(kClausePrefix, pos + 1)) {
    std::string_view rest = text.substr(pos);
    if (rest.starts_with(kClauseA)) {
      out.push_back({pos, Choice::A});
    } else if (rest.starts_with(kClauseB)) {
      out.push_back({pos, Choice::B});
    }
  }
  return out;
}

struct BracketToken {
  std::size_t begin;  // position of "[["
  std::size_t end;    // one past "]]"
  std::string_view content;
};

struct BracketScan {
  std::vector<BracketToken> tokens;
  bool malformed = false;
};

BracketScan scan_brackets(std::string_view text) {
  BracketScan scan;
  std::size_t i = 0;
  while (i + 1 < text.size()) {
    if (text[i] == '[' && text[i + 1] == '[') {
      const std::size_t close = text.find("]]", i + 2);
      if (close == std::string_view::npos) {
        scan.malformed = true;
        break;
      }
      scan.tokens.push_back({i, close + 2, text.substr(i + 2, close - i - 2)});
      i = close + 2;
    } else if (text[i] == ']' && text[i + 1] == ']') {
      scan.malformed = true;
      i += 2;
    } else {
      ++i;
    }
  }
  return scan;
}

// Digits only; nullopt for anything else. Values too large for int map to INT_MAX.
std::optional<int> parse_token_int(std::string_view content) {
  if (content.empty() || !std::all_of(content.begin(), content.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  int value = 0;
  auto [ptr, ec] = std::from_chars(content.data(), content.data() + content.size(), value);
  if (ec == std::errc::result_out_of_range) {
    return std::numeric_limits<int>::max();
  }
  return value;
}

bool has_score_pair(std::string_view text, const std::vector<BracketToken>& tokens) {
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i + 1].begin == tokens[i].end + kPairSeparator.size() &&
        text.substr(tokens[i].end, kPairSeparator.size()) == kPairSeparator) {
      return true;
    }
  }
  return false;
}

class Violations {
 public:
  void add(std::string_view code) {
    if (std::find(codes_.begin(), codes_.end(), code) == codes_.end()) {
      codes_.emplace_back(code);
    }
  }
  bool has(std::string_view code) const {
    return std::find(codes_.begin(), codes_.end(), code) != codes_.end();
  }
  std::vector<std::string> take() && { return std::move(codes_); }
  bool empty() const noexcept { return codes_.empty(); }

 private:
  std::vector<std::string> codes_;
};

Choice single_choice(const std::vector<Clause>& clauses) {
  if (clauses.empty()) {
    return Choice::Invalid;
  }
  const Choice first = clauses.front().choice;
  for (const auto& c : clauses) {
    if (c.choice != first) {
      return Choice::Invalid;
    }
  }
  return first;
}

void check_choice_clauses(const std::vector<Clause>& clauses, Violations& v) {
  if (clauses.size() > 1) {
    v.add(code::kDuplicateChoice);
  }
}

}  // namespace

std::string_view to_string(VariantKind k) noexcept { return kVariantNames[index_of(k)]; }

VariantKind parse_variant(std::string_view s) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
    if (kVariantNames[i] == s) {
      return kAllVariants[i];
    }
  }
  throw DomainError("unknown template variant '" + std::string(s) + "'");
}

VariantKind judgment_of(VariantKind k) {
  switch (k) {
    case VariantKind::CriticPlain:
      return VariantKind::JudgmentPlain;
    case VariantKind::CriticStrength:
      return VariantKind::JudgmentStrength;
    default:
      return k;
  }
}

VariantKind critic_of(VariantKind k) {
  switch (k) {
    case VariantKind::JudgmentPlain:
    case VariantKind::CriticPlain:
      return VariantKind::CriticPlain;
    case VariantKind::JudgmentStrength:
    case VariantKind::CriticStrength:
      return VariantKind::CriticStrength;
    case VariantKind::JudgmentMargin:
      break;
  }
  throw VariantMismatch("judgment_margin has no critic counterpart");
}

TemplateSet TemplateSet::defaults() {
  TemplateSet t;
  t.set(VariantKind::JudgmentPlain, std::string(kJudgmentHeader) + std::string(kJudgmentPlainTail));
  t.set(VariantKind::JudgmentStrength, std::string(kJudgmentHeader) + std::string(kJudgmentStrengthTail));
  t.set(VariantKind::JudgmentMargin, std::string(kJudgmentHeader) + std::string(kJudgmentMarginTail));
  t.set(VariantKind::CriticPlain, std::string(kCriticHeader) + std::string(kCriticPlainTail));
  t.set(VariantKind::CriticStrength, std::string(kCriticHeader) + std::string(kCriticStrengthTail));
  return t;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError(dir.string(), "not a template directory");
  }
  TemplateSet t = defaults();
  for (VariantKind k : kAllVariants) {
    const auto file = dir / (std::string(to_string(k)) + ".txt");
    if (std::filesystem::exists(file)) {
      t.set(k, load_template(file));
    }
  }
  return t;
}

const std::string& TemplateSet::text(VariantKind k) const { return texts_[index_of(k)]; }

void TemplateSet::set(VariantKind k, std::string text) { texts_[index_of(k)] = std::move(text); }

std::string load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(path.string(), "cannot read template");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string substitute(std::string_view tmpl,
                       std::span<const std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string_view name = tmpl.substr(i + 1, close - i - 1);
        auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
        if (it != values.end()) {
          out.append(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

std::string render_judgment_prompt(const PreferenceSample& sample, TemplateVariant variant,
                                   const TemplateSet& templates) {
  if (!is_judgment(variant.kind)) {
    throw VariantMismatch("render_judgment_prompt needs a judgment variant, got " +
                          std::string(to_string(variant.kind)));
  }
  const std::array<std::pair<std::string_view, std::string_view>, 3> values{{
      {"instruction", sample.instruction},
      {"response_a", sample.response_a},
      {"response_b", sample.response_b},
  }};
  return substitute(templates.text(variant.kind), values);
}

std::string render_critic_prompt(const PreferenceSample& sample, Label target,
                                 std::optional<int> target_strength, TemplateVariant variant,
                                 const TemplateSet& templates) {
  if (!is_critic(variant.kind)) {
    throw VariantMismatch("render_critic_prompt needs a critic variant, got " +
                          std::string(to_string(variant.kind)));
  }
  std::string strength;
  if (variant.kind == VariantKind::CriticStrength) {
    if (!target_strength) {
      throw MissingStrength("critic_strength prompt for sample '" + sample.id + "' needs a target strength");
    }
    if (*target_strength < 1 || *target_strength > 3) {
      throw DomainError("target strength must be in {1,2,3}, got " + std::to_string(*target_strength));
    }
    strength = std::to_string(*target_strength);
  }
  const std::string_view choice = target == Label::A ? "Response (a)" : "Response (b)";
  const std::array<std::pair<std::string_view, std::string_view>, 5> values{{
      {"instruction", sample.instruction},
      {"response_a", sample.response_a},
      {"response_b", sample.response_b},
      {"target_choice", choice},
      {"target_strength", strength},
  }};
  return substitute(templates.text(variant.kind), values);
}

JudgeVerdict parse_verdict(std::string_view output, TemplateVariant variant) {
  const VariantKind kind = judgment_of(variant.kind);
  JudgeVerdict verdict;
  verdict.trace.origin = is_critic(variant.kind) ? TraceOrigin::Critic : TraceOrigin::Judge;
  Violations v;

  // Think span.
  const std::size_t opens = count_occurrences(output, kThinkOpen);
  const std::size_t closes = count_occurrences(output, kThinkClose);
  const std::size_t first_open = output.find(kThinkOpen);
  const std::size_t first_close = output.find(kThinkClose);
  if (opens == 0 && closes == 0) {
    v.add(code::kMissingThink);
  } else if (opens > 1 || closes > 1) {
    v.add(code::kDuplicateThink);
  } else if (closes == 0) {
    v.add(code::kUnclosedThink);
  } else if (opens == 0 || first_close < first_open) {
    v.add(code::kMalformedThink);
  } else if (!trim(output.substr(0, first_open)).empty()) {
    v.add(code::kThinkNotAtStart);
  }

  if (first_open != std::string_view::npos) {
    const std::size_t body = first_open + kThinkOpen.size();
    const std::size_t end = output.find(kThinkClose, body);
    verdict.trace.raw = std::string(output.substr(body, end == std::string_view::npos ? end : end - body));
  } else if (first_close != std::string_view::npos) {
    verdict.trace.raw = std::string(output.substr(0, first_close));
  }

  const std::size_t last_close = output.rfind(kThinkClose);
  const std::string_view conclusion =
      last_close == std::string_view::npos ? output : output.substr(last_close + kThinkClose.size());

  const auto clauses = find_clauses(conclusion);
  const auto brackets = scan_brackets(conclusion);
  const bool score_pair = has_score_pair(conclusion, brackets.tokens);

  switch (kind) {
    case VariantKind::JudgmentPlain: {
      if (clauses.empty()) {
        v.add(score_pair ? code::kWrongVariantFormat : code::kMissingChoice);
      }
      check_choice_clauses(clauses, v);
      if (brackets.malformed) {
        v.add(code::kMalformedMarker);
      }
      if (!brackets.tokens.empty()) {
        v.add(code::kWrongVariantFormat);
      }
      verdict.choice = single_choice(clauses);
      break;
    }
    case VariantKind::JudgmentStrength: {
      if (clauses.empty() && score_pair) {
        v.add(code::kWrongVariantFormat);
        break;
      }
      if (clauses.empty()) {
        v.add(code::kMissingChoice);
      }
      check_choice_clauses(clauses, v);
      if (brackets.malformed) {
        v.add(code::kMalformedMarker);
      }
      if (brackets.tokens.empty()) {
        if (!brackets.malformed) {
          v.add(code::kMissingStrength);
        }
      } else if (brackets.tokens.size() > 1) {
        v.add(score_pair ? code::kWrongVariantFormat : code::kDuplicateStrength);
      } else {
        const auto& token = brackets.tokens.front();
        const auto value = parse_token_int(token.content);
        if (!value) {
          v.add(code::kMalformedMarker);
        } else if (*value < 1 || *value > 3) {
          v.add(code::kBadStrength);
        } else {
          verdict.strength_pred = *value;
        }
        if (!clauses.empty() && token.begin < clauses.front().pos) {
          v.add(code::kOutOfOrder);
        }
      }
      verdict.choice = single_choice(clauses);
      break;
    }
    case VariantKind::JudgmentMargin: {
      if (!clauses.empty()) {
        v.add(code::kWrongVariantFormat);
        if (!score_pair) {
          break;
        }
      }
      if (brackets.malformed) {
        v.add(code::kMalformedMarker);
      }
      const auto& tokens = brackets.tokens;
      if (tokens.size() > 2) {
        v.add(code::kDuplicateScores);
      } else if (tokens.size() < 2 || !score_pair) {
        if (!brackets.malformed || !tokens.empty()) {
          v.add(code::kMissingScores);
        }
      } else {
        const auto first = parse_token_int(tokens[0].content);
        const auto second = parse_token_int(tokens[1].content);
        if (!first || !second) {
          v.add(code::kMalformedMarker);
        } else if (*first > 100 || *second > 100) {
          v.add(code::kBadScore);
        } else {
          verdict.quality_scores = std::make_pair(*first, *second);
          if (*first == *second) {
            v.add(code::kTieScores);
          } else {
            verdict.choice = *first > *second ? Choice::A : Choice::B;
          }
        }
      }
      break;
    }
    default:
      break;
  }

  if (verdict.choice == Choice::Invalid && v.empty()) {
    // Unreachable by construction; keeps the choice/format invariant total.
    v.add(code::kMissingChoice);
  }
  verdict.format_ok = v.empty();
  verdict.violations = std::move(v).take();
  return verdict;
}

FormatCheck check_format(std::string_view output, TemplateVariant variant) {
  JudgeVerdict verdict = parse_verdict(output, variant);
  return {verdict.format_ok, std::move(verdict.violations)};
}

std::string clip_trace(std::string_view raw) {
  std::string_view tail;
  std::string stripped;
  const std::size_t last_close = raw.rfind(kThinkClose);
  if (last_close != std::string_view::npos) {
    tail = raw.substr(last_close + kThinkClose.size());
    const std::size_t open = tail.rfind(kThinkOpen);
    if (open != std::string_view::npos) {
      tail = tail.substr(open + kThinkOpen.size());
    }
    tail = trim(tail);
  } else {
    stripped = std::string(raw);
    for (std::size_t pos = stripped.find(kThinkOpen); pos != std::string::npos; pos = stripped.find(kThinkOpen)) {
      stripped.erase(pos, kThinkOpen.size());
    }
    std::string_view text = trim(stripped);
    // Start of the line following the last whitespace-only line.
    std::size_t block_start = 0;
    std::size_t line_start = 0;
    while (line_start < text.size()) {
      std::size_t nl = text.find('\n', line_start);
      const std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
      if (trim(text.substr(line_start, line_end - line_start)).empty()) {
        block_start = line_end + 1;
      }
      if (nl == std::string_view::npos) {
        break;
      }
      line_start = nl + 1;
    }
    tail = trim(text.substr(std::min(block_start, text.size())));
  }
  if (tail.empty()) {
    throw EmptyAfterClip("nothing remains after clipping the trace");
  }
  return std::string(tail);
}

std::string compliant_output(std::string_view trace, Choice choice, TemplateVariant variant,
                             std::optional<int> strength, std::optional<std::pair<int, int>> scores) {
  const VariantKind kind = judgment_of(variant.kind);
  std::string out = "<think>";
  out.append(trace);
  out.append("</think>\n");
  const std::string_view which = choice == Choice::A ? "Response (a)" : "Response (b)";
  switch (kind) {
    case VariantKind::JudgmentPlain:
      out += "Therefore, " + std::string(which) + " is better.";
      break;
    case VariantKind::JudgmentStrength:
      out += "Therefore, " + std::string(which) + " is better, and the preference strength is [[" +
             std::to_string(strength.value_or(2)) + "]].";
      break;
    case VariantKind::JudgmentMargin: {
      auto s = scores.value_or(choice == Choice::A ? std::make_pair(70, 30) : std::make_pair(30, 70));
      out += "Therefore, the quality scores for Response (a) and Response (b) are [[" +
             std::to_string(s.first) + "]] and [[" + std::to_string(s.second) + "]], respectively.";
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace judgekit::prompt
