#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <tuple>

#include "judgekit/random.hpp"

namespace judgekit::testing::oracle {

std::vector<std::string> greedy_diversity(const std::vector<std::string>& ids,
                                          const std::vector<std::vector<double>>& raw, std::size_t n,
                                          std::uint64_t seed) {
  std::vector<std::vector<double>> unit;
  for (const auto& v : raw) {
    double sq = 0.0;
    for (double x : v) {
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    std::vector<double> u;
    for (double x : v) {
      u.push_back(x / norm);
    }
    unit.push_back(std::move(u));
  }
  auto cosine = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < unit[a].size(); ++d) {
      s += unit[a][d] * unit[b][d];
    }
    return s;
  };

  Rng rng(seed);
  std::vector<std::size_t> chosen{static_cast<std::size_t>(uniform_index(rng, ids.size()))};
  while (chosen.size() < n) {
    std::vector<std::tuple<double, std::string, std::size_t>> ranked;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
        ranked.emplace_back(cosine(chosen.back(), i), ids[i], i);
      }
    }
    std::sort(ranked.begin(), ranked.end());
    chosen.push_back(std::get<2>(ranked.front()));
  }
  std::vector<std::string> out;
  for (std::size_t i : chosen) {
    out.push_back(ids[i]);
  }
  return out;
}

std::vector<int> threshold_bins(const std::vector<double>& values, int k) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const long long n = static_cast<long long>(values.size());
  std::vector<double> thresholds;
  for (int j = 1; j < k; ++j) {
    const long long idx = (static_cast<long long>(j) * n + k - 1) / k - 1;  // ceil(j*n/k) - 1
    thresholds.push_back(sorted[static_cast<std::size_t>(std::max(0LL, idx))]);
  }
  std::vector<int> out;
  for (double v : values) {
    int bin = 1;
    for (double t : thresholds) {
      if (v > t) {
        ++bin;
      }
    }
    out.push_back(bin);
  }
  return out;
}

double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                          std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

long double five_point(const std::function<long double(const std::vector<long double>&)>& f,
                       std::vector<long double> x, std::size_t i, long double h) {
  const long double x0 = x[i];
  auto at = [&](long double step) {
    x[i] = x0 + step;
    return f(x);
  };
  return (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
}

double relative_error(double got, long double want) {
  const long double g = got;
  const long double scale = std::max(std::fabs(g), std::fabs(want));
  if (scale == 0) {
    return 0.0;
  }
  return static_cast<double>(std::fabs(g - want) / scale);
}

long double dpo_reference(long double theta_w, long double theta_l, long double ref_w, long double ref_l,
                          long double beta) {
  const long double m = beta * ((theta_w - ref_w) - (theta_l - ref_l));
  // -log(1 / (1 + e^-m))
  return std::log1p(std::exp(-m));
}

long double dpo_sft_reference(long double theta_w, long double theta_l, long double ref_w, long double ref_l,
                              long double beta) {
  return -theta_w + dpo_reference(theta_w, theta_l, ref_w, ref_l, beta);
}

long double grpo_reference(const std::vector<long double>& theta, const GroupRollout& rollout, long double eps,
                           long double beta_kl) {
  const long double g = static_cast<long double>(theta.size());
  long double surrogate = 0;
  long double kl = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto& o = rollout.outputs[i];
    const long double a = *o.advantage;
    const long double ratio = std::exp(theta[i] - static_cast<long double>(o.logp_old));
    const long double clipped = std::min(std::max(ratio, 1 - eps), 1 + eps);
    surrogate += std::min(ratio * a, clipped * a);
    const long double q = std::exp(static_cast<long double>(o.logp_ref) - theta[i]);
    kl += q - std::log(q) - 1;
  }
  return surrogate / g - beta_kl * kl / g;
}

double reward_reference(bool correct, bool format_ok, int delta, bool penalty_mode, double alpha, double beta,
                        double gamma) {
  const double acc = correct ? 1.0 : 0.0;
  const double fmt = format_ok ? 0.0 : -0.5;
  const double str = penalty_mode ? -static_cast<double>(delta) : static_cast<double>(delta);
  return alpha * acc + beta * fmt + gamma * str;
}

namespace {

// Any run of characters containing neither "[[" nor "]]".
const std::string kFree = R"((?:(?!\[\[|\]\])[\s\S])*)";

bool free_prefix_ok(const std::string& p) { return p.empty() || p.back() != '['; }

}  // namespace

std::optional<Choice> grammar_accepts(const std::string& text, prompt::VariantKind kind,
                                      std::optional<int>* strength) {
  static const std::regex think(R"(^\s*<think>((?:(?!</?think>)[\s\S])*)</think>((?:(?!</?think>)[\s\S])*)$)");
  static const std::regex clause(R"(Response \(([ab])\) is better)");
  static const std::regex one_token("^(" + kFree + R"()\[\[(\d+)\]\]()" + kFree + ")$");
  static const std::regex score_pair("^(" + kFree + R"()\[\[(\d+)\]\] and \[\[(\d+)\]\]()" + kFree + ")$");
  static const std::regex no_brackets("^" + kFree + "$");

  std::smatch m;
  if (!std::regex_match(text, m, think)) {
    return std::nullopt;
  }
  const std::string conclusion = m[2].str();

  std::vector<std::pair<std::ptrdiff_t, Choice>> clauses;
  for (auto it = std::sregex_iterator(conclusion.begin(), conclusion.end(), clause); it != std::sregex_iterator();
       ++it) {
    clauses.emplace_back(it->position(), (*it)[1].str() == "a" ? Choice::A : Choice::B);
  }

  switch (prompt::judgment_of(kind)) {
    case prompt::VariantKind::JudgmentPlain:
      if (clauses.size() != 1 || !std::regex_match(conclusion, no_brackets)) {
        return std::nullopt;
      }
      return clauses.front().second;

    case prompt::VariantKind::JudgmentStrength: {
      std::smatch t;
      if (clauses.size() != 1 || !std::regex_match(conclusion, t, one_token) || !free_prefix_ok(t[1].str())) {
        return std::nullopt;
      }
      // The clause has to come before the token.
      if (clauses.front().first >= static_cast<std::ptrdiff_t>(t[1].length())) {
        return std::nullopt;
      }
      const std::string digits = t[2].str();
      const auto nonzero = digits.find_first_not_of('0');
      if (nonzero == std::string::npos || digits.size() - nonzero > 1 || digits[nonzero] > '3') {
        return std::nullopt;
      }
      if (strength != nullptr) {
        *strength = digits[nonzero] - '0';
      }
      return clauses.front().second;
    }

    case prompt::VariantKind::JudgmentMargin: {
      std::smatch t;
      if (!clauses.empty() || !std::regex_match(conclusion, t, score_pair) || !free_prefix_ok(t[1].str())) {
        return std::nullopt;
      }
      auto value = [](const std::string& digits) {
        const auto nz = digits.find_first_not_of('0');
        if (nz == std::string::npos) {
          return 0;
        }
        if (digits.size() - nz > 3) {
          return 1000;
        }
        return std::stoi(digits.substr(nz));
      };
      const int x = value(t[2].str());
      const int y = value(t[3].str());
      if (x > 100 || y > 100 || x == y) {
        return std::nullopt;
      }
      return x > y ? Choice::A : Choice::B;
    }

    default:
      return std::nullopt;
  }
}

}  // namespace judgekit::testing::oracle
