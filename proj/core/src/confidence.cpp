#include "ehrqa/confidence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ehrqa/prompt_assets.hpp"
#include "ehrqa/util.hpp"

namespace ehrqa {

ConfidenceDistribution ConfidenceDistribution::from_logprobs(std::map<int, double> level_logprobs) {
  if (level_logprobs.empty()) {
    throw std::invalid_argument("confidence distribution has no observed levels");
  }
  for (const auto& [level, lp] : level_logprobs) {
    if (level < 0 || level > kMaxLevel) {
      throw std::invalid_argument("confidence level outside 0.." + std::to_string(kMaxLevel) +
                                  ": " + std::to_string(level));
    }
    if (lp > 0.0) {
      throw std::invalid_argument("logprob above 0 for level " + std::to_string(level));
    }
    if (!std::isfinite(lp)) {
      throw std::invalid_argument("non-finite logprob for level " + std::to_string(level));
    }
  }
  ConfidenceDistribution d;
  d.logprobs_ = std::move(level_logprobs);
  return d;
}

std::map<int, double> ConfidenceDistribution::probabilities() const {
  // Stabilized softmax over observed levels.
  double max_lp = -std::numeric_limits<double>::infinity();
  for (const auto& [_, lp] : logprobs_) max_lp = std::max(max_lp, lp);
  double z = 0.0;
  std::map<int, double> probs;
  for (const auto& [level, lp] : logprobs_) {
    double w = std::exp(lp - max_lp);
    probs[level] = w;
    z += w;
  }
  for (auto& [_, p] : probs) p /= z;
  return probs;
}

std::string estimator_method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::kWeightedSum: return "weighted_sum";
    case EstimatorMethod::kBinary: return "binary";
    case EstimatorMethod::kDiscrete: return "discrete";
  }
  return "weighted_sum";
}

EstimatorMethod estimator_method_from_name(const std::string& name) {
  if (name == "weighted_sum") return EstimatorMethod::kWeightedSum;
  if (name == "binary") return EstimatorMethod::kBinary;
  if (name == "discrete") return EstimatorMethod::kDiscrete;
  throw std::invalid_argument("unknown estimator method: " + name);
}

double weighted_logprob_confidence(const ConfidenceDistribution& dist) {
  double c = 0.0;
  for (const auto& [level, p] : dist.probabilities()) {
    c += static_cast<double>(level) * p;
  }
  return c / static_cast<double>(kMaxLevel);
}

double binary_confidence(BinaryVerdict verdict) {
  return verdict == BinaryVerdict::kAccept ? 1.0 : 0.0;
}

namespace {

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace

std::optional<BinaryVerdict> parse_binary_verdict(std::string_view text) {
  for (const auto& w : words_of(text)) {
    if (w == "accept" || w == "yes") return BinaryVerdict::kAccept;
    if (w == "reject" || w == "no") return BinaryVerdict::kReject;
  }
  return std::nullopt;
}

double discrete_confidence(int score) {
  if (score < 0 || score > 10) {
    throw std::invalid_argument("discrete confidence score outside 0..10: " +
                                std::to_string(score));
  }
  return static_cast<double>(score) / 10.0;
}

std::optional<int> parse_discrete_score(std::string_view text) {
  for (const auto& w : words_of(text)) {
    bool digits = !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
      return std::isdigit(c);
    });
    if (!digits || w.size() > 2) continue;
    int v = std::stoi(w);
    if (v >= 0 && v <= 10) return v;
  }
  return std::nullopt;
}

std::optional<double> parse_step_confidence(std::string_view program_text, std::string* warning) {
  for (std::string_view line : split_lines(program_text)) {
    std::string_view t = trim(line);
    if (t.empty() || t.front() != '#') continue;
    t.remove_prefix(1);
    t = trim(t);
    // Case-insensitive "confidence" keyword.
    constexpr std::string_view kKey = "confidence";
    if (t.size() < kKey.size()) continue;
    bool key_match = std::equal(kKey.begin(), kKey.end(), t.begin(), [](char a, char b) {
      return a == std::tolower(static_cast<unsigned char>(b));
    });
    if (!key_match) continue;
    t.remove_prefix(kKey.size());
    t = trim(t);
    if (t.empty() || t.front() != ':') continue;
    t.remove_prefix(1);
    // Take the leading number; trailing commentary on the line is ignored.
    std::string_view rest = trim(t);
    std::size_t len = 0;
    while (len < rest.size() &&
           (std::isdigit(static_cast<unsigned char>(rest[len])) || rest[len] == '.')) {
      ++len;
    }
    std::string_view num = rest.substr(0, len);
    auto value = parse_plain_number(num);
    if (!value || *value < 0.0 || *value > 10.0) {
      if (warning) {
        *warning = "ignoring confidence marker with invalid value: '" + std::string(trim(line)) +
                   "'";
      }
      return std::nullopt;
    }
    // Divide by ten in the decimal domain so e.g. 9.2 -> 0.92 exactly.
    return parse_decimal_tenth(num);
  }
  return std::nullopt;
}

std::string build_estimator_prompt(const EstimatorInput& input, EstimatorMethod method) {
  if (input.question.empty()) throw std::invalid_argument("estimator input has empty question");
  if (input.final_answer.empty()) {
    throw std::invalid_argument("estimator input has empty final answer");
  }

  std::string rubric = assets::kEstimatorRubricV1;
  while (!rubric.empty() && (rubric.back() == '\n' || rubric.back() == '\r')) rubric.pop_back();

  std::string prompt = rubric;
  prompt += "\n\nQuestion:\n" + input.question;
  prompt += "\n\nSolution process:\n";
  prompt += input.history_text.empty() ? "(none)" : input.history_text;
  prompt += "\n\nFinal answer:\n" + input.final_answer;
  prompt += "\n\n";
  switch (method) {
    case EstimatorMethod::kWeightedSum:
      prompt +=
          "Output exactly one token: the confidence level as a single digit from 0 to 4. "
          "Do not output anything else.";
      break;
    case EstimatorMethod::kBinary:
      prompt +=
          "Output exactly one word: accept if the answer should be trusted, or reject if it "
          "should not. Do not output anything else.";
      break;
    case EstimatorMethod::kDiscrete:
      prompt +=
          "Output exactly one integer from 0 to 10 rating how confident we should be in the "
          "answer. Do not output anything else.";
      break;
  }
  return prompt;
}

ConfidenceDistribution extract_level_distribution(std::span<const TokenAlternative> alternatives) {
  std::map<int, double> by_level;
  for (const auto& alt : alternatives) {
    std::string_view tok = trim(alt.token);
    if (tok.size() != 1 || tok.front() < '0' || tok.front() > '0' + kMaxLevel) continue;
    int level = tok.front() - '0';
    auto it = by_level.find(level);
    if (it == by_level.end()) {
      by_level[level] = alt.logprob;
    } else {
      // Same level seen through different tokenizations: combine mass.
      double a = it->second, b = alt.logprob;
      double m = std::max(a, b);
      it->second = m + std::log(std::exp(a - m) + std::exp(b - m));
    }
  }
  if (by_level.empty()) {
    throw std::invalid_argument("no alternative token maps to a confidence level");
  }
  // Combining near-certain duplicates can nudge a logprob above 0.
  for (auto& [_, lp] : by_level) lp = std::min(lp, 0.0);
  return ConfidenceDistribution::from_logprobs(std::move(by_level));
}

}  // namespace ehrqa
