#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace ehrqa {

// Five discrete trust levels 0..4.
inline constexpr int kMaxLevel = 4;

// Log-probabilities over the trust levels, as returned for the level
// token position. Missing levels are allowed; probabilities are
// renormalized over the observed ones.
class ConfidenceDistribution {
 public:
  // Throws std::invalid_argument when empty, when a level is outside
  // 0..4, or when any logprob is positive.
  static ConfidenceDistribution from_logprobs(std::map<int, double> level_logprobs);

  const std::map<int, double>& logprobs() const { return logprobs_; }
  std::map<int, double> probabilities() const;

 private:
  ConfidenceDistribution() = default;
  std::map<int, double> logprobs_;
};

enum class EstimatorMethod { kWeightedSum, kBinary, kDiscrete };

std::string estimator_method_name(EstimatorMethod m);
EstimatorMethod estimator_method_from_name(const std::string& name);

struct EstimatorInput {
  std::string question;
  std::string history_text;  // may be empty for single-shot answers
  std::string final_answer;
};

// C = sum_i i * P(S=i) / 4, with P renormalized over observed levels.
double weighted_logprob_confidence(const ConfidenceDistribution& dist);

enum class BinaryVerdict { kAccept, kReject };

// accept -> 1.0, reject -> 0.0.
double binary_confidence(BinaryVerdict verdict);

// Scans words in order; the first accept/reject/yes/no token decides.
std::optional<BinaryVerdict> parse_binary_verdict(std::string_view text);

// score in 0..10 -> score/10.
double discrete_confidence(int score);

std::optional<int> parse_discrete_score(std::string_view text);

// Finds the first "# Confidence: X" marker line with X in [0,10] and
// returns X/10. Absent marker yields nullopt; a malformed marker yields
// nullopt with a note in *warning. Never throws.
std::optional<double> parse_step_confidence(std::string_view program_text,
                                            std::string* warning = nullptr);

// Rubric-based judge prompt: level definitions and evaluation steps,
// then the question, the reasoning history (with step confidence lines
// when present), the final answer, and a method-specific output
// instruction.
std::string build_estimator_prompt(const EstimatorInput& input,
                                   EstimatorMethod method = EstimatorMethod::kWeightedSum);

struct TokenAlternative {
  std::string token;
  double logprob = 0.0;
};

// Maps alternative tokens to levels 0..4 (surrounding whitespace
// stripped), discards everything else, and renormalizes. Tokens mapping
// to the same level are combined. Throws when nothing maps.
ConfidenceDistribution extract_level_distribution(std::span<const TokenAlternative> alternatives);

}  // namespace ehrqa
