#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehrqa/backend.hpp"
#include "ehrqa/confidence.hpp"
#include "ehrqa/ehr.hpp"
#include "ehrqa/records.hpp"

namespace ehrqa {

enum class ProgramDialect { kSql, kPython };

std::string program_dialect_name(ProgramDialect d);
ProgramDialect program_dialect_from_name(const std::string& name);

// One worked example shown to the model: alternating user/assistant
// messages following the live step protocol.
struct Demonstration {
  std::vector<Message> exchange;
};

// The confidence pipeline is shared across presets; they differ only in
// the program dialect and the demonstration bank.
struct AgentPreset {
  std::string name;
  ProgramDialect dialect = ProgramDialect::kSql;
  std::vector<Demonstration> demonstrations;
};

// "trust", "sql-baseline", "python-baseline".
const AgentPreset& builtin_preset(const std::string& name);

struct AgentConfig {
  int max_steps = kDefaultMaxSteps;  // T
  int few_shot_count = 4;            // K
  double temperature = 0.0;
  EstimatorMethod estimator_method = EstimatorMethod::kWeightedSum;
  bool stepwise_enabled = true;
  double threshold = 0.0;  // tau; 0 keeps every answered run for sweeps
  std::string preset = "trust";
  std::string model = "mock";
  std::string tag;  // defaults to the preset name

  void validate() const;          // throws std::invalid_argument
  std::string fingerprint() const;
  std::string effective_tag() const { return tag.empty() ? preset : tag; }
};

struct Question {
  std::string id;
  std::string text;
};

// Eq-style decision rule: provide iff confidence >= threshold.
Decision decide(double confidence, double threshold);

// Deterministic rendering of the reasoning history. Step confidence
// lines ("Step confidence: X/10") appear only when present and enabled.
std::string assemble_history(std::span<const StepTrace> traces, bool include_step_confidence);

// System message (role, schema, step protocol, and the step-confidence
// instruction when enabled), K demonstration exchanges, then the
// question. Throws when fewer than K demonstrations are available.
std::vector<Message> build_agent_prompt(const std::string& question,
                                        const std::string& ehr_metadata,
                                        std::span<const Demonstration> demonstrations,
                                        const AgentConfig& config);

struct ParsedResponse {
  bool is_final = false;
  std::string final_answer;
  std::string thought;
  std::string program;
};

// Splits a model reply into final answer vs. thought+program per the
// step protocol. A reply with neither marker counts as a bare program.
ParsedResponse parse_agent_response(std::string_view text);

// Recovers the executable SQL from an emitted program: marker and
// comment lines are dropped; for the python dialect the first quoted
// run_sql(...) / query(...) argument is taken.
std::optional<std::string> extract_program_sql(std::string_view program, ProgramDialect dialect);

// Runs the full loop for one question: up to T generate/execute/observe
// cycles, early exit on the final-answer marker, then the configured
// estimator over (question, history, answer) and the threshold decision.
// Backend calls are retried twice; persistent failure yields a run with
// `error` set.
AgentRun run_question(const Question& question, const EhrDatabase& db, const AgentConfig& config,
                      Backend& backend, std::vector<std::string>* warnings = nullptr);

}  // namespace ehrqa
