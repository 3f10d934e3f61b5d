#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ehrqa {

inline constexpr int kDefaultMaxSteps = 10;

enum class DecisionKind { kProvide, kReject };

std::string decision_kind_name(DecisionKind kind);
DecisionKind decision_kind_from_name(const std::string& name);

// The answer/abstain outcome for one run at a given threshold.
struct Decision {
  DecisionKind variant = DecisionKind::kReject;
  double threshold_used = 0.0;

  bool operator==(const Decision&) const = default;
};

// One reasoning step: emitted program, execution observation, and the
// step confidence parsed from the program's marker comment (if any).
struct StepTrace {
  int step_index = 0;  // 1-based
  std::string thought;
  std::string program;
  std::string observation;
  std::optional<double> step_confidence;  // in [0,1]

  bool operator==(const StepTrace&) const = default;
};

// A full question trajectory. `final_answer` is present iff the decision
// is Provide; an answer withheld by a Reject decision is kept in
// `withheld_answer` for inspection but never graded.
struct AgentRun {
  std::string question_id;
  std::string question_text;
  std::string tag;
  std::vector<StepTrace> traces;
  std::optional<std::string> final_answer;
  std::optional<std::string> withheld_answer;
  double final_confidence = 0.0;
  Decision decision;
  std::string config_fingerprint;
  int max_steps = kDefaultMaxSteps;
  std::optional<std::string> error;  // set when the backend failed; excluded from metrics

  bool operator==(const AgentRun&) const = default;
};

// One store line: the run plus its grading against the gold answer.
struct RunRecord {
  AgentRun run;
  bool is_correct = false;
  std::string gold_answer;

  bool operator==(const RunRecord&) const = default;
};

// The atom all metrics are computed from.
struct EvalRecord {
  std::string question_id;
  double confidence = 0.0;
  bool is_correct = false;
  std::optional<std::string> answer_text;
  std::string tag;

  bool operator==(const EvalRecord&) const = default;
};

// Throws std::invalid_argument when a run violates its invariants
// (confidence bounds, trace ordering and budget, decision consistency).
void validate_run(const AgentRun& run);

// The decision a stored run must carry: Reject when there is no answer,
// otherwise Provide iff final_confidence >= threshold.
DecisionKind expected_decision(const AgentRun& run);

nlohmann::json run_record_to_json(const RunRecord& rec);
RunRecord run_record_from_json(const nlohmann::json& j);

EvalRecord eval_record_from_run(const RunRecord& rec);

// Append-only newline-delimited store of run records. Appends are atomic
// per record (single write); loads see a consistent prefix.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path path);
  ~RunStore();

  RunStore(const RunStore&) = delete;
  RunStore& operator=(const RunStore&) = delete;

  // Validates, serializes and appends one record. Returns the record's
  // 0-based position.
  std::uint64_t append(const RunRecord& rec);

  struct LoadResult {
    std::vector<RunRecord> records;
    std::vector<std::string> warnings;
  };

  // All well-formed records, in append order. Errored runs are kept here
  // (callers that compute metrics must go through load_records).
  LoadResult load_run_records() const;

  // Eval records joined with grading, excluding errored runs (a warning
  // per exclusion). Throws on malformed lines or missing grading.
  std::vector<EvalRecord> load_records(
      const std::optional<std::string>& tag_filter = std::nullopt,
      std::vector<std::string>* warnings = nullptr) const;

  const std::filesystem::path& path() const { return path_; }
  bool exists() const { return std::filesystem::exists(path_); }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  int fd_ = -1;
  std::uint64_t next_position_ = 0;
};

}  // namespace ehrqa
