#include "ehrqa/records.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ehrqa/util.hpp"

namespace ehrqa {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::string decision_kind_name(DecisionKind kind) {
  return kind == DecisionKind::kProvide ? "provide" : "reject";
}

DecisionKind decision_kind_from_name(const std::string& name) {
  if (name == "provide") return DecisionKind::kProvide;
  if (name == "reject") return DecisionKind::kReject;
  throw std::invalid_argument("unknown decision variant: " + name);
}

DecisionKind expected_decision(const AgentRun& run) {
  if (!run.final_answer && !run.withheld_answer) return DecisionKind::kReject;
  return run.final_confidence >= run.decision.threshold_used
             ? DecisionKind::kProvide
             : DecisionKind::kReject;
}

void validate_run(const AgentRun& run) {
  require(!run.question_id.empty(), "run has empty question_id");
  require(run.max_steps >= 1, "max_steps must be >= 1");
  require(run.final_confidence >= 0.0 && run.final_confidence <= 1.0,
          "final_confidence outside [0,1]: " + format_double(run.final_confidence));
  require(run.decision.threshold_used >= 0.0 && run.decision.threshold_used <= 1.0,
          "threshold_used outside [0,1]");
  require(static_cast<int>(run.traces.size()) <= run.max_steps,
          "run records " + std::to_string(run.traces.size()) +
              " traces, exceeding the step budget T=" + std::to_string(run.max_steps));
  int prev = 0;
  for (const auto& t : run.traces) {
    require(t.step_index > prev, "step_index not strictly increasing");
    prev = t.step_index;
    if (t.step_confidence) {
      require(*t.step_confidence >= 0.0 && *t.step_confidence <= 1.0,
              "step_confidence outside [0,1]");
    }
  }
  if (run.decision.variant == DecisionKind::kProvide) {
    require(run.final_answer.has_value(), "Provide decision without a final answer");
  } else {
    require(!run.final_answer.has_value(), "Reject decision with final_answer set");
  }
  if (!run.error) {
    require(run.decision.variant == expected_decision(run),
            "decision variant inconsistent with confidence and threshold");
  }
}

nlohmann::json run_record_to_json(const RunRecord& rec) {
  const AgentRun& run = rec.run;
  nlohmann::json j;
  j["question_id"] = run.question_id;
  j["question_text"] = run.question_text;
  j["tag"] = run.tag;
  j["traces"] = nlohmann::json::array();
  for (const auto& t : run.traces) {
    nlohmann::json tj;
    tj["step_index"] = t.step_index;
    tj["thought"] = t.thought;
    tj["program"] = t.program;
    tj["observation"] = t.observation;
    if (t.step_confidence) tj["step_confidence"] = *t.step_confidence;
    j["traces"].push_back(std::move(tj));
  }
  if (run.final_answer) j["final_answer"] = *run.final_answer;
  if (run.withheld_answer) j["withheld_answer"] = *run.withheld_answer;
  j["final_confidence"] = run.final_confidence;
  j["decision"] = {{"variant", decision_kind_name(run.decision.variant)},
                   {"threshold_used", run.decision.threshold_used}};
  j["config_fingerprint"] = run.config_fingerprint;
  j["max_steps"] = run.max_steps;
  if (run.error) {
    j["error"] = *run.error;
  } else {
    j["is_correct"] = rec.is_correct;
    j["gold_answer"] = rec.gold_answer;
  }
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord rec;
  AgentRun& run = rec.run;
  run.question_id = j.at("question_id").get<std::string>();
  run.question_text = j.value("question_text", std::string{});
  run.tag = j.value("tag", std::string{});
  if (j.contains("traces")) {
    for (const auto& tj : j.at("traces")) {
      StepTrace t;
      t.step_index = tj.at("step_index").get<int>();
      t.thought = tj.value("thought", std::string{});
      t.program = tj.value("program", std::string{});
      t.observation = tj.value("observation", std::string{});
      if (tj.contains("step_confidence")) t.step_confidence = tj.at("step_confidence").get<double>();
      run.traces.push_back(std::move(t));
    }
  }
  if (j.contains("final_answer")) run.final_answer = j.at("final_answer").get<std::string>();
  if (j.contains("withheld_answer")) run.withheld_answer = j.at("withheld_answer").get<std::string>();
  run.final_confidence = j.at("final_confidence").get<double>();
  run.decision.variant = decision_kind_from_name(j.at("decision").at("variant").get<std::string>());
  run.decision.threshold_used = j.at("decision").at("threshold_used").get<double>();
  run.config_fingerprint = j.value("config_fingerprint", std::string{});
  run.max_steps = j.value("max_steps", kDefaultMaxSteps);
  if (j.contains("error")) {
    run.error = j.at("error").get<std::string>();
  } else {
    if (!j.contains("is_correct") || !j.contains("gold_answer")) {
      throw std::invalid_argument("grading result missing for run " + run.question_id);
    }
    rec.is_correct = j.at("is_correct").get<bool>();
    rec.gold_answer = j.at("gold_answer").get<std::string>();
  }
  return rec;
}

EvalRecord eval_record_from_run(const RunRecord& rec) {
  EvalRecord r;
  r.question_id = rec.run.question_id;
  r.confidence = rec.run.final_confidence;
  r.answer_text = rec.run.final_answer;
  // An unattempted question can never count as correct.
  r.is_correct = rec.run.final_answer.has_value() && rec.is_correct;
  r.tag = rec.run.tag;
  return r;
}

RunStore::RunStore(std::filesystem::path path) : path_(std::move(path)) {}

RunStore::~RunStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t RunStore::append(const RunRecord& rec) {
  validate_run(rec.run);
  if (!rec.run.error && rec.is_correct && !rec.run.final_answer) {
    throw std::invalid_argument("record graded correct without an answer");
  }
  std::string line = run_record_to_json(rec).dump();
  line.push_back('\n');

  std::lock_guard<std::mutex> lock(mu_);
  if (fd_ < 0) {
    // Resume positions after any records already in the file.
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_, std::ios::binary);
      std::string existing;
      while (std::getline(in, existing)) {
        if (!existing.empty()) ++next_position_;
      }
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) {
      throw std::runtime_error("cannot open store for append: " + path_.string() +
                               ": " + std::strerror(errno));
    }
  }
  // One write per record keeps concurrent appends intact.
  ssize_t n = ::write(fd_, line.data(), line.size());
  if (n != static_cast<ssize_t>(line.size())) {
    throw std::runtime_error("short write to store: " + path_.string());
  }
  return next_position_++;
}

RunStore::LoadResult RunStore::load_run_records() const {
  LoadResult out;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open store: " + path_.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool terminated = !in.eof();
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (!terminated) {
        // Torn tail from an in-flight append: readers keep the consistent prefix.
        out.warnings.push_back("ignoring unterminated partial record at line " +
                               std::to_string(lineno));
        break;
      }
      throw std::runtime_error(path_.string() + ":" + std::to_string(lineno) +
                               ": malformed record line");
    }
    try {
      out.records.push_back(run_record_from_json(j));
    } catch (const std::exception& e) {
      throw std::runtime_error(path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalRecord> RunStore::load_records(const std::optional<std::string>& tag_filter,
                                               std::vector<std::string>* warnings) const {
  LoadResult loaded = load_run_records();
  std::vector<EvalRecord> out;
  out.reserve(loaded.records.size());
  for (const auto& rec : loaded.records) {
    if (rec.run.error) {
      loaded.warnings.push_back("excluding errored run " + rec.run.question_id + ": " +
                                *rec.run.error);
      continue;
    }
    EvalRecord r = eval_record_from_run(rec);
    if (tag_filter && r.tag != *tag_filter) continue;
    out.push_back(std::move(r));
  }
  if (warnings) {
    warnings->insert(warnings->end(), loaded.warnings.begin(), loaded.warnings.end());
  }
  return out;
}

}  // namespace ehrqa
