#include "ehrqa/agent.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "ehrqa/prompt_assets.hpp"
#include "ehrqa/util.hpp"

namespace ehrqa {

std::string program_dialect_name(ProgramDialect d) {
  return d == ProgramDialect::kSql ? "sql" : "python";
}

ProgramDialect program_dialect_from_name(const std::string& name) {
  if (name == "sql") return ProgramDialect::kSql;
  if (name == "python") return ProgramDialect::kPython;
  throw std::invalid_argument("unknown program dialect: " + name);
}

namespace {

Demonstration make_demo(std::vector<Message> exchange) { return Demonstration{std::move(exchange)}; }

std::vector<Demonstration> trust_demos() {
  return {
      make_demo({
          {"user", "How many hospital admissions does patient 10011 have?"},
          {"assistant",
           "Thought: Count admission rows for the subject.\n"
           "Program:\n"
           "# Confidence: 9\n"
           "SELECT COUNT(*) FROM admissions WHERE admissions.subject_id = 10011"},
          {"user", "Observation:\n2"},
          {"assistant", "FINAL ANSWER: 2"},
      }),
      make_demo({
          {"user", "What is aspirin's way of ingesting it?"},
          {"assistant",
           "Thought: The route column of prescriptions holds the administration route.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "SELECT DISTINCT prescriptions.route FROM prescriptions WHERE prescriptions.drug = "
           "'aspirin'"},
          {"user", "Observation:\npo"},
          {"assistant", "FINAL ANSWER: po"},
      }),
      make_demo({
          {"user", "What was the last measured heart rate of patient 10026?"},
          {"assistant",
           "Thought: Resolve the chart item id for heart rate first.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "SELECT d_items.itemid FROM d_items WHERE d_items.label = 'heart rate'"},
          {"user", "Observation:\n211"},
          {"assistant",
           "Thought: Take the most recent chart value of that item for the patient.\n"
           "Program:\n"
           "# Confidence: 7\n"
           "SELECT chartevents.valuenum FROM chartevents WHERE chartevents.itemid = 211 AND "
           "chartevents.subject_id = 10026 ORDER BY chartevents.charttime DESC LIMIT 1"},
          {"user", "Observation:\n88.0"},
          {"assistant", "FINAL ANSWER: 88.0"},
      }),
      make_demo({
          {"user", "How many patients were diagnosed with hypertension nos?"},
          {"assistant",
           "Thought: Map the diagnosis title to its code.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "SELECT d_icd_diagnoses.icd9_code FROM d_icd_diagnoses WHERE "
           "d_icd_diagnoses.short_title = 'hypertension nos'"},
          {"user", "Observation:\n4019"},
          {"assistant",
           "Thought: Count distinct subjects carrying that code.\n"
           "Program:\n"
           "# Confidence: 9\n"
           "SELECT COUNT(DISTINCT diagnoses_icd.subject_id) FROM diagnoses_icd WHERE "
           "diagnoses_icd.icd9_code = '4019'"},
          {"user", "Observation:\n6"},
          {"assistant", "FINAL ANSWER: 6"},
      }),
  };
}

std::vector<Demonstration> sql_baseline_demos() {
  return {
      make_demo({
          {"user", "How many hospital admissions does patient 10011 have?"},
          {"assistant",
           "Thought: One aggregate query answers this directly.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "SELECT COUNT(*) FROM admissions WHERE admissions.subject_id = 10011"},
          {"user", "Observation:\n2"},
          {"assistant", "FINAL ANSWER: 2"},
      }),
      make_demo({
          {"user", "What is aspirin's way of ingesting it?"},
          {"assistant",
           "Thought: Select the distinct route for the drug.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "SELECT DISTINCT prescriptions.route FROM prescriptions WHERE prescriptions.drug = "
           "'aspirin'"},
          {"user", "Observation:\npo"},
          {"assistant", "FINAL ANSWER: po"},
      }),
      make_demo({
          {"user", "What was the last measured heart rate of patient 10026?"},
          {"assistant",
           "Thought: Join the dictionary inline and sort by time.\n"
           "Program:\n"
           "# Confidence: 7\n"
           "SELECT chartevents.valuenum FROM chartevents WHERE chartevents.itemid IN (SELECT "
           "d_items.itemid FROM d_items WHERE d_items.label = 'heart rate') AND "
           "chartevents.subject_id = 10026 ORDER BY chartevents.charttime DESC LIMIT 1"},
          {"user", "Observation:\n88.0"},
          {"assistant", "FINAL ANSWER: 88.0"},
      }),
      make_demo({
          {"user", "How many patients were diagnosed with hypertension nos?"},
          {"assistant",
           "Thought: Nest the code lookup inside the count.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "SELECT COUNT(DISTINCT diagnoses_icd.subject_id) FROM diagnoses_icd WHERE "
           "diagnoses_icd.icd9_code IN (SELECT d_icd_diagnoses.icd9_code FROM d_icd_diagnoses "
           "WHERE d_icd_diagnoses.short_title = 'hypertension nos')"},
          {"user", "Observation:\n6"},
          {"assistant", "FINAL ANSWER: 6"},
      }),
  };
}

std::vector<Demonstration> python_baseline_demos() {
  return {
      make_demo({
          {"user", "How many hospital admissions does patient 10011 have?"},
          {"assistant",
           "Thought: Fetch the count with one query.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "count = run_sql(\"SELECT COUNT(*) FROM admissions WHERE admissions.subject_id = "
           "10011\")"},
          {"user", "Observation:\n2"},
          {"assistant", "FINAL ANSWER: 2"},
      }),
      make_demo({
          {"user", "What is aspirin's way of ingesting it?"},
          {"assistant",
           "Thought: Look up the stored route for the drug.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "route = run_sql(\"SELECT DISTINCT prescriptions.route FROM prescriptions WHERE "
           "prescriptions.drug = 'aspirin'\")"},
          {"user", "Observation:\npo"},
          {"assistant", "FINAL ANSWER: po"},
      }),
      make_demo({
          {"user", "What was the last measured heart rate of patient 10026?"},
          {"assistant",
           "Thought: Sort chart values by time and keep the newest.\n"
           "Program:\n"
           "# Confidence: 7\n"
           "value = run_sql(\"SELECT chartevents.valuenum FROM chartevents WHERE "
           "chartevents.itemid IN (SELECT d_items.itemid FROM d_items WHERE d_items.label = "
           "'heart rate') AND chartevents.subject_id = 10026 ORDER BY chartevents.charttime DESC "
           "LIMIT 1\")"},
          {"user", "Observation:\n88.0"},
          {"assistant", "FINAL ANSWER: 88.0"},
      }),
      make_demo({
          {"user", "How many patients were diagnosed with hypertension nos?"},
          {"assistant",
           "Thought: Count distinct subjects for the mapped code.\n"
           "Program:\n"
           "# Confidence: 8\n"
           "n = run_sql(\"SELECT COUNT(DISTINCT diagnoses_icd.subject_id) FROM diagnoses_icd "
           "WHERE diagnoses_icd.icd9_code IN (SELECT d_icd_diagnoses.icd9_code FROM "
           "d_icd_diagnoses WHERE d_icd_diagnoses.short_title = 'hypertension nos')\")"},
          {"user", "Observation:\n6"},
          {"assistant", "FINAL ANSWER: 6"},
      }),
  };
}

}  // namespace

const AgentPreset& builtin_preset(const std::string& name) {
  static const std::vector<AgentPreset> presets = [] {
    std::vector<AgentPreset> p;
    p.push_back({"trust", ProgramDialect::kSql, trust_demos()});
    p.push_back({"sql-baseline", ProgramDialect::kSql, sql_baseline_demos()});
    p.push_back({"python-baseline", ProgramDialect::kPython, python_baseline_demos()});
    return p;
  }();
  for (const auto& p : presets) {
    if (p.name == name) return p;
  }
  throw std::invalid_argument("unknown agent preset: " + name);
}

void AgentConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (few_shot_count < 0) throw std::invalid_argument("few_shot_count must be >= 0");
  if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold outside [0,1]");
  }
  builtin_preset(preset);  // throws on unknown preset
}

std::string AgentConfig::fingerprint() const {
  std::string canon;
  canon += "model=" + model;
  canon += ";temperature=" + format_double(temperature);
  canon += ";T=" + std::to_string(max_steps);
  canon += ";K=" + std::to_string(few_shot_count);
  canon += ";S_max=" + std::to_string(kMaxLevel);
  canon += ";method=" + estimator_method_name(estimator_method);
  canon += ";tau=" + format_double(threshold);
  canon += ";stepwise=" + std::string(stepwise_enabled ? "on" : "off");
  canon += ";preset=" + preset;
  return fnv1a64_hex(canon);
}

Decision decide(double confidence, double threshold) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw std::invalid_argument("confidence outside [0,1]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold outside [0,1]");
  }
  return {confidence >= threshold ? DecisionKind::kProvide : DecisionKind::kReject, threshold};
}

std::string assemble_history(std::span<const StepTrace> traces, bool include_step_confidence) {
  std::string out;
  bool first = true;
  for (const auto& t : traces) {
    if (!first) out += "\n\n";
    first = false;
    out += "Step " + std::to_string(t.step_index) + ":\n";
    out += "Thought: " + t.thought + "\n";
    out += "Program:\n" + t.program + "\n";
    out += "Observation: " + t.observation;
    if (include_step_confidence && t.step_confidence) {
      out += "\nStep confidence: " + times_ten_text(*t.step_confidence) + "/10";
    }
  }
  return out;
}

namespace {

std::string strip_marker_lines(const std::string& text) {
  std::string out;
  bool first = true;
  for (auto line : split_lines(text)) {
    if (trim(line).starts_with("# Confidence:")) continue;
    if (!first) out += "\n";
    first = false;
    out.append(line);
  }
  return out;
}

std::string system_prompt(const std::string& ehr_metadata, ProgramDialect dialect,
                          bool stepwise_enabled) {
  std::string out =
      "You are a clinical question answering assistant working over a relational EHR "
      "database.\n\nDatabase schema:\n";
  out += ehr_metadata;
  out += "\nOn each turn reply in exactly one of two forms.\n\n";
  if (dialect == ProgramDialect::kSql) {
    out +=
        "To query the database (one read-only SQL statement per turn):\n"
        "Thought: <why this step>\n"
        "Program:\n"
        "<one SQL statement>\n";
  } else {
    out +=
        "To query the database (one query per turn):\n"
        "Thought: <why this step>\n"
        "Program:\n"
        "result = run_sql(\"<one read-only SQL statement>\")\n";
  }
  out +=
      "\nThe statement's result (or its error text) comes back as the next observation.\n\n"
      "To finish, reply with a single line:\n"
      "FINAL ANSWER: <answer>\n\n"
      "Answers must be terse: bare numbers without units, values lowercase as stored, lists "
      "comma-separated in result order.";
  if (stepwise_enabled) {
    std::string instruction = assets::kStepwiseInstructionV1;
    while (!instruction.empty() && (instruction.back() == '\n' || instruction.back() == '\r')) {
      instruction.pop_back();
    }
    out += "\n\n" + instruction;
  }
  return out;
}

}  // namespace

std::vector<Message> build_agent_prompt(const std::string& question,
                                        const std::string& ehr_metadata,
                                        std::span<const Demonstration> demonstrations,
                                        const AgentConfig& config) {
  config.validate();
  const std::size_t k = static_cast<std::size_t>(config.few_shot_count);
  if (demonstrations.size() < k) {
    throw std::invalid_argument("only " + std::to_string(demonstrations.size()) +
                                " demonstrations available, config asks for K=" +
                                std::to_string(k));
  }
  const AgentPreset& preset = builtin_preset(config.preset);

  std::vector<Message> messages;
  messages.push_back({"system", system_prompt(ehr_metadata, preset.dialect,
                                              config.stepwise_enabled)});
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& m : demonstrations[i].exchange) {
      if (!config.stepwise_enabled && m.role == "assistant") {
        messages.push_back({m.role, strip_marker_lines(m.content)});
      } else {
        messages.push_back(m);
      }
    }
  }
  messages.push_back({"user", question});
  return messages;
}

ParsedResponse parse_agent_response(std::string_view text) {
  ParsedResponse out;
  auto lines = split_lines(text);

  for (auto line : lines) {
    std::string_view t = trim(line);
    if (t.starts_with("FINAL ANSWER:")) {
      out.is_final = true;
      out.final_answer = std::string(trim(t.substr(std::string_view("FINAL ANSWER:").size())));
      return out;
    }
  }

  constexpr std::size_t kNoMarker = static_cast<std::size_t>(-1);
  std::size_t program_start = kNoMarker;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == "Program:") {
      program_start = i + 1;
      break;
    }
  }

  if (program_start == kNoMarker) {
    // No explicit marker: the whole reply is the program.
    out.program = std::string(trim(text));
    return out;
  }

  std::string thought;
  for (std::size_t i = 0; i + 1 < program_start; ++i) {
    std::string_view t = trim(lines[i]);
    if (t.starts_with("Thought:")) t = trim(t.substr(std::string_view("Thought:").size()));
    if (t.empty()) continue;
    if (!thought.empty()) thought += "\n";
    thought.append(t);
  }
  out.thought = thought;

  std::string program;
  for (std::size_t i = program_start; i < lines.size(); ++i) {
    if (i > program_start) program += "\n";
    program.append(lines[i]);
  }
  out.program = std::string(trim(program));
  return out;
}

std::optional<std::string> extract_program_sql(std::string_view program, ProgramDialect dialect) {
  std::string body;
  bool first = true;
  for (auto line : split_lines(program)) {
    if (trim(line).starts_with("#")) continue;
    if (!first) body += "\n";
    first = false;
    body.append(line);
  }
  std::string stripped(trim(body));
  if (stripped.empty()) return std::nullopt;

  if (dialect == ProgramDialect::kSql) return stripped;

  // Python dialect: take the first quoted argument of a query call.
  for (std::string_view callee : {"run_sql(", "query(", "execute("}) {
    auto pos = stripped.find(callee);
    if (pos == std::string::npos) continue;
    std::size_t i = pos + callee.size();
    while (i < stripped.size() && std::isspace(static_cast<unsigned char>(stripped[i]))) ++i;
    if (i >= stripped.size() || (stripped[i] != '"' && stripped[i] != '\'')) continue;
    char quote = stripped[i];
    ++i;
    std::string literal;
    bool closed = false;
    for (; i < stripped.size(); ++i) {
      char c = stripped[i];
      if (c == '\\' && i + 1 < stripped.size()) {
        literal.push_back(stripped[++i]);
        continue;
      }
      if (c == quote) {
        closed = true;
        break;
      }
      literal.push_back(c);
    }
    if (closed && !trim(literal).empty()) return std::string(trim(literal));
  }

  // A bare SQL statement is accepted in either dialect.
  std::string head = to_lower(stripped.substr(0, 6));
  if (head.starts_with("select") || head.starts_with("with")) return stripped;
  return std::nullopt;
}

namespace {

std::optional<BackendResponse> call_with_retry(Backend& backend, const BackendRequest& request,
                                               std::string& error_out) {
  constexpr int kMaxRetries = 2;  // no backoff: temperature 0 retries are deterministic
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    try {
      return backend.complete(request);
    } catch (const std::exception& e) {
      error_out = e.what();
    }
  }
  return std::nullopt;
}

std::string brief(const std::string& text) {
  std::string t(trim(text));
  if (t.size() > 80) t = t.substr(0, 77) + "...";
  return t;
}

std::optional<int> first_level_digit(std::string_view text) {
  std::string_view t = trim(text);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= '0' && t[i] <= '0' + kMaxLevel) {
      bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(t[i - 1]));
      bool right_ok = i + 1 >= t.size() || !std::isalnum(static_cast<unsigned char>(t[i + 1]));
      if (left_ok && right_ok) return t[i] - '0';
    }
  }
  return std::nullopt;
}

std::optional<double> weighted_confidence_from_response(const BackendResponse& resp) {
  // Prefer the position whose sampled token is itself a level digit.
  for (const auto& pos : resp.positions) {
    std::string_view tok = trim(pos.token);
    bool is_level = tok.size() == 1 && tok[0] >= '0' && tok[0] <= '0' + kMaxLevel;
    if (!is_level || pos.alternatives.empty()) continue;
    try {
      return weighted_logprob_confidence(extract_level_distribution(pos.alternatives));
    } catch (const std::invalid_argument&) {
    }
  }
  for (const auto& pos : resp.positions) {
    if (pos.alternatives.empty()) continue;
    try {
      return weighted_logprob_confidence(extract_level_distribution(pos.alternatives));
    } catch (const std::invalid_argument&) {
    }
  }
  // Backend without logprob support: degenerate distribution on the text digit.
  if (auto level = first_level_digit(resp.text)) {
    return weighted_logprob_confidence(
        ConfidenceDistribution::from_logprobs({{*level, 0.0}}));
  }
  return std::nullopt;
}

}  // namespace

AgentRun run_question(const Question& question, const EhrDatabase& db, const AgentConfig& config,
                      Backend& backend, std::vector<std::string>* warnings) {
  config.validate();
  const AgentPreset& preset = builtin_preset(config.preset);

  AgentRun run;
  run.question_id = question.id;
  run.question_text = question.text;
  run.tag = config.effective_tag();
  run.config_fingerprint = config.fingerprint();
  run.max_steps = config.max_steps;
  run.decision.threshold_used = config.threshold;
  run.decision.variant = DecisionKind::kReject;

  auto errored = [&](std::string why) {
    run.error = std::move(why);
    run.final_answer.reset();
    run.withheld_answer.reset();
    run.final_confidence = 0.0;
    run.decision.variant = DecisionKind::kReject;
    if (warnings) warnings->push_back(run.question_id + ": " + *run.error);
    return run;
  };

  std::vector<Message> messages =
      build_agent_prompt(question.text, db.schema_text(), preset.demonstrations, config);

  std::optional<std::string> answer;
  std::string backend_error;
  for (int step = 1; step <= config.max_steps; ++step) {
    BackendRequest request;
    request.messages = messages;
    request.temperature = config.temperature;
    request.model = config.model;
    auto resp = call_with_retry(backend, request, backend_error);
    if (!resp) return errored("backend failure: " + backend_error);

    ParsedResponse parsed = parse_agent_response(resp->text);
    if (parsed.is_final) {
      answer = parsed.final_answer;
      break;
    }

    std::string marker_warning;
    auto step_conf = parse_step_confidence(parsed.program, &marker_warning);
    if (!marker_warning.empty() && warnings) {
      warnings->push_back(run.question_id + ": " + marker_warning);
    }

    std::string observation;
    if (auto sql = extract_program_sql(parsed.program, preset.dialect)) {
      observation = execute_query(db, *sql).text;
    } else {
      observation = "error: no executable SQL found in program";
    }

    run.traces.push_back({step, parsed.thought, parsed.program, observation, step_conf});
    messages.push_back({"assistant", resp->text});
    messages.push_back({"user", "Observation:\n" + observation});
  }

  if (!answer) {
    // Step budget exhausted without a final answer.
    run.final_confidence = 0.0;
    run.decision.variant = DecisionKind::kReject;
    return run;
  }

  std::string history = assemble_history(run.traces, config.stepwise_enabled);
  std::string prompt =
      build_estimator_prompt({question.text, history, *answer}, config.estimator_method);
  BackendRequest estimator_request;
  estimator_request.messages = {{"user", prompt}};
  estimator_request.temperature = 0.0;
  estimator_request.model = config.model;
  estimator_request.want_logprobs = config.estimator_method == EstimatorMethod::kWeightedSum;
  auto eresp = call_with_retry(backend, estimator_request, backend_error);
  if (!eresp) return errored("estimator backend failure: " + backend_error);

  double confidence = 0.0;
  switch (config.estimator_method) {
    case EstimatorMethod::kWeightedSum: {
      auto c = weighted_confidence_from_response(*eresp);
      if (!c) return errored("estimator response has no usable confidence level: " +
                             brief(eresp->text));
      confidence = *c;
      break;
    }
    case EstimatorMethod::kBinary: {
      auto verdict = parse_binary_verdict(eresp->text);
      if (!verdict) return errored("unparseable accept/reject verdict: " + brief(eresp->text));
      confidence = binary_confidence(*verdict);
      break;
    }
    case EstimatorMethod::kDiscrete: {
      auto score = parse_discrete_score(eresp->text);
      if (!score) return errored("unparseable 0-10 confidence score: " + brief(eresp->text));
      confidence = discrete_confidence(*score);
      break;
    }
  }

  run.final_confidence = confidence;
  run.decision = decide(confidence, config.threshold);
  if (run.decision.variant == DecisionKind::kProvide) {
    run.final_answer = answer;
  } else {
    run.withheld_answer = answer;
  }
  return run;
}

}  // namespace ehrqa
