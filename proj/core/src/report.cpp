#include "ehrqa/report.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "ehrqa/util.hpp"

namespace ehrqa {

ReportFormat report_format_from_name(const std::string& name) {
  if (name == "plain") return ReportFormat::kPlain;
  if (name == "csv") return ReportFormat::kCsv;
  throw std::invalid_argument("unknown report format: " + name);
}

void ReportSpec::validate() const {
  if (k_list.empty()) throw std::invalid_argument("k list is empty");
  double prev = -1.0;
  for (double k : k_list) {
    if (!(k >= 0.0 && k <= 100.0)) throw std::invalid_argument("k outside [0,100]");
    if (k <= prev) throw std::invalid_argument("k list must be strictly increasing");
    prev = k;
  }
}

namespace {

std::string k_header(double k) { return "@" + format_double(k) + "%"; }

}  // namespace

std::string render_report(const std::map<std::string, std::vector<EvalRecord>>& by_tag,
                          const ReportSpec& spec) {
  spec.validate();
  if (by_tag.empty()) throw std::invalid_argument("no records to report");

  std::vector<std::string> tags;
  std::size_t widest_tag = std::string("method").size();
  for (const auto& [tag, records] : by_tag) {
    if (records.empty()) throw std::invalid_argument("no records for tag: " + tag);
    tags.push_back(tag);
    widest_tag = std::max(widest_tag, tag.size());
  }

  std::string out;
  if (spec.format == ReportFormat::kCsv) {
    out = "method";
    for (double k : spec.k_list) out += "," + k_header(k);
    out += "\n";
    for (const auto& tag : tags) {
      out += tag;
      for (double k : spec.k_list) {
        HcaccResult res = hcacc_at_k(by_tag.at(tag), k);
        out += "," + format_fixed(res.score * 100.0, 2);
      }
      out += "\n";
    }
    return out;
  }

  constexpr int kColWidth = 9;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(widest_tag + 2), "method");
  out = buf;
  for (double k : spec.k_list) {
    std::snprintf(buf, sizeof(buf), "%*s", kColWidth, k_header(k).c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& tag : tags) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(widest_tag + 2), tag.c_str());
    out += buf;
    for (double k : spec.k_list) {
      HcaccResult res = hcacc_at_k(by_tag.at(tag), k);
      std::snprintf(buf, sizeof(buf), "%*s", kColWidth,
                    format_fixed(res.score * 100.0, 2).c_str());
      out += buf;
    }
    out += "\n";
  }
  out +=
      "\nnote: thresholds no answer reaches are scored with conditional accuracy 1, "
      "hallucination rate 0, and overall accuracy 0 (vacuous set).\n";
  return out;
}

std::string render_curve_csv(const MetricCurve& curve) {
  std::string out = "tau,attempted,correct,CA,HR,RR,OA\n";
  for (const auto& row : curve.rows) {
    out += format_double(row.tau);
    out += "," + std::to_string(row.attempted);
    out += "," + std::to_string(row.correct);
    out += "," + format_double(row.ca);
    out += "," + format_double(row.hr);
    out += "," + format_double(row.rr);
    out += "," + format_double(row.oa);
    out += "\n";
  }
  return out;
}

std::string render_case_study(const AgentRun& run) {
  std::string out;
  out += "Question:             " + run.question_text + "\n";
  out += "Reasoning steps:\n";
  for (const auto& t : run.traces) {
    out += "  [" + std::to_string(t.step_index) + "] " +
           (t.thought.empty() ? std::string("(no thought recorded)") : t.thought) + "\n";
  }
  const std::string answer = run.final_answer    ? *run.final_answer
                             : run.withheld_answer ? *run.withheld_answer
                                                   : "(none)";
  out += "Predicted answer:     " + answer + "\n";
  out += "Step-wise confidence: ";
  bool first = true;
  for (const auto& t : run.traces) {
    if (!t.step_confidence) continue;
    if (!first) out += " -> ";
    first = false;
    out += format_fixed(*t.step_confidence, 2);
  }
  if (first) out += "(none)";
  out += "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", run.final_confidence);
  out += "Final confidence:     " + std::string(buf) + "\n";
  if (run.decision.variant == DecisionKind::kProvide) {
    out += "System decision:      Answer provided (threshold " +
           format_double(run.decision.threshold_used) + ")\n";
  } else {
    out += "System decision:      Answer rejected (threshold " +
           format_double(run.decision.threshold_used) + ")\n";
  }
  return out;
}

}  // namespace ehrqa
