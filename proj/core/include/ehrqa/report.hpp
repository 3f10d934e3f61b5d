#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ehrqa/metrics.hpp"
#include "ehrqa/records.hpp"

namespace ehrqa {

enum class ReportFormat { kPlain, kCsv };

ReportFormat report_format_from_name(const std::string& name);

struct ReportSpec {
  std::vector<double> k_list = {0.0, 50.0, 70.0, 90.0};
  ReportFormat format = ReportFormat::kPlain;

  void validate() const;  // k values in [0,100], strictly increasing
};

// One row per method tag, one column per k; scores as percentages with
// two decimals, mirroring the reporting layout used by the harness.
std::string render_report(const std::map<std::string, std::vector<EvalRecord>>& by_tag,
                          const ReportSpec& spec);

// "tau,attempted,correct,CA,HR,RR,OA" rows at full precision.
std::string render_curve_csv(const MetricCurve& curve);

// Case-study rendering of one run: query, steps, step confidences,
// final confidence, and the decision line.
std::string render_case_study(const AgentRun& run);

}  // namespace ehrqa
