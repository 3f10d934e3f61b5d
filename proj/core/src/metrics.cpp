#include "ehrqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace ehrqa {

namespace {

struct Counts {
  std::size_t attempted = 0;
  std::size_t correct = 0;
};

Counts count_at(std::span<const EvalRecord> records, double tau) {
  Counts c;
  for (const auto& r : records) {
    if (r.confidence >= tau) {
      ++c.attempted;
      if (r.is_correct) ++c.correct;
    }
  }
  return c;
}

void check_preconditions(std::span<const EvalRecord> records, double tau) {
  if (records.empty()) throw std::invalid_argument("metric over empty record list");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau outside [0,1]");
}

}  // namespace

double conditional_accuracy(std::span<const EvalRecord> records, double tau) {
  check_preconditions(records, tau);
  Counts c = count_at(records, tau);
  if (c.attempted == 0) return 1.0;
  return static_cast<double>(c.correct) / static_cast<double>(c.attempted);
}

double hallucination_rate(std::span<const EvalRecord> records, double tau) {
  check_preconditions(records, tau);
  Counts c = count_at(records, tau);
  if (c.attempted == 0) return 0.0;
  // Single division of integer counts; equal to 1 - CA up to rounding.
  return static_cast<double>(c.attempted - c.correct) / static_cast<double>(c.attempted);
}

double response_rate(std::span<const EvalRecord> records, double tau) {
  check_preconditions(records, tau);
  Counts c = count_at(records, tau);
  return static_cast<double>(c.attempted) / static_cast<double>(records.size());
}

double overall_accuracy(std::span<const EvalRecord> records, double tau) {
  check_preconditions(records, tau);
  Counts c = count_at(records, tau);
  return static_cast<double>(c.correct) / static_cast<double>(records.size());
}

std::vector<double> candidate_thresholds(std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("metric over empty record list");
  std::set<double> taus;
  taus.insert(0.0);
  for (const auto& r : records) taus.insert(r.confidence);
  return {taus.begin(), taus.end()};
}

MetricCurve metric_curve(std::span<const EvalRecord> records) {
  std::vector<double> taus = candidate_thresholds(records);
  double max_conf = 0.0;
  for (const auto& r : records) max_conf = std::max(max_conf, r.confidence);
  // Sentinel strictly above the maximum: the all-rejected operating point.
  taus.push_back(std::nextafter(max_conf, std::numeric_limits<double>::infinity()));

  MetricCurve curve;
  curve.total = records.size();
  curve.rows.reserve(taus.size());
  for (double tau : taus) {
    // The sentinel may exceed 1; compute counts directly rather than
    // through the [0,1]-checked entry points.
    Counts c = count_at(records, tau);
    CurveRow row;
    row.tau = tau;
    row.attempted = c.attempted;
    row.correct = c.correct;
    row.ca = c.attempted == 0
                 ? 1.0
                 : static_cast<double>(c.correct) / static_cast<double>(c.attempted);
    row.hr = c.attempted == 0
                 ? 0.0
                 : static_cast<double>(c.attempted - c.correct) / static_cast<double>(c.attempted);
    row.rr = static_cast<double>(c.attempted) / static_cast<double>(curve.total);
    row.oa = static_cast<double>(c.correct) / static_cast<double>(curve.total);
    curve.rows.push_back(row);
  }
  return curve;
}

HcaccResult hcacc_at_k(std::span<const EvalRecord> records, double k) {
  if (records.empty()) throw std::invalid_argument("hcacc over empty record list");
  if (!(k >= 0.0 && k <= 100.0)) throw std::invalid_argument("k outside [0,100]");

  const double hr_limit = (100.0 - k) / 100.0;
  HcaccResult result;
  result.k = k;

  // Ascending sweep with strict improvement keeps the smallest optimal
  // threshold, i.e. the highest response rate among ties.
  for (double tau : candidate_thresholds(records)) {
    Counts c = count_at(records, tau);
    if (c.attempted == 0) continue;
    double hr = static_cast<double>(c.attempted - c.correct) / static_cast<double>(c.attempted);
    if (hr > hr_limit) continue;
    double oa = static_cast<double>(c.correct) / static_cast<double>(records.size());
    if (!result.feasible || oa > result.score) {
      result.feasible = true;
      result.score = oa;
      result.chosen_tau = tau;
    }
  }
  return result;
}

}  // namespace ehrqa
