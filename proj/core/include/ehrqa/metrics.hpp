#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ehrqa/records.hpp"

namespace ehrqa {

// Threshold sweep rows. The candidate set is {0} plus every observed
// confidence plus one sentinel strictly above the maximum, which is
// enough: every metric is a step function that changes only at observed
// confidences.
struct CurveRow {
  double tau = 0.0;
  std::size_t attempted = 0;  // |Q_tau|
  std::size_t correct = 0;    // |Q_tau correct|
  double ca = 0.0;
  double hr = 0.0;
  double rr = 0.0;
  double oa = 0.0;

  bool operator==(const CurveRow&) const = default;
};

struct MetricCurve {
  std::vector<CurveRow> rows;  // ascending tau
  std::size_t total = 0;       // |Q|
};

struct HcaccResult {
  double k = 0.0;
  double score = 0.0;
  std::optional<double> chosen_tau;
  bool feasible = false;
};

// Fraction of correct answers among records with confidence >= tau.
// Defined as 1 when no record qualifies (vacuous set), so that the
// hallucination constraint is vacuously satisfiable at zero accuracy.
double conditional_accuracy(std::span<const EvalRecord> records, double tau);

// Fraction of incorrect answers among records with confidence >= tau;
// 0 on the vacuous set.
double hallucination_rate(std::span<const EvalRecord> records, double tau);

// Fraction of all records with confidence >= tau.
double response_rate(std::span<const EvalRecord> records, double tau);

// Correct answers with confidence >= tau over all records.
double overall_accuracy(std::span<const EvalRecord> records, double tau);

MetricCurve metric_curve(std::span<const EvalRecord> records);

// Maximum overall accuracy over thresholds whose hallucination rate is
// at most (100-k)/100, considering only thresholds with a nonempty
// attempted set. Ties on score resolve to the smallest threshold.
HcaccResult hcacc_at_k(std::span<const EvalRecord> records, double k);

// Sorted distinct observed confidences, with 0 prepended. Every
// threshold in this list has a nonempty attempted set.
std::vector<double> candidate_thresholds(std::span<const EvalRecord> records);

}  // namespace ehrqa
