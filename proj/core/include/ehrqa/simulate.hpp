#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehrqa/confidence.hpp"
#include "ehrqa/records.hpp"

namespace ehrqa {

// Synthetic populations for threshold-sweep analysis without a backend.
//
// "calibrated": draw a latent confidence c from a Kumaraswamy(a,b)
// distribution and make the record correct with probability exactly c;
// the stored confidence is c quantized to the estimator method's
// granularity (binary -> {0,1}, discrete -> 11 levels, weighted_sum ->
// the continuum).
//
// "independent": correctness is Bernoulli(accuracy), unrelated to the
// drawn confidence.
struct PopulationSpec {
  std::size_t count = 0;
  std::string model = "calibrated";  // "calibrated" | "independent"
  double shape_a = 1.0;              // confidence shape parameters
  double shape_b = 1.0;
  double accuracy = 0.5;  // independent model only
  EstimatorMethod method = EstimatorMethod::kWeightedSum;
  std::string tag = "sim";

  void validate() const;  // throws std::invalid_argument
};

PopulationSpec population_spec_from_json(const nlohmann::json& j);

std::vector<EvalRecord> simulate_records(const PopulationSpec& spec, std::uint64_t seed);

// The same population materialized as storable run records (answered at
// threshold 0, graded against a synthetic gold answer).
std::vector<RunRecord> simulate_run_records(const PopulationSpec& spec, std::uint64_t seed);

}  // namespace ehrqa
