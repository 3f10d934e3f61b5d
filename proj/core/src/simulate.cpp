#include "ehrqa/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ehrqa/util.hpp"

namespace ehrqa {

void PopulationSpec::validate() const {
  if (count == 0) throw std::invalid_argument("population count must be positive");
  if (model != "calibrated" && model != "independent") {
    throw std::invalid_argument("unknown population model: " + model);
  }
  if (!(shape_a > 0.0) || !(shape_b > 0.0)) {
    throw std::invalid_argument("confidence shape parameters must be positive");
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw std::invalid_argument("accuracy outside [0,1]");
  }
}

PopulationSpec population_spec_from_json(const nlohmann::json& j) {
  PopulationSpec spec;
  spec.count = j.at("count").get<std::size_t>();
  spec.model = j.value("model", std::string("calibrated"));
  spec.shape_a = j.value("shape_a", 1.0);
  spec.shape_b = j.value("shape_b", 1.0);
  spec.accuracy = j.value("accuracy", 0.5);
  spec.method = estimator_method_from_name(j.value("method", std::string("weighted_sum")));
  spec.tag = j.value("tag", std::string("sim"));
  spec.validate();
  return spec;
}

namespace {

// Kumaraswamy(a,b) via its closed-form inverse CDF; deterministic across
// platforms with the project Rng.
double sample_confidence(Rng& rng, double a, double b) {
  double u = rng.uniform();
  return std::pow(1.0 - std::pow(1.0 - u, 1.0 / b), 1.0 / a);
}

double quantize(double c, EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::kBinary:
      return c >= 0.5 ? 1.0 : 0.0;
    case EstimatorMethod::kDiscrete:
      return std::round(c * 10.0) / 10.0;
    case EstimatorMethod::kWeightedSum:
      return c;
  }
  return c;
}

}  // namespace

std::vector<EvalRecord> simulate_records(const PopulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng(seed).fork("simulate:" + spec.tag);
  std::vector<EvalRecord> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    double latent = sample_confidence(rng, spec.shape_a, spec.shape_b);
    bool correct = spec.model == "calibrated" ? rng.uniform() < latent
                                              : rng.uniform() < spec.accuracy;
    EvalRecord r;
    char qid[32];
    std::snprintf(qid, sizeof(qid), "sim-%05zu", i + 1);
    r.question_id = qid;
    r.confidence = quantize(latent, spec.method);
    r.is_correct = correct;
    r.answer_text = correct ? "gold" : "other";
    r.tag = spec.tag;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunRecord> simulate_run_records(const PopulationSpec& spec, std::uint64_t seed) {
  std::vector<RunRecord> out;
  for (const auto& r : simulate_records(spec, seed)) {
    RunRecord rec;
    rec.run.question_id = r.question_id;
    rec.run.question_text = "synthetic population sample";
    rec.run.tag = r.tag;
    rec.run.final_answer = r.answer_text;
    rec.run.final_confidence = r.confidence;
    rec.run.decision = {DecisionKind::kProvide, 0.0};
    rec.run.config_fingerprint = "simulated";
    rec.run.max_steps = 1;
    rec.is_correct = r.is_correct;
    rec.gold_answer = "gold";
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace ehrqa
