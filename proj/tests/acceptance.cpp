// Acceptance suite: each criterion prints one PASS/FAIL line; the
// process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "ehrqa/agent.hpp"
#include "ehrqa/cli.hpp"
#include "ehrqa/confidence.hpp"
#include "ehrqa/fixtures.hpp"
#include "ehrqa/metrics.hpp"
#include "ehrqa/simulate.hpp"
#include "ehrqa/util.hpp"
#include "oracle.hpp"

using namespace ehrqa;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw Failure(what);
}

void require_close(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    throw Failure(what + ": got " + format_double(got) + ", want " + format_double(want));
  }
}

std::filesystem::path work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "ehrqa_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<EvalRecord> random_grid_records(Rng& rng, std::size_t max_size) {
  std::size_t n = 1 + rng.below(max_size);
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    EvalRecord r;
    r.question_id = "q" + std::to_string(i);
    r.confidence = 0.05 * static_cast<double>(rng.below(21));
    r.is_correct = rng.uniform() < 0.5;
    r.answer_text = "a";
    out.push_back(std::move(r));
  }
  return out;
}

// ---- criterion 1 -----------------------------------------------------

void criterion_metric_oracle() {
  auto start = std::chrono::steady_clock::now();
  Rng rng(1001);
  for (int rep = 0; rep < 1000; ++rep) {
    auto records = random_grid_records(rng, 20);
    auto taus = oracle::observed_taus(records);

    MetricCurve curve = metric_curve(records);
    require(curve.total == records.size(), "curve total mismatch");
    require(curve.rows.size() == taus.size() + 1, "curve row count mismatch");
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const CurveRow& row = curve.rows[i];
      require(row.tau == taus[i], "curve threshold mismatch");
      auto subset = oracle::subset_at(records, row.tau);
      require(row.attempted == subset.size(), "attempted count mismatch");
      require(row.correct == oracle::correct_in(subset), "correct count mismatch");
      require(row.ca == oracle::ca(records, row.tau), "CA mismatch");
      require(row.hr == oracle::hr(records, row.tau), "HR mismatch");
      require(row.rr == oracle::rr(records, row.tau), "RR mismatch");
      require(row.oa == oracle::oa(records, row.tau), "OA mismatch");
    }
    require(curve.rows.back().attempted == 0, "sentinel row not empty");

    for (int kk = 0; kk <= 20; ++kk) {
      double k = 5.0 * static_cast<double>(kk);
      HcaccResult got = hcacc_at_k(records, k);
      oracle::HcaccOracle want = oracle::hcacc(records, k, taus);
      require(got.feasible == want.feasible, "hcacc feasibility mismatch");
      require(got.score == want.score, "hcacc score mismatch");
      if (want.feasible) {
        require(got.chosen_tau.has_value() && *got.chosen_tau == *want.tau,
                "hcacc tie-break mismatch");
      } else {
        require(!got.chosen_tau.has_value(), "infeasible hcacc carries a tau");
      }
    }
  }
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  require(elapsed.count() < 10000, "oracle sweep exceeded 10 s: " +
                                       std::to_string(elapsed.count()) + " ms");
}

// ---- criterion 2 -----------------------------------------------------

void criterion_identities() {
  Rng rng(2002);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<EvalRecord> records;
    std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      EvalRecord r;
      r.question_id = "q" + std::to_string(i);
      r.confidence = rng.uniform();
      r.is_correct = rng.uniform() < 0.6;
      r.answer_text = "a";
      records.push_back(std::move(r));
    }
    for (const auto& row : metric_curve(records).rows) {
      require(std::abs(row.oa - row.ca * row.rr) <= 1e-12, "OA != CA*RR beyond 1e-12");
      if (row.attempted > 0) {
        require(std::abs(row.hr - (1.0 - row.ca)) <= 1e-12, "HR != 1-CA beyond 1e-12");
      }
    }
  }
  for (int rep = 0; rep < 100; ++rep) {
    auto records = random_grid_records(rng, 30);
    double prev = 2.0;
    for (int k = 0; k <= 100; k += 1) {
      double score = hcacc_at_k(records, static_cast<double>(k)).score;
      require(score <= prev + 1e-15, "hcacc increased with k");
      prev = score;
    }
  }
}

// ---- criterion 3 -----------------------------------------------------

void criterion_hcacc_zero_is_accuracy(const std::vector<std::filesystem::path>& stores) {
  Rng rng(3003);
  for (int rep = 0; rep < 200; ++rep) {
    auto records = random_grid_records(rng, 25);
    require(hcacc_at_k(records, 0.0).score == overall_accuracy(records, 0.0),
            "hcacc@0 != OA(0) on a random set");
  }
  for (const auto& path : stores) {
    RunStore store(path);
    auto records = store.load_records();
    std::map<std::string, std::vector<EvalRecord>> by_tag;
    for (auto& r : records) by_tag[r.tag].push_back(r);
    for (auto& [tag, tag_records] : by_tag) {
      require(hcacc_at_k(tag_records, 0.0).score == overall_accuracy(tag_records, 0.0),
              "hcacc@0 != OA(0) in store " + path.string() + " tag " + tag);
    }
  }
}

// ---- criterion 4 -----------------------------------------------------

void criterion_weighted_estimator() {
  Rng rng(4004);
  for (int rep = 0; rep < 10000; ++rep) {
    std::map<int, double> lps;
    int n = 1 + static_cast<int>(rng.below(5));
    while (static_cast<int>(lps.size()) < n) {
      lps[static_cast<int>(rng.below(5))] = -30.0 * rng.uniform();
    }
    auto dist = ConfidenceDistribution::from_logprobs(lps);
    double c = weighted_logprob_confidence(dist);
    require(c >= 0.0 && c <= 1.0, "weighted confidence out of [0,1]");

    double shift = -10.0 * rng.uniform();
    auto shifted = lps;
    for (auto& [_, lp] : shifted) lp += shift;
    double c_shifted =
        weighted_logprob_confidence(ConfidenceDistribution::from_logprobs(shifted));
    require(std::abs(c - c_shifted) <= 1e-9, "logprob shift moved the confidence");

    auto probs = dist.probabilities();
    auto lo = probs.begin();
    auto hi = std::prev(probs.end());
    if (lo->first < hi->first && lo->second > 1e-12) {
      double moved = lo->second * rng.uniform();
      std::map<int, double> bumped;
      for (auto& [level, p] : probs) {
        double np = p;
        if (level == lo->first) np -= moved;
        if (level == hi->first) np += moved;
        if (np > 0.0) bumped[level] = std::log(np);
      }
      double c_up = weighted_logprob_confidence(ConfidenceDistribution::from_logprobs(bumped));
      require(c_up >= c - 1e-12, "moving mass upward lowered the confidence");
    }
  }
  double hand = weighted_logprob_confidence(
      ConfidenceDistribution::from_logprobs({{3, std::log(0.7)}, {4, std::log(0.3)}}));
  require_close(hand, 0.825, 1e-12, "hand-evaluated weighted confidence");
}

// ---- criterion 5 -----------------------------------------------------

AgentRun replay_case(const std::filesystem::path& case_file, const EhrDatabase& db) {
  std::ifstream in(case_file);
  require(static_cast<bool>(in), "cannot open case script " + case_file.string());
  nlohmann::json case_json;
  in >> case_json;

  AgentConfig config;
  config.preset = case_json.value("preset", std::string("trust"));
  config.estimator_method =
      estimator_method_from_name(case_json.value("estimator_method", std::string("weighted_sum")));
  config.stepwise_enabled = case_json.value("stepwise_enabled", true);
  config.threshold = case_json.value("threshold", 0.5);

  std::vector<ScriptEntry> script;
  for (const auto& ej : case_json.at("script")) script.push_back(script_entry_from_json(ej));
  MockBackend backend(std::move(script));
  return run_question({case_json.value("question_id", std::string("case")),
                       case_json.at("question").get<std::string>()},
                      db, config, backend);
}

void criterion_case_replays(const std::filesystem::path& cases_dir, const EhrDatabase& mimic) {
  AgentRun case1 = replay_case(cases_dir / "case1.json", mimic);
  require(!case1.error.has_value(), "case 1 errored");
  require(case1.traces.size() == 3, "case 1 trace count");
  require(case1.traces[0].step_confidence == 0.95, "case 1 step 1 confidence");
  require(case1.traces[1].step_confidence == 0.92, "case 1 step 2 confidence");
  require(case1.traces[2].step_confidence == 0.9, "case 1 step 3 confidence");
  require_close(case1.final_confidence, 0.99, 1e-12, "case 1 final confidence");
  require(case1.decision.variant == DecisionKind::kProvide, "case 1 not provided");
  require(case1.final_answer == "potassium chloride, insulin, furosemide, d5w, ns",
          "case 1 answer text");

  AgentRun case2 = replay_case(cases_dir / "case2.json", mimic);
  require(!case2.error.has_value(), "case 2 errored");
  require(case2.traces.size() == 3, "case 2 trace count");
  require(case2.traces[0].step_confidence == 0.9, "case 2 step 1 confidence");
  require(case2.traces[1].step_confidence == 0.6, "case 2 step 2 confidence");
  require(case2.traces[2].step_confidence == 0.4, "case 2 step 3 confidence");
  require_close(case2.final_confidence, 0.499, 1e-12, "case 2 final confidence");
  require(case2.decision.variant == DecisionKind::kReject, "case 2 not rejected");
  require(case2.withheld_answer == "No result found", "case 2 withheld answer");
}

// ---- criterion 6 -----------------------------------------------------

void criterion_gold_oracle(const EhrDatabase& mimic, const EhrDatabase& eicu) {
  auto items = build_dataset_items(mimic, eicu);
  require(items.size() >= 40, "fewer than 40 dataset items");
  for (const auto& item : items) {
    const EhrDatabase& db = item.database_id == "mimic-like" ? mimic : eicu;
    std::string computed = gold_answer(db, item.gold_query);
    require(grade_exact_match(std::string_view(computed), item.gold_answer),
            "gold mismatch for " + item.question_id);
  }
  QueryResult res = execute_query(
      mimic,
      "SELECT DISTINCT prescriptions.route FROM prescriptions WHERE prescriptions.drug = "
      "'lidocaine 5% ointment'");
  require(res.ok && res.text == "tp", "route query did not return tp");
}

// ---- criterion 7 -----------------------------------------------------

std::set<double> nonzero_hcacc_values(const std::vector<EvalRecord>& records) {
  std::set<double> values;
  for (int k = 0; k <= 100; ++k) {
    double score = hcacc_at_k(records, static_cast<double>(k)).score;
    if (score > 0.0) values.insert(score);
  }
  return values;
}

void criterion_method_granularity() {
  PopulationSpec spec;
  spec.count = 600;
  spec.model = "calibrated";

  spec.method = EstimatorMethod::kBinary;
  auto binary = simulate_records(spec, 7007);
  require(nonzero_hcacc_values(binary).size() <= 2,
          "binary estimator produced more than 2 distinct nonzero values");

  spec.method = EstimatorMethod::kDiscrete;
  auto discrete = simulate_records(spec, 7007);
  require(nonzero_hcacc_values(discrete).size() <= 11,
          "discrete estimator produced more than 11 distinct nonzero values");

  spec.method = EstimatorMethod::kWeightedSum;
  auto weighted = simulate_records(spec, 7007);
  MetricCurve curve = metric_curve(weighted);
  std::set<double> curve_taus;
  for (const auto& row : curve.rows) curve_taus.insert(row.tau);
  for (const auto& r : weighted) {
    require(curve_taus.count(r.confidence) == 1,
            "weighted curve missing observed threshold " + format_double(r.confidence));
  }
  // Granularity ordering: the continuous method realizes strictly more
  // operating points than the discrete ones.
  require(nonzero_hcacc_values(weighted).size() > 11,
          "weighted estimator did not out-resolve the discrete one");
}

// ---- criterion 8 -----------------------------------------------------

void criterion_ablation(const FixturePaths& fx, const std::filesystem::path& dir) {
  for (bool stepwise : {true, false}) {
    RunOptions options;
    options.dataset = fx.dataset;
    options.config = fx.config_trust;
    options.store = dir / (stepwise ? "ablation_on.jsonl" : "ablation_off.jsonl");
    options.mock_script = fx.mock_trust;
    options.stepwise = stepwise;
    options.tag = stepwise ? "stepwise-on" : "stepwise-off";
    std::ostringstream out, err;
    require(cmd_run(options, out, err) == 0, "pipeline failed with stepwise " +
                                                 std::string(stepwise ? "on" : "off") + ": " +
                                                 err.str());
    RunStore store(options.store);
    auto loaded = store.load_run_records();
    require(!loaded.records.empty(), "ablation store is empty");
    for (const auto& rec : loaded.records) {
      require(!rec.run.error.has_value(), "ablation run errored");
    }
  }

  // Histories assembled from the same traces differ only in the
  // step-confidence lines.
  RunStore store(dir / "ablation_on.jsonl");
  bool saw_confidence_line = false;
  for (const auto& rec : store.load_run_records().records) {
    std::string with = assemble_history(rec.run.traces, true);
    std::string without = assemble_history(rec.run.traces, false);
    require(without.find("Step confidence:") == std::string::npos,
            "ablated history still carries step-confidence lines");
    std::string scrubbed;
    for (std::string_view line : split_lines(with)) {
      if (trim(line).starts_with("Step confidence:")) {
        saw_confidence_line = true;
        continue;
      }
      if (!scrubbed.empty()) scrubbed += "\n";
      scrubbed.append(line);
    }
    require(scrubbed == without, "histories differ beyond the step-confidence lines");
  }
  require(saw_confidence_line, "no step-confidence lines found in the enabled mode");
}

// ---- criterion 9 -----------------------------------------------------

int run_cli(const std::string& args, const std::filesystem::path& log) {
  std::string cmd = std::string(EHRQA_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

void criterion_end_to_end_determinism(const std::filesystem::path& dir,
                                      std::vector<std::filesystem::path>* stores_out) {
  auto start = std::chrono::steady_clock::now();
  std::vector<std::filesystem::path> roots = {dir / "e2e_a", dir / "e2e_b"};
  for (const auto& root : roots) {
    std::filesystem::create_directories(root);
    auto log = root / "cli.log";
    require(run_cli("fixtures --out " + (root / "fx").string() + " --seed 7", log) == 0,
            "fixtures command failed");
    for (const char* variant : {"trust", "baseline"}) {
      std::string config = (root / "fx" /
                            (variant == std::string("trust") ? "config_trust.json"
                                                             : "config_baseline.json"))
                               .string();
      std::string script = (root / "fx" /
                            (variant == std::string("trust") ? "mock_trust.json"
                                                             : "mock_baseline.json"))
                               .string();
      require(run_cli("run --dataset " + (root / "fx" / "dataset.jsonl").string() + " --config " +
                          config + " --store " + (root / "runs.jsonl").string() +
                          " --mock-script " + script,
                      log) == 0,
              "run command failed");
    }
    require(run_cli("report --store " + (root / "runs.jsonl").string(), log) == 0,
            "report command failed");
  }

  for (const char* file : {"runs.jsonl", "runs.report.txt", "runs.curve.trust.csv",
                           "runs.curve.sql-baseline.csv", "fx/dataset.jsonl",
                           "fx/mock_trust.json"}) {
    std::string a = read_text_file((roots[0] / file).string());
    std::string b = read_text_file((roots[1] / file).string());
    require(!a.empty(), std::string(file) + " is empty");
    require(a == b, std::string(file) + " differs between identical invocations");
  }
  stores_out->push_back(roots[0] / "runs.jsonl");

  auto elapsed =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - start);
  require(elapsed.count() < 60, "end-to-end pipeline exceeded 60 s");
}

}  // namespace

int main() {
  std::filesystem::path dir = work_dir();

  EhrDatabase mimic = EhrDatabase::open_memory();
  build_mimic_database(mimic, 7);
  EhrDatabase eicu = EhrDatabase::open_memory();
  build_eicu_database(eicu, 7);
  FixturePaths fx = build_fixtures({dir / "fixtures", 7});

  std::vector<std::filesystem::path> e2e_stores;

  struct Criterion {
    int number;
    std::string description;
    std::function<void()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric results match exhaustive brute-force enumeration exactly",
       [&] { criterion_metric_oracle(); }},
      {2, "algebraic identities hold within 1e-12 and HCAcc is non-increasing in k",
       [&] { criterion_identities(); }},
      {9, "fixtures + mock run + report are byte-identical across invocations in < 60 s",
       [&] { criterion_end_to_end_determinism(dir, &e2e_stores); }},
      {3, "HCAcc@0% equals standard accuracy on every store",
       [&] { criterion_hcacc_zero_is_accuracy(e2e_stores); }},
      {4, "weighted estimator is bounded, shift-invariant, mass-monotone, and exact on the "
          "hand-evaluated distribution",
       [&] { criterion_weighted_estimator(); }},
      {5, "shipped case scripts reproduce the published step confidences, finals, and decisions",
       [&] { criterion_case_replays(EHRQA_CASES_DIR, mimic); }},
      {6, "every shipped dataset item exact-matches its gold oracle and the route query returns "
          "tp",
       [&] { criterion_gold_oracle(mimic, eicu); }},
      {7, "estimator granularity ordering: binary <= 2, discrete <= 11, weighted continuous",
       [&] { criterion_method_granularity(); }},
      {8, "step-wise ablation toggles only the confidence lines and both modes run end to end",
       [&] { criterion_ablation(fx, dir); }},
  };

  int failures = 0;
  std::vector<std::string> lines(criteria.size() + 1);
  for (const auto& criterion : criteria) {
    std::string line;
    try {
      criterion.check();
      line = "PASS criterion " + std::to_string(criterion.number) + ": " + criterion.description;
    } catch (const std::exception& e) {
      ++failures;
      line = "FAIL criterion " + std::to_string(criterion.number) + ": " +
             criterion.description + " -- " + e.what();
    }
    lines[static_cast<std::size_t>(criterion.number)] = line;
  }
  for (std::size_t i = 1; i < lines.size(); ++i) std::cout << lines[i] << "\n";
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all acceptance criteria passed\n";
  return 0;
}
