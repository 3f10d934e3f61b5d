#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ehrqa/cli.hpp"
#include "ehrqa/fixtures.hpp"
#include "ehrqa/metrics.hpp"
#include "ehrqa/simulate.hpp"
#include "ehrqa/util.hpp"

using namespace ehrqa;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ehrqa_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) { return read_text_file(path.string()); }

const FixturePaths& shared_fixtures() {
  static auto dir = fresh_dir("fixtures");
  static FixturePaths paths = build_fixtures({dir, 7});
  return paths;
}

void write_sim_spec(const std::filesystem::path& path, const std::string& model,
                    const std::string& method, std::size_t count, const std::string& tag,
                    double accuracy = 0.5) {
  nlohmann::json j{{"count", count},   {"model", model},       {"method", method},
                   {"shape_a", 1.0},   {"shape_b", 1.0},       {"accuracy", accuracy},
                   {"tag", tag}};
  std::ofstream out(path);
  out << j.dump();
}

}  // namespace

TEST_CASE("population specs validate their fields") {
  PopulationSpec spec;
  spec.count = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.count = 10;
  spec.model = "psychic";
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.model = "independent";
  spec.accuracy = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.accuracy = 0.5;
  spec.shape_a = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("simulation is seed-deterministic and method-quantized") {
  PopulationSpec spec;
  spec.count = 400;
  spec.tag = "sim";

  auto a = simulate_records(spec, 11);
  auto b = simulate_records(spec, 11);
  CHECK(a == b);
  auto c = simulate_records(spec, 12);
  CHECK(a != c);

  spec.method = EstimatorMethod::kBinary;
  for (const auto& r : simulate_records(spec, 11)) {
    CHECK((r.confidence == 0.0 || r.confidence == 1.0));
  }
  spec.method = EstimatorMethod::kDiscrete;
  std::set<double> seen;
  for (const auto& r : simulate_records(spec, 11)) seen.insert(r.confidence);
  CHECK(seen.size() <= 11);
}

TEST_CASE("calibrated populations keep accuracy at strict k, independent ones collapse") {
  PopulationSpec spec;
  spec.count = 2000;

  spec.model = "calibrated";
  auto calibrated = simulate_records(spec, 31);
  CHECK(hcacc_at_k(calibrated, 70.0).score > 0.1);
  CHECK(hcacc_at_k(calibrated, 90.0).score > 0.0);

  spec.model = "independent";
  spec.accuracy = 0.5;
  auto independent = simulate_records(spec, 31);
  // HR sits near 1 - accuracy at every threshold, so constraints beyond
  // the accuracy point leave at most a stray tail operating point.
  CHECK(hcacc_at_k(independent, 0.0).score == doctest::Approx(0.5).epsilon(0.1));
  CHECK(hcacc_at_k(independent, 70.0).score < 0.02);
  CHECK(hcacc_at_k(independent, 90.0).score < 0.02);
}

TEST_CASE("cmd_simulate writes a loadable store") {
  auto dir = fresh_dir("simulate");
  write_sim_spec(dir / "spec.json", "calibrated", "weighted_sum", 250, "cal");

  std::ostringstream out, err;
  SimulateOptions options{dir / "spec.json", dir / "sim.jsonl", 5};
  REQUIRE(cmd_simulate(options, out, err) == 0);
  CHECK(out.str().find("250") != std::string::npos);

  RunStore store(dir / "sim.jsonl");
  auto records = store.load_records();
  CHECK(records.size() == 250);

  // Same spec and seed, byte-identical store.
  SimulateOptions options2{dir / "spec.json", dir / "sim2.jsonl", 5};
  REQUIRE(cmd_simulate(options2, out, err) == 0);
  CHECK(slurp(dir / "sim.jsonl") == slurp(dir / "sim2.jsonl"));

  SimulateOptions bad{dir / "spec.json", dir / "sim3.jsonl", 5};
  write_sim_spec(dir / "spec.json", "calibrated", "weighted_sum", 0, "cal");
  CHECK(cmd_simulate(bad, out, err) == 1);
}

TEST_CASE("cmd_run honors --limit and mock scripts") {
  auto dir = fresh_dir("run_limit");
  const FixturePaths& fx = shared_fixtures();

  RunOptions options;
  options.dataset = fx.dataset;
  options.config = fx.config_trust;
  options.store = dir / "runs.jsonl";
  options.mock_script = fx.mock_trust;
  options.limit = 5;

  std::ostringstream out, err;
  REQUIRE(cmd_run(options, out, err) == 0);
  RunStore store(options.store);
  CHECK(store.load_run_records().records.size() == 5);
  CHECK(out.str().find("ran 5 questions") != std::string::npos);
}

TEST_CASE("cmd_run applies threshold and tag overrides, withholding rejected answers") {
  auto dir = fresh_dir("run_threshold");
  const FixturePaths& fx = shared_fixtures();

  RunOptions options;
  options.dataset = fx.dataset;
  options.config = fx.config_trust;
  options.store = dir / "strict.jsonl";
  options.mock_script = fx.mock_trust;
  options.threshold = 0.9;
  options.tag = "strict";

  std::ostringstream out, err;
  REQUIRE(cmd_run(options, out, err) == 0);
  RunStore store(options.store);
  auto loaded = store.load_run_records();
  REQUIRE(!loaded.records.empty());

  std::size_t rejected = 0;
  for (const auto& rec : loaded.records) {
    CHECK(rec.run.tag == "strict");
    CHECK(rec.run.decision.threshold_used == 0.9);
    if (rec.run.decision.variant == DecisionKind::kReject) {
      ++rejected;
      CHECK_FALSE(rec.run.final_answer.has_value());
      CHECK(rec.run.withheld_answer.has_value());  // inspectable, ungraded
      CHECK_FALSE(rec.is_correct);
      CHECK(rec.run.final_confidence < 0.9);
    } else {
      CHECK(rec.run.final_confidence >= 0.9);
    }
  }
  CHECK(rejected > 0);
  CHECK(out.str().find("rejected " + std::to_string(rejected)) != std::string::npos);

  // The rejected-heavy store still reports cleanly.
  ReportOptions report_options;
  report_options.store = options.store;
  report_options.emit_curves = false;
  std::ostringstream report_out;
  REQUIRE(cmd_report(report_options, report_out, err) == 0);
  CHECK(report_out.str().find("strict") != std::string::npos);
}

TEST_CASE("plain report format is aligned and footnoted") {
  auto dir = fresh_dir("plain_report");
  RunStore store(dir / "r.jsonl");
  for (int i = 0; i < 4; ++i) {
    RunRecord rec;
    rec.run.question_id = "q" + std::to_string(i);
    rec.run.tag = i % 2 == 0 ? "alpha" : "bravo";
    rec.run.final_answer = "a";
    rec.run.final_confidence = 0.25 * static_cast<double>(i);
    rec.run.decision = {DecisionKind::kProvide, 0.0};
    rec.run.max_steps = 1;
    rec.is_correct = i % 2 == 0;
    rec.gold_answer = "a";
    store.append(rec);
  }
  ReportOptions options;
  options.store = dir / "r.jsonl";
  options.emit_curves = false;
  std::ostringstream out, err;
  REQUIRE(cmd_report(options, out, err) == 0);
  std::string text = out.str();
  CHECK(text.find("method") != std::string::npos);
  CHECK(text.find("@0%") != std::string::npos);
  CHECK(text.find("note:") != std::string::npos);

  // Two method rows, equal width up to the row label padding.
  std::istringstream lines(text);
  std::string header, alpha, bravo;
  std::getline(lines, header);
  std::getline(lines, alpha);
  std::getline(lines, bravo);
  CHECK(alpha.rfind("alpha", 0) == 0);
  CHECK(bravo.rfind("bravo", 0) == 0);
  CHECK(alpha.size() == bravo.size());
  CHECK(header.size() == alpha.size());
}

TEST_CASE("cmd_run without a script or endpoint is a configuration error") {
  auto dir = fresh_dir("run_noconfig");
  const FixturePaths& fx = shared_fixtures();

  RunOptions options;
  options.dataset = fx.dataset;
  options.config = fx.config_trust;  // backend type mock
  options.store = dir / "runs.jsonl";

  std::ostringstream out, err;
  CHECK(cmd_run(options, out, err) == 2);
  CHECK(err.str().find("configuration error") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(options.store));
}

TEST_CASE("parallel runs produce the same store as sequential runs") {
  auto dir = fresh_dir("run_parallel");
  const FixturePaths& fx = shared_fixtures();

  auto run_with = [&](int parallel, const std::string& name) {
    RunOptions options;
    options.dataset = fx.dataset;
    options.config = fx.config_trust;
    options.store = dir / name;
    options.mock_script = fx.mock_trust;
    options.parallel = parallel;
    std::ostringstream out, err;
    REQUIRE(cmd_run(options, out, err) == 0);
    return slurp(options.store);
  };

  CHECK(run_with(1, "seq.jsonl") == run_with(4, "par.jsonl"));
}

TEST_CASE("report numbers agree with the metrics module") {
  auto dir = fresh_dir("report");
  const FixturePaths& fx = shared_fixtures();

  RunOptions run_options;
  run_options.dataset = fx.dataset;
  run_options.config = fx.config_trust;
  run_options.store = dir / "runs.jsonl";
  run_options.mock_script = fx.mock_trust;
  std::ostringstream out, err;
  REQUIRE(cmd_run(run_options, out, err) == 0);

  ReportOptions report_options;
  report_options.store = dir / "runs.jsonl";
  report_options.format = "csv";
  report_options.k_list = {0.0, 50.0, 70.0, 90.0};
  std::ostringstream report_out;
  REQUIRE(cmd_report(report_options, report_out, err) == 0);

  RunStore store(dir / "runs.jsonl");
  auto records = store.load_records(std::string("trust"));
  REQUIRE(!records.empty());

  std::istringstream lines(report_out.str());
  std::string line;
  std::getline(lines, line);  // header
  std::getline(lines, line);  // trust row
  REQUIRE(line.rfind("trust,", 0) == 0);
  std::vector<std::string> cells;
  std::stringstream cell_stream(line);
  std::string cell;
  while (std::getline(cell_stream, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() == 5);
  const double ks[] = {0.0, 50.0, 70.0, 90.0};
  for (int i = 0; i < 4; ++i) {
    double expected = hcacc_at_k(records, ks[i]).score * 100.0;
    CHECK(cells[i + 1] == format_fixed(expected, 2));
  }

  // Curve files landed next to the store and agree with metric_curve.
  auto curve_path = dir / "runs.curve.trust.csv";
  REQUIRE(std::filesystem::exists(curve_path));
  std::string curve_text = slurp(curve_path);
  CHECK(curve_text.rfind("tau,attempted,correct,CA,HR,RR,OA\n", 0) == 0);
  MetricCurve curve = metric_curve(records);
  CHECK(std::count(curve_text.begin(), curve_text.end(), '\n') ==
        static_cast<long>(curve.rows.size() + 1));
}

TEST_CASE("a perfect store reports 100 at every k") {
  auto dir = fresh_dir("perfect");
  RunStore store(dir / "perfect.jsonl");
  for (int i = 0; i < 10; ++i) {
    RunRecord rec;
    rec.run.question_id = "q" + std::to_string(i);
    rec.run.tag = "perfect";
    rec.run.final_answer = "yes";
    rec.run.final_confidence = 0.1 * static_cast<double>(i);
    rec.run.decision = {DecisionKind::kProvide, 0.0};
    rec.run.max_steps = 1;
    rec.is_correct = true;
    rec.gold_answer = "yes";
    store.append(rec);
  }
  ReportOptions options;
  options.store = dir / "perfect.jsonl";
  options.format = "csv";
  options.emit_curves = false;
  std::ostringstream out, err;
  REQUIRE(cmd_report(options, out, err) == 0);
  CHECK(out.str().find("perfect,100.00,100.00,100.00,100.00") != std::string::npos);
}

TEST_CASE("the worked four-record store reports 75/75/25") {
  auto dir = fresh_dir("worked");
  RunStore store(dir / "four.jsonl");
  const std::pair<double, bool> rows[] = {
      {0.9, true}, {0.8, false}, {0.6, true}, {0.4, true}};
  int i = 0;
  for (auto [conf, correct] : rows) {
    RunRecord rec;
    rec.run.question_id = "q" + std::to_string(++i);
    rec.run.tag = "demo";
    rec.run.final_answer = correct ? "yes" : "no";
    rec.run.final_confidence = conf;
    rec.run.decision = {DecisionKind::kProvide, 0.0};
    rec.run.max_steps = 1;
    rec.is_correct = correct;
    rec.gold_answer = "yes";
    store.append(rec);
  }
  ReportOptions options;
  options.store = dir / "four.jsonl";
  options.format = "csv";
  options.k_list = {0.0, 70.0, 90.0};
  options.emit_curves = false;
  std::ostringstream out, err;
  REQUIRE(cmd_report(options, out, err) == 0);
  CHECK(out.str().find("demo,75.00,75.00,25.00") != std::string::npos);
}

TEST_CASE("report rejects unknown tags and empty stores") {
  auto dir = fresh_dir("report_errors");
  ReportOptions options;
  options.store = dir / "missing.jsonl";
  std::ostringstream out, err;
  CHECK(cmd_report(options, out, err) == 1);

  RunStore store(dir / "some.jsonl");
  RunRecord rec;
  rec.run.question_id = "q";
  rec.run.tag = "known";
  rec.run.final_answer = "a";
  rec.run.final_confidence = 0.5;
  rec.run.decision = {DecisionKind::kProvide, 0.0};
  rec.run.max_steps = 1;
  rec.gold_answer = "a";
  rec.is_correct = true;
  store.append(rec);
  options.store = dir / "some.jsonl";
  options.tags = {"unknown"};
  err.str("");
  CHECK(cmd_report(options, out, err) == 1);
  CHECK(err.str().find("unknown tag") != std::string::npos);
}

TEST_CASE("report spec validation") {
  ReportSpec spec;
  spec.k_list = {0.0, 50.0, 50.0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.k_list = {0.0, 101.0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.k_list = {};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("sweep emits the curve for one tag") {
  auto dir = fresh_dir("sweep");
  write_sim_spec(dir / "spec.json", "calibrated", "weighted_sum", 100, "cal");
  std::ostringstream out, err;
  REQUIRE(cmd_simulate({dir / "spec.json", dir / "sim.jsonl", 3}, out, err) == 0);

  SweepOptions options;
  options.store = dir / "sim.jsonl";
  options.tag = "cal";
  std::ostringstream csv;
  REQUIRE(cmd_sweep(options, csv, err) == 0);
  CHECK(csv.str().rfind("tau,attempted,correct", 0) == 0);

  options.tag = "nope";
  CHECK(cmd_sweep(options, csv, err) == 1);
}

TEST_CASE("replay prints the case layout") {
  auto dir = fresh_dir("replay");
  const FixturePaths& fx = shared_fixtures();
  std::filesystem::path cases = EHRQA_CASES_DIR;

  ReplayOptions options;
  options.case_file = cases / "case1.json";
  options.config = fx.config_trust;
  std::ostringstream out, err;
  REQUIRE(cmd_replay(options, out, err) == 0);
  CHECK(out.str().find("Answer provided") != std::string::npos);
  CHECK(out.str().find("0.95 -> 0.92 -> 0.90") != std::string::npos);
  CHECK(out.str().find("0.99") != std::string::npos);

  options.case_file = cases / "case2.json";
  std::ostringstream out2;
  REQUIRE(cmd_replay(options, out2, err) == 0);
  CHECK(out2.str().find("Answer rejected") != std::string::npos);
  CHECK(out2.str().find("0.499") != std::string::npos);

  options.threshold = 0.4;
  std::ostringstream out3;
  REQUIRE(cmd_replay(options, out3, err) == 0);
  CHECK(out3.str().find("Answer provided") != std::string::npos);

  options.case_file = dir / "malformed.json";
  {
    std::ofstream bad(options.case_file);
    bad << "{not json";
  }
  CHECK(cmd_replay(options, out, err) == 1);
}
