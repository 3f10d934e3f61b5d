// ehrqa: confidence-aware EHR question answering harness and
// reliability-constrained evaluation toolkit.

#include <CLI11.hpp>

#include <iostream>

#include "ehrqa/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Confidence-aware EHR QA harness and HCAcc@k% evaluation toolkit"};
  app.require_subcommand(1);

  ehrqa::FixturesOptions fixtures_opts;
  auto* fixtures = app.add_subcommand("fixtures", "Build the synthetic mini-EHR fixture set");
  fixtures->add_option("--out", fixtures_opts.out_dir, "Output directory")
      ->capture_default_str();
  fixtures->add_option("--seed", fixtures_opts.seed, "Generator seed")->capture_default_str();

  ehrqa::RunOptions run_opts;
  std::string run_stepwise;
  auto* run = app.add_subcommand("run", "Run the agent over a dataset and append graded records");
  run->add_option("--dataset", run_opts.dataset, "Dataset file (one item per line)")->required();
  run->add_option("--config", run_opts.config, "Run configuration file")->required();
  run->add_option("--store", run_opts.store, "Run-record store to append to")->required();
  run->add_option("--mock-script", run_opts.mock_script, "Scripted backend replay file");
  run->add_option("--tag", run_opts.tag, "Override the method tag");
  run->add_option("--threshold", run_opts.threshold, "Override the decision threshold");
  run->add_option("--stepwise", run_stepwise, "Override step-wise confidence (on|off)");
  run->add_option("--limit", run_opts.limit, "Run only the first N items");
  run->add_option("--parallel", run_opts.parallel, "Concurrent question workers")
      ->capture_default_str();

  ehrqa::ReportOptions report_opts;
  auto* report = app.add_subcommand("report", "HCAcc@k% table plus per-tag metric curves");
  report->add_option("--store", report_opts.store, "Run-record store")->required();
  report->add_option("--tag", report_opts.tags, "Tags to report (default: all)");
  report->add_option("--k", report_opts.k_list, "k values (default: 0 50 70 90)");
  report->add_option("--format", report_opts.format, "plain|csv")->capture_default_str();
  report->add_option("--curve-dir", report_opts.curve_dir, "Directory for emitted curve files");
  report->add_flag("!--no-curves", report_opts.emit_curves, "Do not write curve files");

  ehrqa::SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Full threshold sweep as CSV");
  sweep->add_option("--store", sweep_opts.store, "Run-record store")->required();
  sweep->add_option("--tag", sweep_opts.tag, "Restrict to one tag");
  sweep->add_option("--out", sweep_opts.out, "Write CSV here instead of stdout");

  ehrqa::SimulateOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic record population");
  simulate->add_option("--spec", sim_opts.spec, "Population spec file")->required();
  simulate->add_option("--store", sim_opts.store, "Store to append to")->required();
  simulate->add_option("--seed", sim_opts.seed, "Generator seed")->capture_default_str();

  ehrqa::ReplayOptions replay_opts;
  auto* replay = app.add_subcommand("replay", "Replay a scripted case study");
  replay->add_option("--case", replay_opts.case_file, "Case script file")->required();
  replay->add_option("--config", replay_opts.config, "Run configuration file")->required();
  replay->add_option("--threshold", replay_opts.threshold, "Override the decision threshold");

  CLI11_PARSE(app, argc, argv);

  if (fixtures->parsed()) return ehrqa::cmd_fixtures(fixtures_opts, std::cout, std::cerr);
  if (run->parsed()) {
    if (!run_stepwise.empty()) {
      if (run_stepwise != "on" && run_stepwise != "off") {
        std::cerr << "run: --stepwise must be on or off\n";
        return 2;
      }
      run_opts.stepwise = run_stepwise == "on";
    }
    return ehrqa::cmd_run(run_opts, std::cout, std::cerr);
  }
  if (report->parsed()) return ehrqa::cmd_report(report_opts, std::cout, std::cerr);
  if (sweep->parsed()) return ehrqa::cmd_sweep(sweep_opts, std::cout, std::cerr);
  if (simulate->parsed()) return ehrqa::cmd_simulate(sim_opts, std::cout, std::cerr);
  if (replay->parsed()) return ehrqa::cmd_replay(replay_opts, std::cout, std::cerr);
  return 2;
}
