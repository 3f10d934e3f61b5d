#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ehrqa/agent.hpp"
#include "ehrqa/report.hpp"

namespace ehrqa {

// Run configuration file: agent settings, backend selection, database
// locations (resolved relative to the config file).
struct HarnessConfig {
  AgentConfig agent;
  std::string backend_type = "mock";  // "mock" | "http"
  std::string endpoint;               // http backend; falls back to $EHRQA_ENDPOINT
  std::map<std::string, std::filesystem::path> databases;
};

HarnessConfig load_harness_config(const std::filesystem::path& path);

struct FixturesOptions {
  std::filesystem::path out_dir = "fixtures";
  std::uint64_t seed = 7;
};

struct RunOptions {
  std::filesystem::path dataset;
  std::filesystem::path config;
  std::filesystem::path store;
  std::optional<std::filesystem::path> mock_script;
  std::optional<std::string> tag;
  std::optional<double> threshold;
  std::optional<bool> stepwise;
  std::optional<std::size_t> limit;
  int parallel = 1;
};

struct ReportOptions {
  std::filesystem::path store;
  std::vector<std::string> tags;  // empty: every tag in the store
  std::vector<double> k_list;     // empty: default 0/50/70/90
  std::string format = "plain";
  bool emit_curves = true;
  std::optional<std::filesystem::path> curve_dir;
};

struct SweepOptions {
  std::filesystem::path store;
  std::optional<std::string> tag;
  std::optional<std::filesystem::path> out;
};

struct SimulateOptions {
  std::filesystem::path spec;
  std::filesystem::path store;
  std::uint64_t seed = 7;
};

struct ReplayOptions {
  std::filesystem::path case_file;
  std::filesystem::path config;
  std::optional<double> threshold;
};

int cmd_fixtures(const FixturesOptions& options, std::ostream& out, std::ostream& err);
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);
int cmd_replay(const ReplayOptions& options, std::ostream& out, std::ostream& err);

}  // namespace ehrqa
