#include "ehrqa/cli.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "ehrqa/backend.hpp"
#include "ehrqa/fixtures.hpp"
#include "ehrqa/metrics.hpp"
#include "ehrqa/simulate.hpp"
#include "ehrqa/util.hpp"

namespace ehrqa {

namespace {

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

HarnessConfig load_harness_config(const std::filesystem::path& path) {
  nlohmann::json j = load_json_file(path);
  HarnessConfig cfg;
  if (j.contains("agent")) {
    const auto& a = j.at("agent");
    cfg.agent.preset = a.value("preset", cfg.agent.preset);
    cfg.agent.max_steps = a.value("max_steps", cfg.agent.max_steps);
    cfg.agent.few_shot_count = a.value("few_shot_count", cfg.agent.few_shot_count);
    cfg.agent.temperature = a.value("temperature", cfg.agent.temperature);
    if (a.contains("estimator_method")) {
      cfg.agent.estimator_method =
          estimator_method_from_name(a.at("estimator_method").get<std::string>());
    }
    cfg.agent.stepwise_enabled = a.value("stepwise_enabled", cfg.agent.stepwise_enabled);
    cfg.agent.threshold = a.value("threshold", cfg.agent.threshold);
    cfg.agent.model = a.value("model", cfg.agent.model);
    cfg.agent.tag = a.value("tag", cfg.agent.tag);
  }
  if (j.contains("backend")) {
    cfg.backend_type = j.at("backend").value("type", cfg.backend_type);
    cfg.endpoint = j.at("backend").value("endpoint", cfg.endpoint);
  }
  if (j.contains("databases")) {
    for (const auto& [id, p] : j.at("databases").items()) {
      std::filesystem::path db_path = p.get<std::string>();
      if (db_path.is_relative()) db_path = path.parent_path() / db_path;
      cfg.databases[id] = db_path;
    }
  }
  cfg.agent.validate();
  return cfg;
}

int cmd_fixtures(const FixturesOptions& options, std::ostream& out, std::ostream& err) {
  try {
    FixturePaths paths = build_fixtures({options.out_dir, options.seed});
    out << "fixtures written to " << options.out_dir.string() << " (seed " << options.seed
        << "):\n";
    for (const auto& p : {paths.mimic_db, paths.eicu_db, paths.dataset, paths.mock_trust,
                          paths.mock_baseline, paths.config_trust, paths.config_baseline}) {
      out << "  " << p.filename().string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "fixtures: " << e.what() << "\n";
    return 1;
  }
}

namespace {

struct OpenDatabases {
  std::map<std::string, EhrDatabase> owned;
  DatabaseMap map;
};

OpenDatabases open_databases(const HarnessConfig& cfg) {
  OpenDatabases dbs;
  for (const auto& [id, path] : cfg.databases) {
    dbs.owned.emplace(id, EhrDatabase::open_readonly(path));
  }
  for (const auto& [id, db] : dbs.owned) dbs.map[id] = &db;
  return dbs;
}

RunRecord grade_run(AgentRun run, const QaItem& item) {
  RunRecord rec;
  rec.gold_answer = item.gold_answer;
  rec.is_correct = !run.error && grade_exact_match(run.final_answer, item.gold_answer);
  rec.run = std::move(run);
  return rec;
}

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  HarnessConfig cfg;
  std::map<std::string, std::vector<ScriptEntry>> script;
  bool mock = false;
  bool shared_script = false;
  try {
    cfg = load_harness_config(options.config);
    if (options.tag) cfg.agent.tag = *options.tag;
    if (options.threshold) cfg.agent.threshold = *options.threshold;
    if (options.stepwise) cfg.agent.stepwise_enabled = *options.stepwise;
    cfg.agent.validate();

    mock = options.mock_script.has_value() || cfg.backend_type == "mock";
    if (mock) {
      if (!options.mock_script) {
        throw std::invalid_argument("mock backend selected but no --mock-script given");
      }
      script = load_mock_script_by_question(*options.mock_script);
      shared_script = script.size() == 1 && script.begin()->first.empty();
    } else if (cfg.backend_type == "http") {
      // Fail fast on missing endpoint/credential before any run starts.
      HttpBackendOptions probe;
      probe.endpoint = cfg.endpoint;
      probe.model = cfg.agent.model;
      HttpBackend check(probe);
    } else {
      throw std::invalid_argument("unknown backend type: " + cfg.backend_type);
    }
  } catch (const std::exception& e) {
    err << "run: configuration error: " << e.what() << "\n";
    return 2;
  }

  try {
    OpenDatabases dbs = open_databases(cfg);
    DatasetLoadResult dataset = load_dataset(options.dataset, dbs.map);
    for (const auto& d : dataset.diagnostics) err << "run: dataset: " << d << "\n";

    std::vector<QaItem> items = std::move(dataset.items);
    if (options.limit && *options.limit < items.size()) items.resize(*options.limit);

    int parallel = std::max(1, options.parallel);
    if (shared_script && parallel > 1) {
      err << "run: shared (un-keyed) mock script forces --parallel 1\n";
      parallel = 1;
    }
    parallel = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(parallel), items.size()));

    auto shared_backend = shared_script
                              ? std::make_unique<MockBackend>(script.begin()->second)
                              : nullptr;

    std::vector<std::optional<RunRecord>> results(items.size());
    std::vector<std::vector<std::string>> warnings(items.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::condition_variable cv;

    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= items.size()) return;
        const QaItem& item = items[i];
        const EhrDatabase& db = *dbs.map.at(item.database_id);
        RunRecord rec;
        try {
          std::unique_ptr<Backend> local;
          Backend* backend = nullptr;
          if (shared_backend) {
            backend = shared_backend.get();
          } else if (mock) {
            auto it = script.find(item.question_id);
            local = std::make_unique<MockBackend>(
                it != script.end() ? it->second : std::vector<ScriptEntry>{});
            backend = local.get();
          } else {
            HttpBackendOptions hb;
            hb.endpoint = cfg.endpoint;
            hb.model = cfg.agent.model;
            local = std::make_unique<HttpBackend>(hb);
            backend = local.get();
          }
          AgentRun run = run_question({item.question_id, item.question}, db, cfg.agent, *backend,
                                      &warnings[i]);
          rec = grade_run(std::move(run), item);
        } catch (const std::exception& e) {
          rec.run.question_id = item.question_id;
          rec.run.question_text = item.question;
          rec.run.tag = cfg.agent.effective_tag();
          rec.run.config_fingerprint = cfg.agent.fingerprint();
          rec.run.max_steps = cfg.agent.max_steps;
          rec.run.decision = {DecisionKind::kReject, cfg.agent.threshold};
          rec.run.error = e.what();
        }
        {
          std::lock_guard<std::mutex> lock(mu);
          results[i] = std::move(rec);
        }
        cv.notify_all();
      }
    };

    std::vector<std::thread> pool;
    for (int w = 0; w < parallel; ++w) pool.emplace_back(worker);

    // Append in dataset order as soon as each next record is ready, so
    // stores are reproducible regardless of worker interleaving.
    RunStore store(options.store);
    std::size_t provided = 0, rejected = 0, correct = 0, errored = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return results[i].has_value(); });
      RunRecord rec = std::move(*results[i]);
      lock.unlock();
      for (const auto& w : warnings[i]) err << "run: " << w << "\n";
      store.append(rec);
      if (rec.run.error) {
        ++errored;
      } else if (rec.run.decision.variant == DecisionKind::kProvide) {
        ++provided;
        if (rec.is_correct) ++correct;
      } else {
        ++rejected;
      }
    }
    for (auto& t : pool) t.join();

    out << "ran " << items.size() << " questions (tag " << cfg.agent.effective_tag()
        << "): provided " << provided << ", rejected " << rejected << ", correct " << correct
        << ", errored " << errored << "\n";
    return errored == items.size() && !items.empty() ? 1 : 0;
  } catch (const std::exception& e) {
    err << "run: " << e.what() << "\n";
    return 1;
  }
}

namespace {

std::map<std::string, std::vector<EvalRecord>> group_by_tag(const std::vector<EvalRecord>& records,
                                                            const std::vector<std::string>& tags) {
  std::map<std::string, std::vector<EvalRecord>> by_tag;
  for (const auto& r : records) by_tag[r.tag].push_back(r);
  if (tags.empty()) return by_tag;
  std::map<std::string, std::vector<EvalRecord>> selected;
  for (const auto& tag : tags) {
    auto it = by_tag.find(tag);
    if (it == by_tag.end()) throw std::invalid_argument("unknown tag: " + tag);
    selected[tag] = std::move(it->second);
  }
  return selected;
}

}  // namespace

int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RunStore store(options.store);
    std::vector<std::string> warnings;
    std::vector<EvalRecord> records = store.load_records(std::nullopt, &warnings);
    for (const auto& w : warnings) err << "report: " << w << "\n";
    if (records.empty()) throw std::runtime_error("store has no usable records");

    auto by_tag = group_by_tag(records, options.tags);

    ReportSpec spec;
    if (!options.k_list.empty()) spec.k_list = options.k_list;
    spec.format = report_format_from_name(options.format);
    std::string rendered = render_report(by_tag, spec);
    out << rendered;

    std::filesystem::path dir =
        options.curve_dir.value_or(options.store.parent_path());
    if (dir.empty()) dir = ".";
    std::string stem = options.store.stem().string();
    std::filesystem::path report_path = dir / (stem + ".report.txt");
    std::ofstream report_file(report_path, std::ios::binary);
    report_file << rendered;
    out << "report: " << report_path.filename().string() << "\n";

    if (options.emit_curves) {
      for (const auto& [tag, tag_records] : by_tag) {
        MetricCurve curve = metric_curve(tag_records);
        std::filesystem::path curve_path = dir / (stem + ".curve." + tag + ".csv");
        std::ofstream curve_file(curve_path, std::ios::binary);
        curve_file << render_curve_csv(curve);
        out << "curve: " << curve_path.filename().string() << "\n";
      }
    }
    return 0;
  } catch (const std::exception& e) {
    err << "report: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RunStore store(options.store);
    std::vector<EvalRecord> records = store.load_records(options.tag);
    if (records.empty()) {
      throw std::runtime_error(options.tag ? "no records with tag: " + *options.tag
                                           : "store has no usable records");
    }
    std::string csv = render_curve_csv(metric_curve(records));
    if (options.out) {
      std::ofstream f(*options.out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + options.out->string());
      f << csv;
      out << "curve: " << options.out->filename().string() << "\n";
    } else {
      out << csv;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << "\n";
    return 1;
  }
}

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    PopulationSpec spec = population_spec_from_json(load_json_file(options.spec));
    std::vector<RunRecord> records = simulate_run_records(spec, options.seed);
    RunStore store(options.store);
    for (const auto& rec : records) store.append(rec);
    out << "simulated " << records.size() << " records (tag " << spec.tag << ", model "
        << spec.model << ", method " << estimator_method_name(spec.method) << ") into "
        << options.store.filename().string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << "\n";
    return 1;
  }
}

int cmd_replay(const ReplayOptions& options, std::ostream& out, std::ostream& err) {
  try {
    nlohmann::json case_json = load_json_file(options.case_file);
    HarnessConfig cfg = load_harness_config(options.config);

    AgentConfig agent = cfg.agent;
    agent.preset = case_json.value("preset", agent.preset);
    if (case_json.contains("estimator_method")) {
      agent.estimator_method =
          estimator_method_from_name(case_json.at("estimator_method").get<std::string>());
    }
    agent.stepwise_enabled = case_json.value("stepwise_enabled", agent.stepwise_enabled);
    agent.threshold = case_json.value("threshold", agent.threshold);
    if (options.threshold) agent.threshold = *options.threshold;
    agent.validate();

    std::string database_id = case_json.at("database_id").get<std::string>();
    auto db_path = cfg.databases.find(database_id);
    if (db_path == cfg.databases.end()) {
      throw std::invalid_argument("config has no database path for: " + database_id);
    }
    EhrDatabase db = EhrDatabase::open_readonly(db_path->second);

    std::vector<ScriptEntry> script;
    for (const auto& ej : case_json.at("script")) {
      script.push_back(script_entry_from_json(ej));
    }
    MockBackend backend(std::move(script));

    Question question{case_json.value("question_id", std::string("case")),
                      case_json.at("question").get<std::string>()};
    AgentRun run = run_question(question, db, agent, backend);
    if (run.error) throw std::runtime_error("replay errored: " + *run.error);
    out << render_case_study(run);
    return 0;
  } catch (const std::exception& e) {
    err << "replay: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ehrqa
