#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/decision_log.hpp"
#include "aspo/engine.hpp"
#include "aspo/error.hpp"
#include "aspo/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOperatorError = 2;
constexpr int kCatalogViolation = 3;

struct CommonOptions {
  std::optional<std::string> catalog;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::string out = "out";
};

void add_engine_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--catalog", o.catalog, "Catalogue JSON (overrides the engine config)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--config", o.config, "Engine config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "64-bit replay seed (overrides the engine config)");
  cmd->add_option("--backend", o.backend,
                  "Agent backend: mock, remote or fault:<profile>[:<pattern>][@<rate>]. "
                  "The remote backend reads its bearer token from ASPO_BACKEND_TOKEN "
                  "(or the variable named in the config)");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

aspo::EngineConfig resolve_config(const CommonOptions& o) {
  aspo::EngineConfig config =
      o.config ? aspo::load_engine_config(*o.config) : aspo::default_engine_config();
  if (o.catalog) config.catalog_path = *o.catalog;
  if (o.seed) config.seed = *o.seed;
  if (o.backend) config.backend = *o.backend;
  config.weights.validate();
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw aspo::Error("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw aspo::DatasetError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw aspo::DatasetError(path.string() + ": " + e.what());
  }
}

int cmd_decide(const CommonOptions& o, const std::string& telemetry_path, const std::string& node_id,
               std::uint64_t epoch, bool quiet) {
  const auto config = resolve_config(o);
  const auto catalog = aspo::load_catalog_file(config.catalog_path);
  const auto x = aspo::telemetry_from_json(read_json_file(telemetry_path));
  const auto& node = config.node(node_id);
  auto backend = aspo::make_backend(config.backend, catalog, config.remote);

  const auto trace = aspo::run_epoch(x, node, epoch, catalog, config, *backend, config.seed);
  if (!quiet) std::cout << aspo::render_decision_log(trace, x, catalog, config.weights);

  aspo::RunLog log;
  log.traces.push_back(trace);
  const fs::path path = fs::path(o.out) / "decision.jsonl";
  aspo::write_trace_file(path, log);
  if (!quiet) std::cout << "trace written to " << path.string() << '\n';
  return 0;
}

int cmd_replay(const CommonOptions& o, const std::string& dataset_path, std::size_t workload,
               std::size_t nodes) {
  if (nodes == 0) throw aspo::ConfigError("--nodes must be positive");
  if (workload == 0 || workload % nodes != 0) {
    throw aspo::ConfigError("--workload must be a positive multiple of the node count (" +
                            std::to_string(nodes) + ")");
  }
  const auto config = resolve_config(o);
  const auto catalog = aspo::load_catalog_file(config.catalog_path);
  const auto dataset = aspo::load_dataset_csv(dataset_path);
  auto backend = aspo::make_backend(config.backend, catalog, config.remote);

  const auto log = aspo::run_replay(dataset, nodes, workload / nodes, catalog, config, *backend,
                                    config.seed);
  const fs::path out(o.out);
  const std::string stem = std::to_string(workload);
  aspo::write_trace_file(out / ("trace_" + stem + ".jsonl"), log);

  const auto records = aspo::read_trace_file(out / ("trace_" + stem + ".jsonl"));
  const auto summary = aspo::summarize_run(records, &catalog);
  const std::string text = aspo::render_text(summary, "workload " + stem);
  write_text(out / ("summary_" + stem + ".json"), aspo::to_json(summary).dump(2) + "\n");
  write_text(out / ("summary_" + stem + ".txt"), text);
  std::cout << text;
  std::cout << "traces: " << (out / ("trace_" + stem + ".jsonl")).string() << '\n';
  return 0;
}

int cmd_validate_catalog(const std::string& path) {
  try {
    const auto catalog = aspo::load_catalog_file(path);
    std::size_t conflicts = 0, synergies = 0;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      for (std::size_t j = i + 1; j < catalog.size(); ++j) {
        conflicts += catalog.conflicts(i, j);
        synergies += catalog.synergizes(i, j);
      }
    }
    std::cout << "OK " << path << ": " << catalog.size() << " patterns, "
              << catalog.threats().size() << " threats, " << catalog.capabilities().size()
              << " capabilities, " << conflicts << " conflict pairs, " << synergies
              << " synergy pairs, " << catalog.precedence().size() << " precedence edges\n";
    return 0;
  } catch (const aspo::CatalogError& e) {
    std::cout << "INVALID " << path << ": " << e.what() << '\n';
    return kCatalogViolation;
  }
}

int cmd_report(const CommonOptions& o, const std::vector<std::string>& files,
               const std::optional<std::string>& catalog_path) {
  std::optional<aspo::Catalog> catalog;
  if (catalog_path) catalog = aspo::load_catalog_file(*catalog_path);

  std::vector<aspo::RunSummary> summaries;
  json report = json::object();
  std::string text;
  for (const auto& file : files) {
    const auto records = aspo::read_trace_file(file);
    if (records.empty()) throw aspo::DatasetError(file + ": empty trace log");
    summaries.push_back(aspo::summarize_run(records, catalog ? &*catalog : nullptr));
    const std::string label = fs::path(file).filename().string();
    report["runs"][label] = aspo::to_json(summaries.back());
    text += aspo::render_text(summaries.back(), label);
    text += '\n';
  }
  if (summaries.size() == 2) {
    const auto cmp = aspo::compare_runs(summaries[0], summaries[1]);
    report["comparison"] = aspo::to_json(cmp);
    text += aspo::render_text(cmp, fs::path(files[0]).filename().string(),
                              fs::path(files[1]).filename().string());
  }
  write_text(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  write_text(fs::path(o.out) / "report.txt", text);
  std::cout << text;
  return 0;
}

int cmd_synth(const std::string& out_path, std::size_t per_class, std::uint64_t seed,
              const std::vector<std::string>& classes) {
  if (per_class == 0) throw aspo::ConfigError("--per-class must be positive");
  const auto rows = aspo::synthesize_dataset(classes, per_class, seed);
  aspo::write_dataset_csv(out_path, rows);
  std::cout << "wrote " << rows.size() << " windows to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic security pattern orchestration: decisions, replays and reports"};
  app.require_subcommand(1);

  CommonOptions decide_opts;
  std::string telemetry_path;
  std::string node_id = "node-02";
  std::uint64_t epoch = 0;
  bool quiet = false;
  auto* decide = app.add_subcommand("decide", "Run one decision epoch on a telemetry window");
  decide->add_option("telemetry", telemetry_path, "Telemetry window JSON")
      ->required()
      ->check(CLI::ExistingFile);
  decide->add_option("--node", node_id, "Gateway node id from the engine config")->capture_default_str();
  decide->add_option("--epoch", epoch, "Epoch index")->capture_default_str();
  decide->add_flag("--quiet", quiet, "Only write the trace file");
  add_engine_options(decide, decide_opts);

  CommonOptions replay_opts;
  std::string dataset_path = "data/flows.csv";
  std::size_t workload = 500;
  std::size_t nodes = 10;
  auto* replay = app.add_subcommand("replay", "Replay a labelled flow dataset across gateway nodes");
  replay->add_option("--dataset", dataset_path, "Flow-record CSV")->capture_default_str()->check(CLI::ExistingFile);
  replay->add_option("--workload", workload, "Total decisions (500 and 1000 are the reference runs)")->capture_default_str();
  replay->add_option("--nodes", nodes, "Gateway nodes; each runs workload/nodes epochs")->capture_default_str();
  add_engine_options(replay, replay_opts);

  std::string catalog_to_check;
  auto* validate = app.add_subcommand("validate-catalog", "Check a catalogue against its invariants");
  validate->add_option("catalog", catalog_to_check, "Catalogue JSON")
      ->required()
      ->check(CLI::ExistingFile);

  CommonOptions report_opts;
  std::vector<std::string> trace_files;
  std::optional<std::string> report_catalog;
  auto* report = app.add_subcommand(
      "report", "Summarise trace logs; two logs add the cross-workload comparison");
  report->add_option("traces", trace_files, "Trace JSON-lines files (reference run first)")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--catalog", report_catalog,
                     "Catalogue used to re-check executed portfolios")
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_opts.out, "Output directory")->capture_default_str();

  std::string synth_out = "data/flows.csv";
  std::size_t per_class = 300;
  std::uint64_t synth_seed = 7;
  std::vector<std::string> classes = {"benign", "dos", "ddos", "botnet", "bruteforce", "portscan"};
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic labelled flow dataset");
  synth->add_option("--out", synth_out, "CSV path")->capture_default_str();
  synth->add_option("--per-class", per_class, "Windows per class")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--classes", classes, "Class labels")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*decide) return cmd_decide(decide_opts, telemetry_path, node_id, epoch, quiet);
    if (*replay) return cmd_replay(replay_opts, dataset_path, workload, nodes);
    if (*validate) return cmd_validate_catalog(catalog_to_check);
    if (*report) return cmd_report(report_opts, trace_files, report_catalog);
    if (*synth) return cmd_synth(synth_out, per_class, synth_seed, classes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOperatorError;
  }
  return kOperatorError;
}
