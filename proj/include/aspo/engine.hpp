#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspo/agents.hpp"
#include "aspo/catalog.hpp"
#include "aspo/context.hpp"
#include "aspo/gate.hpp"
#include "aspo/optimizer.hpp"
#include "aspo/random.hpp"

namespace aspo {

inline constexpr int kTraceSchemaVersion = 1;

struct PowerParams {
  double p0 = 2.0;      // idle power, W
  double gamma1 = 0.5;  // W per unit of load
  double gamma2 = 0.05; // W per degree above the threshold
  static constexpr double kThermalThreshold = 40.0;
};

// p0 + gamma1 * load + gamma2 * max(0, temp - 40)
double avg_power(double load, double temp, const PowerParams& params);
double energy(double power, double dt);

// Log-normal distribution pinned by its mean and 90th percentile.
struct LogNormal {
  double mu = 0.0;
  double sigma = 0.0;

  static LogNormal from_mean_p90(double mean, double p90);
  double mean() const;
  double quantile(double z) const;
  double sample(Rng& rng) const;
};

enum class LatencyMode { kSimulated, kWallClock };

struct LatencyTarget {
  double mean = 0.0;
  double p90 = 0.0;
};

struct LatencyModel {
  LatencyMode mode = LatencyMode::kSimulated;
  // Per agent, in pipeline order.
  std::array<LatencyTarget, 5> agents = {{{4.233, 5.754},
                                          {5.835, 7.615},
                                          {4.293, 5.607},
                                          {4.815, 6.303},
                                          {3.153, 4.224}}};
  LatencyTarget network = {0.12, 0.18};
  // Simulated deterministic-core time: base + per_subset * subsets evaluated.
  double det_base = 0.004;
  double det_per_subset = 0.0005;
};

// Bounded random walk applied to each node's thermal, load and memory state.
struct WalkParams {
  double temp_step = 0.4;
  double temp_min = 30.0;
  double temp_max = 75.0;
  double load_step = 0.05;
  double load_max = 2.0;
  double mem_step = 0.02;
  double mem_min = 0.5;
};

struct NodeConfig {
  std::string id;
  LabelSet capabilities;
};

struct EngineConfig {
  std::filesystem::path catalog_path = "catalog/default_catalog.json";
  ScoringWeights weights;
  EncoderConfig encoder;  // capabilities come from the node
  PowerParams power;
  LatencyModel latency;
  WalkParams walk;
  std::string backend = "mock";
  RemoteConfig remote;
  std::vector<NodeConfig> nodes;
  std::vector<Label> replay_classes = {"dos", "ddos", "botnet", "bruteforce", "portscan"};
  std::uint64_t seed = 1;
  unsigned threads = 1;

  const NodeConfig& node(std::string_view id) const;
};

EngineConfig default_engine_config();
// Missing sections keep their defaults; relative catalogue paths resolve
// against `base_dir`.
EngineConfig engine_config_from_json(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir = {});
EngineConfig load_engine_config(const std::filesystem::path& path);
nlohmann::json to_json(const EngineConfig& c);

struct StageFailure {
  std::string stage;  // encoder or an agent role
  std::string kind;
  std::string detail;
};

struct DecisionTrace {
  std::uint64_t epoch = 0;
  std::string node;
  std::string telemetry_digest;
  Label threat_label;
  double load = 0.0;
  double temp = 0.0;
  BudgetVector budgets;  // measured budgets used by the gate and the fail-safe

  std::optional<StructuredContext> context;     // encoder output
  std::optional<StructuredContext> normalized;  // after the context agent
  std::vector<AgentMessage> messages;
  std::vector<Candidate> candidates;
  std::vector<PatternId> feasible;
  std::optional<Portfolio> deterministic;
  std::vector<PatternId> deterministic_order;
  std::optional<MitigationPlan> plan;
  std::optional<GateVerdict> gate;
  std::optional<AuditVerdict> audit;
  std::optional<StageFailure> failure;

  bool approved = false;  // gate ok and auditor approved
  bool executed = false;  // the agent plan was activated
  bool failsafe = false;
  std::string failsafe_reason;
  std::optional<std::string> critical_event;
  std::vector<PatternId> executed_portfolio;
  std::vector<PatternId> executed_order;

  std::array<double, 5> agent_latency = {};  // seconds, pipeline order; 0 if not reached
  double t_net = 0.0;
  double t_det = 0.0;
  double dt = 0.0;
  double power = 0.0;
  double energy = 0.0;
};

// Δt in the fixed summation order used everywhere: agents in pipeline order,
// then network, then deterministic core.
double decision_latency(const std::array<double, 5>& agents, double t_net, double t_det);

nlohmann::ordered_json to_json(const DecisionTrace& t);

// One Monitor-Analyse-Plan-Execute cycle. Never throws for decision-level
// problems; they become fail-safe traces.
DecisionTrace run_epoch(const TelemetryVector& x, const NodeConfig& node, std::uint64_t epoch,
                        const Catalog& catalog, const EngineConfig& config,
                        AgentBackend& backend, std::uint64_t seed);

struct RunLog {
  std::vector<DecisionTrace> traces;  // node-major, epochs ascending
};

// Exactly n_per_class windows of each class, shuffled by seed.
std::vector<TelemetryVector> balanced_sample(const std::vector<TelemetryVector>& dataset,
                                             std::size_t n_per_class,
                                             const std::vector<Label>& classes,
                                             std::uint64_t seed);

// Draws a balanced sample of nodes * epochs_per_node windows, hands node i the
// i-th disjoint block and runs its epochs in order.
RunLog run_replay(const std::vector<TelemetryVector>& dataset, std::size_t nodes,
                  std::size_t epochs_per_node, const Catalog& catalog,
                  const EngineConfig& config, AgentBackend& backend, std::uint64_t seed);

void write_trace_lines(std::ostream& out, const RunLog& log);
void write_trace_file(const std::filesystem::path& path, const RunLog& log);
std::vector<nlohmann::json> read_trace_file(const std::filesystem::path& path);

// Flow-record CSV with the telemetry column names; resource columns are optional.
std::vector<TelemetryVector> load_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const std::vector<TelemetryVector>& rows);

// Labelled synthetic windows, `per_class` rows for each class, seeded.
std::vector<TelemetryVector> synthesize_dataset(const std::vector<Label>& classes,
                                                std::size_t per_class, std::uint64_t seed);

}  // namespace aspo
