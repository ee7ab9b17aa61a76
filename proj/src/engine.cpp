#include "aspo/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "aspo/error.hpp"
#include "json_util.hpp"

namespace aspo {

using nlohmann::json;
using nlohmann::ordered_json;

double avg_power(double load, double temp, const PowerParams& params) {
  return params.p0 + params.gamma1 * load +
         params.gamma2 * std::max(0.0, temp - PowerParams::kThermalThreshold);
}

double energy(double power, double dt) { return power * dt; }

namespace {
constexpr double kZ90 = 1.2815515655446004;  // standard normal 0.9 quantile
}

LogNormal LogNormal::from_mean_p90(double mean, double p90) {
  if (!(mean > 0.0) || !(p90 > 0.0)) throw ConfigError("latency targets must be positive");
  // ln(p90/mean) = z*sigma - sigma^2/2; take the smaller root.
  const double gap = std::log(p90 / mean);
  const double disc = kZ90 * kZ90 - 2.0 * gap;
  if (disc < 0.0) throw ConfigError("latency p90 is too far above the mean for a log-normal fit");
  LogNormal out;
  out.sigma = kZ90 - std::sqrt(disc);
  if (out.sigma < 0.0) throw ConfigError("latency p90 must not be below the mean");
  out.mu = std::log(mean) - 0.5 * out.sigma * out.sigma;
  return out;
}

double LogNormal::mean() const { return std::exp(mu + 0.5 * sigma * sigma); }
double LogNormal::quantile(double z) const { return std::exp(mu + sigma * z); }
double LogNormal::sample(Rng& rng) const { return std::exp(mu + sigma * rng.normal()); }

// ---------------------------------------------------------------------------
// configuration

const NodeConfig& EngineConfig::node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw ConfigError("unknown node: " + std::string(id));
}

EngineConfig default_engine_config() {
  EngineConfig c;
  c.nodes = {
      {"node-01", {"packet_filter", "vlan_control", "egress_control", "identity_store"}},
      {"node-02", {"packet_filter", "vlan_control"}},
      {"node-03", {"packet_filter", "fog_offload", "broker_acl", "pki"}},
      {"node-04", {"vlan_control", "identity_store", "pan_hub"}},
      {"node-05", {"packet_filter", "device_inventory", "egress_control", "broker_acl"}},
      {"node-06", {"packet_filter", "vlan_control", "device_inventory", "identity_store"}},
      {"node-07", {"fog_offload", "egress_control", "pki", "broker_acl"}},
      {"node-08", {"packet_filter", "vlan_control", "pan_hub", "pki"}},
      {"node-09", {"vlan_control", "egress_control", "identity_store", "device_inventory"}},
      {"node-10", {"packet_filter", "vlan_control", "fog_offload", "broker_acl", "identity_store",
                   "device_inventory", "egress_control", "pan_hub", "pki"}},
  };
  return c;
}

namespace {

LatencyTarget target_from_json(const json& j, const std::string& where) {
  detail::reject_unknown_keys<ConfigError>(j, {"mean", "p90"}, where);
  LatencyTarget t;
  t.mean = detail::as_number<ConfigError>(detail::require<ConfigError>(j, "mean", where), where + ".mean");
  t.p90 = detail::as_number<ConfigError>(detail::require<ConfigError>(j, "p90", where), where + ".p90");
  (void)LogNormal::from_mean_p90(t.mean, t.p90);
  return t;
}

void number_field(const json& j, const char* key, double& out, const std::string& where) {
  if (auto it = j.find(key); it != j.end()) {
    out = detail::as_number<ConfigError>(*it, where + "." + key);
    if (!std::isfinite(out)) throw ConfigError(where + "." + key + " must be finite");
  }
}

}  // namespace

EngineConfig engine_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  detail::reject_unknown_keys<ConfigError>(
      j,
      {"description", "catalog", "seed", "threads", "weights", "encoder", "power", "latency",
       "walk", "backend", "nodes", "replay"},
      "engine config");
  EngineConfig c = default_engine_config();
  if (auto it = j.find("catalog"); it != j.end()) {
    std::filesystem::path p = detail::as_string<ConfigError>(*it, "catalog");
    c.catalog_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("seed: expected an unsigned integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (auto it = j.find("threads"); it != j.end()) {
    if (!it->is_number_unsigned() || it->get<unsigned>() == 0) {
      throw ConfigError("threads: expected a positive integer");
    }
    c.threads = it->get<unsigned>();
  }
  if (auto it = j.find("weights"); it != j.end()) c.weights = weights_from_json(*it);
  if (auto it = j.find("encoder"); it != j.end()) c.encoder = encoder_config_from_json(*it);
  if (auto it = j.find("power"); it != j.end()) {
    detail::reject_unknown_keys<ConfigError>(*it, {"p0", "gamma1", "gamma2"}, "power");
    number_field(*it, "p0", c.power.p0, "power");
    number_field(*it, "gamma1", c.power.gamma1, "power");
    number_field(*it, "gamma2", c.power.gamma2, "power");
    if (!(c.power.p0 > 0.0)) throw ConfigError("power.p0 must be > 0");
  }
  if (auto it = j.find("latency"); it != j.end()) {
    detail::reject_unknown_keys<ConfigError>(
        *it, {"mode", "agents", "network", "det_base", "det_per_subset"}, "latency");
    if (auto m = it->find("mode"); m != it->end()) {
      const auto mode = detail::as_string<ConfigError>(*m, "latency.mode");
      if (mode == "simulated") c.latency.mode = LatencyMode::kSimulated;
      else if (mode == "wall_clock") c.latency.mode = LatencyMode::kWallClock;
      else throw ConfigError("latency.mode must be simulated or wall_clock");
    }
    if (auto a = it->find("agents"); a != it->end()) {
      detail::reject_unknown_keys<ConfigError>(
          *a, {"context", "reasoner", "constraint", "planner", "auditor"}, "latency.agents");
      for (std::size_t i = 0; i < 5; ++i) {
        const std::string role(to_string(kAgentRoles[i]));
        if (auto t = a->find(role); t != a->end()) {
          c.latency.agents[i] = target_from_json(*t, "latency.agents." + role);
        }
      }
    }
    if (auto n = it->find("network"); n != it->end()) {
      c.latency.network = target_from_json(*n, "latency.network");
    }
    number_field(*it, "det_base", c.latency.det_base, "latency");
    number_field(*it, "det_per_subset", c.latency.det_per_subset, "latency");
  }
  if (auto it = j.find("walk"); it != j.end()) {
    detail::reject_unknown_keys<ConfigError>(
        *it, {"temp_step", "temp_min", "temp_max", "load_step", "load_max", "mem_step", "mem_min"},
        "walk");
    number_field(*it, "temp_step", c.walk.temp_step, "walk");
    number_field(*it, "temp_min", c.walk.temp_min, "walk");
    number_field(*it, "temp_max", c.walk.temp_max, "walk");
    number_field(*it, "load_step", c.walk.load_step, "walk");
    number_field(*it, "load_max", c.walk.load_max, "walk");
    number_field(*it, "mem_step", c.walk.mem_step, "walk");
    number_field(*it, "mem_min", c.walk.mem_min, "walk");
    if (c.walk.temp_min > c.walk.temp_max) throw ConfigError("walk: temp_min exceeds temp_max");
  }
  if (auto it = j.find("backend"); it != j.end()) {
    detail::reject_unknown_keys<ConfigError>(*it, {"selector", "remote"}, "backend");
    if (auto s = it->find("selector"); s != it->end()) {
      c.backend = detail::as_string<ConfigError>(*s, "backend.selector");
    }
    if (auto r = it->find("remote"); r != it->end()) c.remote = remote_config_from_json(*r);
  }
  if (auto it = j.find("nodes"); it != j.end()) {
    if (!it->is_array() || it->empty()) throw ConfigError("nodes: expected a non-empty array");
    c.nodes.clear();
    std::set<std::string> ids;
    for (const auto& n : *it) {
      detail::reject_unknown_keys<ConfigError>(n, {"id", "capabilities"}, "nodes[]");
      NodeConfig node;
      node.id = detail::as_string<ConfigError>(detail::require<ConfigError>(n, "id", "node"), "node.id");
      node.capabilities = detail::as_string_set<ConfigError>(
          detail::require<ConfigError>(n, "capabilities", "node"), "node.capabilities");
      if (!ids.insert(node.id).second) throw ConfigError("duplicate node id " + node.id);
      c.nodes.push_back(std::move(node));
    }
  }
  if (auto it = j.find("replay"); it != j.end()) {
    detail::reject_unknown_keys<ConfigError>(*it, {"classes"}, "replay");
    if (auto cl = it->find("classes"); cl != it->end()) {
      c.replay_classes = detail::as_string_list<ConfigError>(*cl, "replay.classes");
      if (c.replay_classes.empty()) throw ConfigError("replay.classes must not be empty");
    }
  }
  return c;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open engine config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("engine config " + path.string() + ": " + e.what());
  }
  return engine_config_from_json(j, path.parent_path());
}

json to_json(const EngineConfig& c) {
  json agents = json::object();
  for (std::size_t i = 0; i < 5; ++i) {
    agents[std::string(to_string(kAgentRoles[i]))] = {{"mean", c.latency.agents[i].mean},
                                                      {"p90", c.latency.agents[i].p90}};
  }
  json nodes = json::array();
  for (const auto& n : c.nodes) nodes.push_back({{"id", n.id}, {"capabilities", n.capabilities}});
  json encoder = to_json(c.encoder);
  encoder.erase("capabilities");
  return json{
      {"catalog", c.catalog_path.string()},
      {"seed", c.seed},
      {"threads", c.threads},
      {"weights", to_json(c.weights)},
      {"encoder", encoder},
      {"power", {{"p0", c.power.p0}, {"gamma1", c.power.gamma1}, {"gamma2", c.power.gamma2}}},
      {"latency",
       {{"mode", c.latency.mode == LatencyMode::kSimulated ? "simulated" : "wall_clock"},
        {"agents", agents},
        {"network", {{"mean", c.latency.network.mean}, {"p90", c.latency.network.p90}}},
        {"det_base", c.latency.det_base},
        {"det_per_subset", c.latency.det_per_subset}}},
      {"walk",
       {{"temp_step", c.walk.temp_step}, {"temp_min", c.walk.temp_min},
        {"temp_max", c.walk.temp_max}, {"load_step", c.walk.load_step},
        {"load_max", c.walk.load_max}, {"mem_step", c.walk.mem_step},
        {"mem_min", c.walk.mem_min}}},
      {"backend", {{"selector", c.backend}, {"remote", to_json(c.remote)}}},
      {"nodes", nodes},
      {"replay", {{"classes", c.replay_classes}}}};
}

// ---------------------------------------------------------------------------
// one epoch

double decision_latency(const std::array<double, 5>& agents, double t_net, double t_det) {
  double sum = 0.0;
  for (double t : agents) sum += t;
  return sum + t_net + t_det;
}

namespace {

using Clock = std::chrono::steady_clock;

std::size_t role_index(AgentRole r) { return static_cast<std::size_t>(r); }

std::uint64_t epoch_seed_for(std::uint64_t seed, const std::string& node, std::uint64_t epoch) {
  return mix_seed(mix_seed(seed, hash_label(node)), epoch);
}

}  // namespace

DecisionTrace run_epoch(const TelemetryVector& x, const NodeConfig& node, std::uint64_t epoch,
                        const Catalog& catalog, const EngineConfig& config,
                        AgentBackend& backend, std::uint64_t seed) {
  DecisionTrace t;
  t.epoch = epoch;
  t.node = node.id;
  t.telemetry_digest = telemetry_digest(x);
  t.threat_label = x.threat_label;
  t.load = std::isfinite(x.load_proxy) ? std::max(0.0, x.load_proxy) : 0.0;
  t.temp = std::isfinite(x.device_temp) ? x.device_temp : PowerParams::kThermalThreshold;

  const std::uint64_t epoch_seed = epoch_seed_for(seed, node.id, epoch);
  std::array<int, 5> attempts = {};
  std::array<double, 5> measured = {};
  double det_wall = 0.0;
  std::size_t subsets = 0;
  BudgetVector budgets = budgets_from_telemetry(x);

  auto timed = [&](auto&& fn) {
    const auto start = Clock::now();
    auto result = fn();
    det_wall += std::chrono::duration<double>(Clock::now() - start).count();
    return result;
  };
  auto call_for = [&](AgentRole r) {
    CallInfo c;
    c.seed = mix_seed(epoch_seed, role_index(r) + 1);
    c.epoch_seed = epoch_seed;
    c.epoch = epoch;
    c.node = node.id;
    return c;
  };
  auto record = [&](AgentMessage m) {
    attempts[role_index(m.agent)] = m.attempts;
    measured[role_index(m.agent)] = m.latency;
    t.messages.push_back(std::move(m));
  };
  auto engage_failsafe = [&](std::string reason) {
    const auto fs = timed([&] { return failsafe_portfolio(catalog, budgets); });
    t.failsafe = true;
    t.failsafe_reason = std::move(reason);
    t.executed_portfolio = fs.portfolio.members;
    t.executed_order = fs.order;
    t.critical_event = fs.critical_event;
  };

  std::string stage = "encoder";
  try {
    EncoderConfig encoder = config.encoder;
    encoder.capabilities = node.capabilities;
    const StructuredContext s = timed([&] { return encode_context(x, catalog, encoder); });
    t.context = s;
    budgets = s.budgets;

    stage = "agents";
    auto ctx = run_context_agent(s, catalog, backend, call_for(AgentRole::kContext));
    record(std::move(ctx.message));
    // Budgets and capabilities are measured facts; no agent may restate them.
    StructuredContext s_star = ctx.value;
    s_star.budgets = s.budgets;
    s_star.capabilities = s.capabilities;
    t.normalized = s_star;

    auto cand = run_reasoner(s_star, catalog, config.weights, backend, call_for(AgentRole::kReasoner));
    record(std::move(cand.message));
    t.candidates = cand.value.candidates;

    auto feas = filter_feasible(cand.value, s_star, catalog, backend, call_for(AgentRole::kConstraint));
    record(std::move(feas.message));
    t.feasible = feas.value;

    stage = "core";
    const Portfolio y_det = timed(
        [&] { return select_portfolio(t.feasible, s_star, s_star.budgets, catalog, config.weights); });
    subsets = y_det.subsets_evaluated;
    t.deterministic = y_det;
    t.deterministic_order = timed([&] { return activation_order(y_det.members, catalog); });

    stage = "agents";
    auto plan = run_planner(s_star, y_det, t.deterministic_order, catalog, backend,
                            call_for(AgentRole::kPlanner));
    record(std::move(plan.message));
    t.plan = plan.value;

    stage = "core";
    const GateVerdict gate = timed([&] {
      return validate_plan(plan.value, y_det, t.deterministic_order, s_star.budgets, catalog);
    });
    t.gate = gate;

    stage = "agents";
    auto audit = run_auditor(s_star, plan.value, gate.issue_strings(), backend,
                             call_for(AgentRole::kAuditor));
    record(std::move(audit.message));
    t.audit = audit.value;

    t.approved = gate.ok && audit.value.approved;
    if (!gate.ok) {
      engage_failsafe("gate_rejected");
    } else if (!audit.value.approved) {
      engage_failsafe("audit_rejected");
    } else if (plan.value.selected_patterns.empty()) {
      engage_failsafe("empty_portfolio");
    } else {
      t.executed = true;
      t.executed_portfolio = y_det.members;
      t.executed_order = plan.value.activation_order;
    }
  } catch (const AgentStageFailure& e) {
    attempts[role_index(e.role())] = e.attempts();
    measured[role_index(e.role())] = e.latency();
    t.failure = StageFailure{std::string(to_string(e.role())), e.kind(), e.what()};
    engage_failsafe("agent_failure");
  } catch (const Error& e) {
    t.failure = StageFailure{stage, "error", e.what()};
    engage_failsafe(stage + "_failure");
  }

  t.budgets = budgets;

  if (config.latency.mode == LatencyMode::kSimulated) {
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& target = config.latency.agents[i];
      const auto dist = LogNormal::from_mean_p90(target.mean, target.p90);
      Rng rng(mix_seed(epoch_seed, hash_label("latency") + i));
      double total = 0.0;
      for (int a = 0; a < attempts[i]; ++a) total += dist.sample(rng);
      t.agent_latency[i] = total;
    }
    Rng net_rng(mix_seed(epoch_seed, hash_label("network")));
    t.t_net = LogNormal::from_mean_p90(config.latency.network.mean, config.latency.network.p90)
                  .sample(net_rng);
    t.t_det = config.latency.det_base + config.latency.det_per_subset * static_cast<double>(subsets);
  } else {
    t.agent_latency = measured;
    t.t_net = 0.0;  // already inside the measured agent round trips
    t.t_det = det_wall;
  }
  for (auto& m : t.messages) m.latency = t.agent_latency[role_index(m.agent)];

  t.dt = decision_latency(t.agent_latency, t.t_net, t.t_det);
  t.power = avg_power(t.load, t.temp, config.power);
  t.energy = energy(t.power, t.dt);
  return t;
}

ordered_json to_json(const DecisionTrace& t) {
  ordered_json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["epoch"] = t.epoch;
  j["node"] = t.node;
  j["telemetry_digest"] = t.telemetry_digest;
  j["threat_label"] = t.threat_label;
  j["load"] = t.load;
  j["temp"] = t.temp;
  j["budgets"] = {{"cpu", t.budgets.cpu}, {"mem", t.budgets.mem}, {"lat", t.budgets.lat},
                  {"ene", t.budgets.ene}};
  j["context"] = t.context ? ordered_json(to_json(*t.context)) : ordered_json();
  j["normalized_context"] = t.normalized ? ordered_json(to_json(*t.normalized)) : ordered_json();
  ordered_json messages = ordered_json::array();
  for (const auto& m : t.messages) messages.push_back(ordered_json(to_json(m)));
  j["messages"] = messages;
  ordered_json candidates = ordered_json::array();
  for (const auto& c : t.candidates) {
    candidates.push_back({{"pattern_id", c.id}, {"rationale", c.rationale}});
  }
  j["candidates"] = candidates;
  j["feasible"] = t.feasible;
  j["deterministic"] = t.deterministic ? ordered_json(to_json(*t.deterministic)) : ordered_json();
  j["deterministic_order"] = t.deterministic_order;
  j["plan"] = t.plan ? ordered_json(to_json(*t.plan)) : ordered_json();
  j["gate"] = t.gate ? ordered_json(to_json(*t.gate)) : ordered_json();
  j["audit"] = t.audit ? ordered_json(to_json(*t.audit)) : ordered_json();
  if (t.failure) {
    j["failure"] = {{"stage", t.failure->stage}, {"kind", t.failure->kind}, {"detail", t.failure->detail}};
  } else {
    j["failure"] = nullptr;
  }
  j["approved"] = t.approved;
  j["executed"] = t.executed;
  j["failsafe"] = t.failsafe;
  j["failsafe_reason"] = t.failsafe_reason;
  j["critical_event"] = t.critical_event ? ordered_json(*t.critical_event) : ordered_json();
  j["executed_portfolio"] = t.executed_portfolio;
  j["executed_order"] = t.executed_order;
  ordered_json lat;
  for (std::size_t i = 0; i < 5; ++i) lat[std::string(to_string(kAgentRoles[i]))] = t.agent_latency[i];
  j["agent_latency"] = lat;
  j["t_net"] = t.t_net;
  j["t_det"] = t.t_det;
  j["dt"] = t.dt;
  j["power"] = t.power;
  j["energy"] = t.energy;
  return j;
}

// ---------------------------------------------------------------------------
// replay

std::vector<TelemetryVector> balanced_sample(const std::vector<TelemetryVector>& dataset,
                                             std::size_t n_per_class,
                                             const std::vector<Label>& classes,
                                             std::uint64_t seed) {
  Rng rng(seed);
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };
  std::vector<std::size_t> picked;
  for (const auto& label : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset[i].threat_label == label) idx.push_back(i);
    }
    if (idx.size() < n_per_class) {
      throw DatasetError("class " + label + " has " + std::to_string(idx.size()) +
                         " windows, " + std::to_string(n_per_class) + " required");
    }
    shuffle(idx);
    picked.insert(picked.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_per_class));
  }
  shuffle(picked);
  std::vector<TelemetryVector> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(dataset[i]);
  return out;
}

namespace {

struct NodeState {
  double temp = 0.0;
  double load = 0.0;
  double mem_scale = 1.0;
};

}  // namespace

RunLog run_replay(const std::vector<TelemetryVector>& dataset, std::size_t nodes,
                  std::size_t epochs_per_node, const Catalog& catalog,
                  const EngineConfig& config, AgentBackend& backend, std::uint64_t seed) {
  if (nodes == 0 || epochs_per_node == 0) throw ConfigError("replay needs at least one node and one epoch");
  if (nodes > config.nodes.size()) {
    throw ConfigError("replay asks for " + std::to_string(nodes) + " nodes, config declares " +
                      std::to_string(config.nodes.size()));
  }
  if (config.replay_classes.empty()) throw ConfigError("replay.classes must not be empty");
  const std::size_t total = nodes * epochs_per_node;
  const std::size_t classes = config.replay_classes.size();
  const std::size_t per_class = (total + classes - 1) / classes;
  auto windows = balanced_sample(dataset, per_class, config.replay_classes,
                                 mix_seed(seed, hash_label("sample")));
  windows.resize(total);

  std::vector<std::vector<DecisionTrace>> per_node(nodes);
  auto run_node = [&](std::size_t n) {
    const auto& node = config.nodes[n];
    Rng walk(mix_seed(seed, hash_label("walk:" + node.id)));
    NodeState state;
    auto& out = per_node[n];
    out.reserve(epochs_per_node);
    for (std::size_t e = 0; e < epochs_per_node; ++e) {
      TelemetryVector x = windows[n * epochs_per_node + e];
      if (e == 0) {
        state.temp = std::isfinite(x.device_temp) ? x.device_temp : PowerParams::kThermalThreshold;
        state.load = std::isfinite(x.load_proxy) ? std::max(0.0, x.load_proxy) : 0.0;
      } else {
        const auto& w = config.walk;
        state.temp = std::clamp(state.temp + w.temp_step * walk.normal(), w.temp_min, w.temp_max);
        state.load = std::clamp(state.load + w.load_step * walk.normal(), 0.0, w.load_max);
        state.mem_scale = std::clamp(state.mem_scale + w.mem_step * walk.normal(), w.mem_min, 1.0);
        x.device_temp = state.temp;
        x.load_proxy = state.load;
        x.mem_headroom *= state.mem_scale;
      }
      out.push_back(run_epoch(x, node, e, catalog, config, backend, seed));
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(nodes)));
  if (workers == 1) {
    for (std::size_t n = 0; n < nodes; ++n) run_node(n);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t n; (n = next.fetch_add(1)) < nodes;) run_node(n);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  RunLog log;
  log.traces.reserve(total);
  for (auto& node_traces : per_node) {
    for (auto& t : node_traces) log.traces.push_back(std::move(t));
  }
  return log;
}

void write_trace_lines(std::ostream& out, const RunLog& log) {
  for (const auto& t : log.traces) out << to_json(t).dump() << '\n';
}

void write_trace_file(const std::filesystem::path& path, const RunLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trace file " + path.string());
  write_trace_lines(out, log);
}

std::vector<json> read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open trace file " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DatasetError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    const auto& rec = out.back();
    if (!rec.is_object() || rec.value("schema_version", 0) != kTraceSchemaVersion) {
      throw DatasetError(path.string() + ":" + std::to_string(number) +
                         ": not a schema_version 1 trace record");
    }
  }
  return out;
}

}  // namespace aspo
