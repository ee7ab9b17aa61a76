#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/context.hpp"
#include "aspo/engine.hpp"
#include "aspo/optimizer.hpp"
#include "aspo/random.hpp"

namespace aspo::testing {

inline std::filesystem::path source_dir() { return ASPO_SOURCE_DIR; }

inline const Catalog& default_catalog() {
  static const Catalog c = load_catalog_file(source_dir() / "catalog/default_catalog.json");
  return c;
}

inline TelemetryVector worked_dos() {
  TelemetryVector x;
  x.packet_rate = 3250;
  x.byte_rate = 1.95e6;
  x.connection_duration = 12;
  x.tcp_flag_anomaly = 0.71;
  x.dst_port_entropy = 0.22;
  x.auth_failure_burst = 0;
  x.dns_anomaly = 0.08;
  x.timeout_irregularity = 0.15;
  x.cpu_headroom = 0.58;
  x.mem_headroom = 0.69;
  x.latency_budget = 95;
  x.energy_budget = 64;
  x.device_temp = 41.5;
  x.load_proxy = 0.62;
  x.threat_label = "dos";
  x.label_confidence = 0.93;
  return x;
}

inline std::string test_id(std::size_t i) {
  return std::string("Q") + static_cast<char>('0' + i / 10) + static_cast<char>('0' + i % 10);
}

inline const LabelSet& generator_threats() {
  static const LabelSet t = {"t0", "t1", "t2", "t3"};
  return t;
}
inline const LabelSet& generator_capabilities() {
  static const LabelSet c = {"c0", "c1", "c2", "c3", "c4"};
  return c;
}
inline const LabelSet& generator_evidence() {
  static const LabelSet e = {"e0", "e1", "e2", "e3", "e4", "e5"};
  return e;
}

inline LabelSet random_subset(Rng& rng, const LabelSet& universe, double p) {
  LabelSet out;
  for (const auto& l : universe) {
    if (rng.uniform() < p) out.insert(l);
  }
  return out;
}

// Random valid catalogue: pattern 0 is a capability-free baseline, conflicts
// and synergies never overlap, precedence edges only point forward.
inline Catalog random_catalog(Rng& rng, std::size_t m) {
  std::vector<SecurityPattern> patterns;
  for (std::size_t i = 0; i < m; ++i) {
    SecurityPattern p;
    p.id = test_id(i);
    p.name = "pattern " + p.id;
    p.covered_threats = random_subset(rng, generator_threats(), 0.4);
    p.required_capabilities = i == 0 ? LabelSet{} : random_subset(rng, generator_capabilities(), 0.25);
    p.expected_evidence = random_subset(rng, generator_evidence(), 0.3);
    p.cost = {rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.4), rng.uniform(0.0, 50.0),
              rng.uniform(0.0, 40.0)};
    p.is_baseline = i == 0;
    patterns.push_back(std::move(p));
  }
  std::vector<std::uint8_t> conflict(m * m, 0), synergy(m * m, 0);
  std::vector<std::pair<std::size_t, std::size_t>> precedence;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double u = rng.uniform();
      if (u < 0.2) conflict[i * m + j] = conflict[j * m + i] = 1;
      else if (u < 0.4) synergy[i * m + j] = synergy[j * m + i] = 1;
      if (rng.uniform() < 0.2) precedence.emplace_back(i, j);
    }
  }
  return Catalog::from_matrices(std::move(patterns), generator_threats(), generator_capabilities(),
                                std::move(conflict), std::move(synergy), std::move(precedence),
                                {"normal", "degraded", "critical"});
}

inline StructuredContext random_context(Rng& rng, const Catalog& catalog) {
  StructuredContext s;
  const auto& threats = catalog.threats();
  auto it = threats.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(threats.size())));
  s.threat = *it;
  s.severity = rng.uniform();
  s.confidence = rng.uniform();
  s.budgets = {rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0), rng.uniform(10.0, 150.0),
               rng.uniform(10.0, 120.0)};
  s.sla = "normal";
  s.evidence = random_subset(rng, generator_evidence(), 0.4);
  s.capabilities = random_subset(rng, generator_capabilities(), 0.6);
  return s;
}

// Random subset of catalogue ids of size at most `max_size`, catalogue order.
inline std::vector<PatternId> random_feasible(Rng& rng, const Catalog& catalog,
                                              std::size_t max_size) {
  std::vector<std::size_t> idx(catalog.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const std::size_t k = rng.below(std::min(max_size, catalog.size()) + 1);
  std::vector<PatternId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(catalog.pattern(idx[i]).id);
  return out;
}

struct OracleChoice {
  std::vector<PatternId> members;  // sorted
  double score = 0.0;
};

// Brute-force argmax over bitmasks of the feasible set, written from the
// scoring formulas rather than through the optimizer's helpers.
inline OracleChoice brute_force_select(const std::vector<PatternId>& feasible,
                                       const StructuredContext& s, const BudgetVector& b,
                                       const Catalog& catalog, const ScoringWeights& w) {
  std::vector<std::size_t> pool;
  for (const auto& id : feasible) pool.push_back(*catalog.find(id));
  std::sort(pool.begin(), pool.end());

  auto net = [&](const SecurityPattern& p) {
    const double covers = p.covered_threats.count(s.threat) ? 1.0 : 0.0;
    bool capable = true;
    for (const auto& c : p.required_capabilities) capable = capable && s.capabilities.count(c);
    std::size_t shared = 0;
    for (const auto& e : p.expected_evidence) shared += s.evidence.count(e);
    const double psi = p.expected_evidence.empty()
                           ? 0.0
                           : static_cast<double>(shared) / static_cast<double>(p.expected_evidence.size());
    const double suit = w.alpha[0] * covers + w.alpha[1] * s.severity + w.alpha[2] * s.confidence +
                        w.alpha[3] * (capable ? 1.0 : 0.0) + w.alpha[4] * psi;
    const double cost = w.beta[0] * p.cost.cpu / std::max(w.epsilon, b.cpu) +
                        w.beta[1] * p.cost.mem / std::max(w.epsilon, b.mem) +
                        w.beta[2] * p.cost.lat / std::max(w.epsilon, b.lat) +
                        w.beta[3] * p.cost.ene / std::max(w.epsilon, b.ene);
    return suit - cost;
  };

  OracleChoice best;
  const std::size_t n = pool.size();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) members.push_back(pool[i]);
    }
    if (members.size() > w.portfolio_bound) continue;
    bool clash = false;
    std::size_t synergies = 0;
    double cpu = 0, mem = 0, lat = 0, ene = 0;
    double total = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a) {
      const auto& p = catalog.pattern(members[a]);
      cpu += p.cost.cpu;
      mem += p.cost.mem;
      lat += p.cost.lat;
      ene += p.cost.ene;
      total += net(p);
      for (std::size_t c = a + 1; c < members.size(); ++c) {
        clash = clash || catalog.conflicts(members[a], members[c]);
        synergies += catalog.synergizes(members[a], members[c]) ? 1 : 0;
      }
    }
    if (clash || cpu > b.cpu || mem > b.mem || lat > b.lat || ene > b.ene) continue;
    const double score = total + w.eta * static_cast<double>(synergies);
    std::vector<PatternId> ids;
    for (auto i : members) ids.push_back(catalog.pattern(i).id);
    std::sort(ids.begin(), ids.end());
    const bool better = score > best.score ||
                        (score == best.score &&
                         (ids.size() < best.members.size() ||
                          (ids.size() == best.members.size() && ids < best.members)));
    if (better) best = {ids, score};
  }
  return best;
}

// Independent safety check of one trace record's executed portfolio: every
// member in the catalogue, no conflicting pair, summed cost within the logged
// budgets. Returns a description of the first problem.
inline std::optional<std::string> unsafe_execution(const nlohmann::json& rec,
                                                   const Catalog& catalog) {
  const auto& members = rec.at("executed_portfolio");
  std::vector<std::size_t> idx;
  for (const auto& m : members) {
    auto i = catalog.find(m.get<std::string>());
    if (!i) return "non-catalogue pattern " + m.get<std::string>();
    idx.push_back(*i);
  }
  double used[4] = {0, 0, 0, 0};
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const auto& c = catalog.pattern(idx[a]).cost;
    used[0] += c.cpu;
    used[1] += c.mem;
    used[2] += c.lat;
    used[3] += c.ene;
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (idx[a] == idx[b]) return "duplicate member";
      if (catalog.conflicts(idx[a], idx[b])) return "conflicting pair";
    }
  }
  const auto& budgets = rec.at("budgets");
  const char* keys[4] = {"cpu", "mem", "lat", "ene"};
  for (int r = 0; r < 4; ++r) {
    if (used[r] > budgets.at(keys[r]).get<double>()) return std::string("over budget on ") + keys[r];
  }
  return std::nullopt;
}

}  // namespace aspo::testing
