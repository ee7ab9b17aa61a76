#include "aspo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "aspo/error.hpp"
#include "json_util.hpp"

namespace aspo {

using nlohmann::json;

double ScoringWeights::alpha_sum() const {
  return std::accumulate(alpha.begin(), alpha.end(), 0.0);
}

void ScoringWeights::validate() const {
  for (double a : alpha) {
    if (!std::isfinite(a) || a < 0.0) throw ConfigError("weights: alpha must be finite and >= 0");
  }
  for (double b : beta) {
    if (!std::isfinite(b) || b < 0.0) throw ConfigError("weights: beta must be finite and >= 0");
  }
  if (!std::isfinite(eta) || eta < 0.0) throw ConfigError("weights: eta must be finite and >= 0");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("weights: epsilon must be > 0");
  if (!(lambda > alpha_sum()) || !std::isfinite(lambda)) {
    throw ConfigError("weights: lambda must exceed the sum of alpha");
  }
  if (portfolio_bound < 1) throw ConfigError("weights: portfolio_bound must be >= 1");
  if (candidate_bound < 1) throw ConfigError("weights: candidate_bound must be >= 1");
}

ScoringWeights weights_from_json(const json& j) {
  detail::reject_unknown_keys<ConfigError>(
      j, {"alpha", "beta", "eta", "lambda", "epsilon", "portfolio_bound", "candidate_bound"},
      "weights");
  ScoringWeights w;
  if (auto it = j.find("alpha"); it != j.end()) {
    if (!it->is_array() || it->size() != 5) throw ConfigError("weights.alpha: expected 5 numbers");
    for (std::size_t i = 0; i < 5; ++i) w.alpha[i] = detail::as_number<ConfigError>((*it)[i], "alpha");
  }
  if (auto it = j.find("beta"); it != j.end()) {
    detail::reject_unknown_keys<ConfigError>(*it, {"cpu", "mem", "lat", "ene"}, "weights.beta");
    for (Resource r : kResources) {
      const std::string key(resource_name(r));
      if (auto b = it->find(key); b != it->end()) {
        w.beta[static_cast<std::size_t>(r)] = detail::as_number<ConfigError>(*b, "beta." + key);
      }
    }
  }
  auto num = [&](const char* key, double& out) {
    if (auto it = j.find(key); it != j.end()) out = detail::as_number<ConfigError>(*it, key);
  };
  num("eta", w.eta);
  num("lambda", w.lambda);
  num("epsilon", w.epsilon);
  auto count = [&](const char* key, std::size_t& out) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_number_unsigned()) throw ConfigError(std::string("weights.") + key + ": expected a positive integer");
      out = it->get<std::size_t>();
    }
  };
  count("portfolio_bound", w.portfolio_bound);
  count("candidate_bound", w.candidate_bound);
  w.validate();
  return w;
}

json to_json(const ScoringWeights& w) {
  return json{{"alpha", w.alpha},
              {"beta", {{"cpu", w.beta[0]}, {"mem", w.beta[1]}, {"lat", w.beta[2]}, {"ene", w.beta[3]}}},
              {"eta", w.eta},
              {"lambda", w.lambda},
              {"epsilon", w.epsilon},
              {"portfolio_bound", w.portfolio_bound},
              {"candidate_bound", w.candidate_bound}};
}

json to_json(const Portfolio& p) {
  json terms = json::array();
  for (const auto& t : p.per_pattern) {
    terms.push_back(
        {{"id", t.id}, {"suitability", t.suitability}, {"normalized_cost", t.normalized_cost}});
  }
  return json{{"members", p.members},
              {"score", p.score},
              {"per_pattern", terms},
              {"subsets_evaluated", p.subsets_evaluated}};
}

double evidence_alignment(const SecurityPattern& p, const LabelSet& evidence) {
  std::size_t shared = 0;
  for (const auto& token : p.expected_evidence) {
    if (evidence.contains(token)) ++shared;
  }
  return static_cast<double>(shared) /
         static_cast<double>(std::max<std::size_t>(1, p.expected_evidence.size()));
}

double suitability(const SecurityPattern& p, const StructuredContext& s, const ScoringWeights& w) {
  const double covers = p.covered_threats.contains(s.threat) ? 1.0 : 0.0;
  const bool capable = std::includes(s.capabilities.begin(), s.capabilities.end(),
                                     p.required_capabilities.begin(),
                                     p.required_capabilities.end());
  return w.alpha[0] * covers + w.alpha[1] * s.severity + w.alpha[2] * s.confidence +
         w.alpha[3] * (capable ? 1.0 : 0.0) + w.alpha[4] * evidence_alignment(p, s.evidence);
}

double normalized_cost(const SecurityPattern& p, const BudgetVector& b, const ScoringWeights& w) {
  double total = 0.0;
  for (Resource r : kResources) {
    total += w.beta[static_cast<std::size_t>(r)] * p.cost[r] / std::max(w.epsilon, b[r]);
  }
  return total;
}

namespace {

double net_value(const SecurityPattern& p, const StructuredContext& s, const BudgetVector& b,
                 const ScoringWeights& w) {
  return suitability(p, s, w) - normalized_cost(p, b, w);
}

// members sorted by catalogue index; nets indexed the same way.
double combine(std::span<const double> nets, std::size_t synergies, std::size_t conflicts,
               const ScoringWeights& w) {
  double sum = 0.0;
  for (double v : nets) sum += v;
  return sum + w.eta * static_cast<double>(synergies) - w.lambda * static_cast<double>(conflicts);
}

std::vector<PatternId> sorted_ids(std::span<const std::size_t> members, const Catalog& catalog) {
  std::vector<PatternId> ids;
  ids.reserve(members.size());
  for (auto i : members) ids.push_back(catalog.pattern(i).id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

double portfolio_score(std::span<const PatternId> portfolio, const StructuredContext& s,
                       const BudgetVector& b, const Catalog& catalog, const ScoringWeights& w) {
  const auto members = catalog.indices_of(portfolio);
  std::vector<double> nets;
  nets.reserve(members.size());
  for (auto i : members) nets.push_back(net_value(catalog.pattern(i), s, b, w));
  return combine(nets, synergy_count(std::span<const std::size_t>(members), catalog),
                 conflict_count(std::span<const std::size_t>(members), catalog), w);
}

Portfolio select_portfolio(std::span<const PatternId> feasible, const StructuredContext& s,
                           const BudgetVector& b, const Catalog& catalog, const ScoringWeights& w) {
  const auto pool = catalog.indices_of(feasible);
  if (pool.size() > w.candidate_bound) {
    throw std::invalid_argument("feasible set larger than the candidate bound K");
  }

  std::vector<double> net(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) net[k] = net_value(catalog.pattern(pool[k]), s, b, w);

  struct Best {
    std::vector<std::size_t> members;  // positions into pool, ascending
    std::vector<PatternId> ids;        // sorted ids for tie-breaking
    double score = 0.0;
  } best;
  std::size_t evaluated = 1;  // the empty portfolio

  std::vector<std::size_t> chosen;
  std::vector<std::size_t> chosen_idx;
  std::vector<double> chosen_net;
  const std::size_t limit = std::min(w.portfolio_bound, pool.size());

  std::function<void(std::size_t)> extend = [&](std::size_t start) {
    for (std::size_t k = start; k < pool.size(); ++k) {
      // Conflict with any already-chosen member prunes every superset too.
      bool clash = false;
      for (auto idx : chosen_idx) {
        if (catalog.conflicts(idx, pool[k])) {
          clash = true;
          break;
        }
      }
      chosen.push_back(k);
      chosen_idx.push_back(pool[k]);
      chosen_net.push_back(net[k]);
      ++evaluated;

      if (!clash && fits(total_cost(chosen_idx, catalog), b)) {
        const double score =
            combine(chosen_net, synergy_count(std::span<const std::size_t>(chosen_idx), catalog), 0, w);
        bool better = score > best.score;
        if (!better && score == best.score) {
          if (chosen.size() < best.members.size()) {
            better = true;
          } else if (chosen.size() == best.members.size()) {
            better = sorted_ids(chosen_idx, catalog) < best.ids;
          }
        }
        if (better) {
          best.members = chosen;
          best.ids = sorted_ids(chosen_idx, catalog);
          best.score = score;
        }
      }
      // Budgets only grow with more members, but a later, cheaper pattern may
      // still fit; only conflicts prune.
      if (!clash && chosen.size() < limit) extend(k + 1);

      chosen.pop_back();
      chosen_idx.pop_back();
      chosen_net.pop_back();
    }
  };
  if (limit > 0) extend(0);

  Portfolio out;
  out.score = best.score;
  out.subsets_evaluated = evaluated;
  out.members = best.ids;
  for (const auto& id : out.members) {
    const auto& p = catalog.pattern(id);
    out.per_pattern.push_back({id, suitability(p, s, w), normalized_cost(p, b, w)});
  }
  return out;
}

std::vector<PatternId> activation_order(std::span<const PatternId> members, const Catalog& catalog) {
  const auto idx = catalog.indices_of(members);
  const std::size_t n = idx.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  auto local = [&](std::size_t global) -> std::ptrdiff_t {
    auto it = std::lower_bound(idx.begin(), idx.end(), global);
    if (it == idx.end() || *it != global) return -1;
    return it - idx.begin();
  };
  for (const auto& [a, b] : catalog.precedence()) {
    const auto la = local(a), lb = local(b);
    if (la < 0 || lb < 0) continue;
    out[la].push_back(static_cast<std::size_t>(lb));
    ++indegree[lb];
  }

  std::vector<PatternId> order;
  std::vector<bool> done(n, false);
  order.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    // Smallest id among ready nodes; n <= m is small.
    std::ptrdiff_t pick = -1;
    for (std::size_t k = 0; k < n; ++k) {
      if (done[k] || indegree[k] != 0) continue;
      if (pick < 0 || catalog.pattern(idx[k]).id < catalog.pattern(idx[pick]).id) {
        pick = static_cast<std::ptrdiff_t>(k);
      }
    }
    if (pick < 0) throw Error("precedence cycle among portfolio members");
    done[pick] = true;
    order.push_back(catalog.pattern(idx[pick]).id);
    for (auto next : out[pick]) --indegree[next];
  }
  return order;
}

}  // namespace aspo
