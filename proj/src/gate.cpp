#include "aspo/gate.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace aspo {

using nlohmann::json;

json to_json(const MitigationPlan& p) {
  return json{{"selected_patterns", p.selected_patterns},
              {"activation_order", p.activation_order},
              {"narrative", p.narrative}};
}

json to_json(const AuditVerdict& v) { return json{{"approved", v.approved}, {"issues", v.issues}}; }

std::string_view to_string(IssueCategory c) {
  switch (c) {
    case IssueCategory::kCatalogMembership: return "catalog_membership";
    case IssueCategory::kSetMismatch: return "set_mismatch";
    case IssueCategory::kActivationOrderMismatch: return "activation_order_mismatch";
    case IssueCategory::kConflict: return "conflict";
    case IssueCategory::kResourceFeasibility: return "resource_feasibility";
  }
  return "unknown";
}

std::optional<IssueCategory> issue_category_from_string(std::string_view s) {
  for (auto c : kIssueCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::vector<std::string> GateVerdict::issue_strings() const {
  std::vector<std::string> out;
  out.reserve(issues.size());
  for (const auto& i : issues) out.push_back(std::string(to_string(i.category)) + ": " + i.detail);
  return out;
}

json to_json(const GateVerdict& v) {
  json issues = json::array();
  for (const auto& i : v.issues) {
    issues.push_back({{"category", std::string(to_string(i.category))}, {"detail", i.detail}});
  }
  return json{{"ok", v.ok}, {"issues", issues}};
}

namespace {

std::string join(std::span<const PatternId> ids) {
  std::string out = "[";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out + "]";
}

}  // namespace

GateVerdict validate_plan(const MitigationPlan& plan, const Portfolio& deterministic,
                          std::span<const PatternId> deterministic_order, const BudgetVector& b,
                          const Catalog& catalog) {
  GateVerdict v;
  auto fail = [&](IssueCategory c, std::string detail) {
    v.issues.push_back({c, std::move(detail)});
  };

  // (1) closed-world membership of everything the plan mentions
  std::set<PatternId> unknown;
  for (const auto* list : {&plan.selected_patterns, &plan.activation_order}) {
    for (const auto& id : *list) {
      if (!catalog.contains(id)) unknown.insert(id);
    }
  }
  for (const auto& id : unknown) fail(IssueCategory::kCatalogMembership, id + " is not in the catalogue");

  // (2) set consistency
  const std::set<PatternId> plan_set(plan.selected_patterns.begin(), plan.selected_patterns.end());
  const std::set<PatternId> det_set(deterministic.members.begin(), deterministic.members.end());
  if (plan_set != det_set || plan_set.size() != plan.selected_patterns.size()) {
    fail(IssueCategory::kSetMismatch, "plan selects " + join(plan.selected_patterns) +
                                          ", deterministic portfolio is " +
                                          join(deterministic.members));
  }

  // (3) exact activation order
  if (!std::equal(plan.activation_order.begin(), plan.activation_order.end(),
                  deterministic_order.begin(), deterministic_order.end())) {
    fail(IssueCategory::kActivationOrderMismatch, "plan order " + join(plan.activation_order) +
                                                      ", required " + join(deterministic_order));
  }

  // (4) and (5) over the known members of the plan set
  std::vector<std::size_t> known;
  for (const auto& id : plan_set) {
    if (auto idx = catalog.find(id)) known.push_back(*idx);
  }
  std::sort(known.begin(), known.end());
  for (std::size_t a = 0; a < known.size(); ++a) {
    for (std::size_t c = a + 1; c < known.size(); ++c) {
      if (catalog.conflicts(known[a], known[c])) {
        fail(IssueCategory::kConflict, catalog.pattern(known[a]).id + " conflicts with " +
                                           catalog.pattern(known[c]).id);
      }
    }
  }
  const CostVector used = total_cost(known, catalog);
  for (Resource r : kResources) {
    if (used[r] > b[r]) {
      std::ostringstream os;
      os << resource_name(r) << " demand " << used[r] << " exceeds budget " << b[r];
      fail(IssueCategory::kResourceFeasibility, os.str());
    }
  }

  v.ok = v.issues.empty();
  return v;
}

FailsafeResult failsafe_portfolio(const Catalog& catalog, const BudgetVector& b) {
  constexpr double kGuard = 1e-6;
  FailsafeResult out;
  std::optional<std::size_t> pick;
  double pick_cost = 0.0;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& p = catalog.pattern(i);
    if (!p.is_baseline || !p.required_capabilities.empty()) continue;
    if (!fits(p.cost, b)) continue;
    double cost = 0.0;
    for (Resource r : kResources) cost += p.cost[r] / std::max(kGuard, b[r]);
    if (!pick || cost < pick_cost || (cost == pick_cost && p.id < catalog.pattern(*pick).id)) {
      pick = i;
      pick_cost = cost;
    }
  }
  if (!pick) {
    out.critical_event = "no baseline pattern fits the current budgets; no protection active";
    return out;
  }
  const auto& p = catalog.pattern(*pick);
  out.portfolio.members = {p.id};
  out.order = {p.id};
  return out;
}

}  // namespace aspo
