#include <algorithm>
#include <set>

#include "aspo/agents.hpp"
#include "aspo/random.hpp"

namespace aspo {

using nlohmann::json;

namespace {

struct ProfileName {
  FaultProfile profile;
  std::string_view name;
};

constexpr ProfileName kProfiles[] = {
    {FaultProfile::kOrderSwap, "order_swap"},
    {FaultProfile::kSetTamper, "set_tamper"},
    {FaultProfile::kBudgetBlind, "budget_blind"},
    {FaultProfile::kOutOfCatalog, "out_of_catalog"},
    {FaultProfile::kReasonerOutOfCatalog, "reasoner_oob"},
    {FaultProfile::kReasonerOversize, "reasoner_oversize"},
    {FaultProfile::kConstraintAdd, "constraint_add"},
    {FaultProfile::kContextGarbage, "context_garbage"},
    {FaultProfile::kContextTaxonomy, "context_taxonomy"},
    {FaultProfile::kAuditorRubberStamp, "auditor_rubberstamp"},
    {FaultProfile::kTimeout, "timeout"},
    {FaultProfile::kFlakyTimeout, "flaky_timeout"},
};

AgentRole target_role(FaultProfile p) {
  switch (p) {
    case FaultProfile::kOrderSwap:
    case FaultProfile::kSetTamper:
    case FaultProfile::kBudgetBlind:
    case FaultProfile::kOutOfCatalog: return AgentRole::kPlanner;
    case FaultProfile::kReasonerOutOfCatalog:
    case FaultProfile::kReasonerOversize:
    case FaultProfile::kTimeout:
    case FaultProfile::kFlakyTimeout: return AgentRole::kReasoner;
    case FaultProfile::kConstraintAdd: return AgentRole::kConstraint;
    case FaultProfile::kContextGarbage:
    case FaultProfile::kContextTaxonomy: return AgentRole::kContext;
    case FaultProfile::kAuditorRubberStamp: return AgentRole::kAuditor;
  }
  return AgentRole::kPlanner;
}

void append_member(json& plan, const PatternId& id) {
  plan["selected_patterns"].push_back(id);
  plan["activation_order"].push_back(id);
}

}  // namespace

std::string_view to_string(FaultProfile p) {
  for (const auto& entry : kProfiles) {
    if (entry.profile == p) return entry.name;
  }
  return "unknown";
}

FaultProfile fault_profile_from_string(std::string_view name) {
  for (const auto& entry : kProfiles) {
    if (entry.name == name) return entry.profile;
  }
  throw ConfigError("unknown fault profile: " + std::string(name));
}

FaultSpec parse_fault_spec(std::string_view text) {
  FaultSpec spec;
  if (auto at = text.find('@'); at != std::string_view::npos) {
    const auto rate_text = std::string(text.substr(at + 1));
    std::size_t used = 0;
    try {
      spec.rate = std::stod(rate_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != rate_text.size() || !(spec.rate >= 0.0 && spec.rate <= 1.0)) {
      throw ConfigError("fault rate must be a number in [0,1]: " + rate_text);
    }
    text = text.substr(0, at);
  }
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    spec.pattern = std::string(text.substr(colon + 1));
    text = text.substr(0, colon);
    if (spec.pattern->empty()) throw ConfigError("empty pattern in fault spec");
  }
  spec.profile = fault_profile_from_string(text);
  if (spec.pattern && spec.profile != FaultProfile::kSetTamper) {
    throw ConfigError("only set_tamper takes a pattern argument");
  }
  return spec;
}

std::string FaultBackend::name() const {
  std::string out = "fault:" + std::string(to_string(spec_.profile));
  if (spec_.pattern) out += ":" + *spec_.pattern;
  if (spec_.rate < 1.0) out += "@" + std::to_string(spec_.rate);
  return out;
}

bool FaultBackend::active(std::uint64_t epoch_seed) const {
  if (spec_.rate >= 1.0) return true;
  Rng rng(mix_seed(epoch_seed, hash_label("fault")));
  return rng.uniform() < spec_.rate;
}

json FaultBackend::tamper_plan(json plan, const json& request) const {
  const auto members = plan.at("selected_patterns").get<std::vector<PatternId>>();
  const std::set<PatternId> member_set(members.begin(), members.end());
  auto non_members = [&] {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
      if (!member_set.contains(catalog_.pattern(i).id)) out.push_back(i);
    }
    return out;
  };

  switch (spec_.profile) {
    case FaultProfile::kOrderSwap: {
      auto& order = plan["activation_order"];
      std::reverse(order.begin(), order.end());
      break;
    }
    case FaultProfile::kSetTamper: {
      if (spec_.pattern) {
        if (!member_set.contains(*spec_.pattern)) append_member(plan, *spec_.pattern);
        break;
      }
      const auto others = non_members();
      std::optional<std::size_t> pick;
      for (auto i : others) {
        for (const auto& m : members) {
          if (catalog_.contains(m) && catalog_.conflicts(i, catalog_.index_of(m))) {
            pick = i;
            break;
          }
        }
        if (pick) break;
      }
      if (!pick && !others.empty()) pick = others.front();
      if (pick) append_member(plan, catalog_.pattern(*pick).id);
      break;
    }
    case FaultProfile::kBudgetBlind: {
      // Add the most demanding compatible patterns until some budget breaks.
      const auto budgets = context_from_json(request.at("context")).budgets;
      auto others = non_members();
      auto load = [&](std::size_t i) {
        double total = 0.0;
        for (Resource r : kResources) total += catalog_.pattern(i).cost[r] / std::max(1e-6, budgets[r]);
        return total;
      };
      std::stable_sort(others.begin(), others.end(),
                       [&](std::size_t a, std::size_t b) { return load(a) > load(b); });
      std::vector<std::size_t> chosen;
      for (const auto& m : members) {
        if (catalog_.contains(m)) chosen.push_back(catalog_.index_of(m));
      }
      for (auto i : others) {
        if (fits(total_cost(chosen, catalog_), budgets) == false) break;
        const bool clash = std::any_of(chosen.begin(), chosen.end(),
                                       [&](std::size_t c) { return catalog_.conflicts(c, i); });
        if (clash) continue;
        chosen.push_back(i);
        append_member(plan, catalog_.pattern(i).id);
      }
      break;
    }
    case FaultProfile::kOutOfCatalog:
      append_member(plan, "P99");
      break;
    default:
      break;
  }
  if (spec_.profile != FaultProfile::kOrderSwap) {
    plan["narrative"] = plan.value("narrative", std::string()) + " [altered]";
  }
  return plan;
}

json FaultBackend::invoke(AgentRole role, const json& request, const CallInfo& call) {
  const bool hit = role == target_role(spec_.profile) && active(call.epoch_seed);
  if (hit) {
    switch (spec_.profile) {
      case FaultProfile::kTimeout:
        throw BackendTimeout("reasoner did not answer");
      case FaultProfile::kFlakyTimeout:
        if (call.attempt == 1) throw BackendTimeout("reasoner did not answer (first attempt)");
        break;
      case FaultProfile::kContextGarbage:
        return json{{"garbage", true}};
      default:
        break;
    }
  }
  json response = inner_->invoke(role, request, call);
  if (!hit) return response;

  switch (spec_.profile) {
    case FaultProfile::kOrderSwap:
    case FaultProfile::kSetTamper:
    case FaultProfile::kBudgetBlind:
    case FaultProfile::kOutOfCatalog:
      return tamper_plan(std::move(response), request);
    case FaultProfile::kReasonerOutOfCatalog: {
      auto& c = response["candidates"];
      if (!c.empty() && c.size() >= request.at("candidate_bound").get<std::size_t>()) c.erase(c.size() - 1);
      c.push_back({{"pattern_id", "P99"}, {"rationale", "injected"}});
      return response;
    }
    case FaultProfile::kReasonerOversize: {
      auto& c = response["candidates"];
      std::set<std::string> present;
      for (const auto& e : c) present.insert(e.at("pattern_id").get<std::string>());
      for (const auto& p : catalog_.patterns()) {
        if (c.size() > request.at("candidate_bound").get<std::size_t>()) break;
        if (!present.contains(p.id)) c.push_back({{"pattern_id", p.id}, {"rationale", "padding"}});
      }
      return response;
    }
    case FaultProfile::kConstraintAdd: {
      std::set<std::string> offered;
      for (const auto& id : request.at("candidates")) offered.insert(id.get<std::string>());
      for (const auto& p : catalog_.patterns()) {
        if (!offered.contains(p.id)) {
          response["feasible"].push_back(p.id);
          break;
        }
      }
      return response;
    }
    case FaultProfile::kContextTaxonomy:
      response["context"]["threat"] = "quantum_intrusion";
      return response;
    case FaultProfile::kAuditorRubberStamp:
      response["approved"] = true;
      response["issues"] = json::array();
      return response;
    default:
      return response;
  }
}

}  // namespace aspo
