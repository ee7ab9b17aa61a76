#include "aspo/agents.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include "aspo/random.hpp"

namespace aspo {

using nlohmann::json;

std::string_view to_string(AgentRole role) {
  switch (role) {
    case AgentRole::kContext: return "context";
    case AgentRole::kReasoner: return "reasoner";
    case AgentRole::kConstraint: return "constraint";
    case AgentRole::kPlanner: return "planner";
    case AgentRole::kAuditor: return "auditor";
  }
  return "unknown";
}

AgentRole agent_role_from_string(std::string_view name) {
  for (AgentRole r : kAgentRoles) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown agent role: " + std::string(name));
}

json to_json(const AgentMessage& m) {
  json j = json::object();
  j["agent"] = std::string(to_string(m.agent));
  j["epoch"] = m.epoch;
  j["payload"] = m.payload;
  j["latency"] = m.latency;
  j["attempts"] = m.attempts;
  return j;
}

std::vector<PatternId> CandidateSet::ids() const {
  std::vector<PatternId> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.id);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Schema errors and timeouts get one retry; closed-world and contract
// violations end the stage at once.
template <class T, class Decode>
AgentCall<T> call_agent(AgentRole role, const json& request, AgentBackend& backend,
                        const CallInfo& call, Decode decode) {
  constexpr int kMaxAttempts = 2;
  const auto start = Clock::now();
  CallInfo attempt_call = call;
  for (int attempt = 1;; ++attempt) {
    attempt_call.attempt = attempt;
    std::string kind;
    std::string detail;
    try {
      json response = backend.invoke(role, request, attempt_call);
      if (auto err = schema_violation(response_schema(role), response)) throw SchemaError(*err);
      T value = decode(response);
      AgentMessage msg{role, call.epoch, std::move(response), seconds_since(start), attempt};
      return {std::move(value), std::move(msg)};
    } catch (const SchemaError& e) {
      kind = "schema";
      detail = e.what();
    } catch (const json::exception& e) {
      kind = "schema";
      detail = e.what();
    } catch (const BackendTimeout& e) {
      kind = "timeout";
      detail = e.what();
    } catch (const ClosedWorldViolation& e) {
      throw AgentStageFailure(role, "closed_world", attempt, seconds_since(start), e.what());
    } catch (const ContractViolation& e) {
      throw AgentStageFailure(role, "contract", attempt, seconds_since(start), e.what());
    }
    if (attempt >= kMaxAttempts) {
      throw AgentStageFailure(role, kind, attempt, seconds_since(start), detail);
    }
  }
}

json pattern_digest(const SecurityPattern& p) {
  return json{{"id", p.id},
              {"name", p.name},
              {"covered_threats", p.covered_threats},
              {"required_capabilities", p.required_capabilities},
              {"expected_evidence", p.expected_evidence}};
}

bool capable(const SecurityPattern& p, const LabelSet& caps) {
  return std::includes(caps.begin(), caps.end(), p.required_capabilities.begin(),
                       p.required_capabilities.end());
}

}  // namespace

AgentCall<StructuredContext> run_context_agent(const StructuredContext& s, const Catalog& catalog,
                                               AgentBackend& backend, const CallInfo& call) {
  const json request{{"agent", "context"},
                     {"context", to_json(s)},
                     {"threats", catalog.threats()},
                     {"sla_levels", catalog.sla_levels()}};
  return call_agent<StructuredContext>(AgentRole::kContext, request, backend, call,
                                       [&](const json& r) {
    StructuredContext out = context_from_json(r.at("context"));
    if (!catalog.threats().contains(out.threat)) {
      throw SchemaError("threat outside the taxonomy: " + out.threat);
    }
    if (!catalog.sla_levels().contains(out.sla)) {
      throw SchemaError("sla level outside the catalogue: " + out.sla);
    }
    return out;
  });
}

AgentCall<CandidateSet> run_reasoner(const StructuredContext& s_star, const Catalog& catalog,
                                     const ScoringWeights& w, AgentBackend& backend,
                                     const CallInfo& call) {
  json patterns = json::array();
  for (const auto& p : catalog.patterns()) patterns.push_back(pattern_digest(p));
  const json request{{"agent", "reasoner"},
                     {"context", to_json(s_star)},
                     {"candidate_bound", w.candidate_bound},
                     {"weights", to_json(w)},
                     {"patterns", patterns}};
  return call_agent<CandidateSet>(AgentRole::kReasoner, request, backend, call,
                                  [&](const json& r) {
    CandidateSet out;
    std::set<PatternId> seen;
    for (const auto& c : r.at("candidates")) {
      PatternId id = c.at("pattern_id").get<std::string>();
      if (!catalog.contains(id)) throw ClosedWorldViolation("reasoner proposed unknown pattern " + id);
      if (!seen.insert(id).second) throw SchemaError("duplicate candidate " + id);
      out.candidates.push_back({std::move(id), c.at("rationale").get<std::string>()});
    }
    if (out.candidates.size() > w.candidate_bound) {
      throw SchemaError("candidate list of " + std::to_string(out.candidates.size()) +
                        " exceeds the bound " + std::to_string(w.candidate_bound));
    }
    return out;
  });
}

AgentCall<std::vector<PatternId>> filter_feasible(const CandidateSet& candidates,
                                                  const StructuredContext& s_star,
                                                  const Catalog& catalog, AgentBackend& backend,
                                                  const CallInfo& call) {
  json requirements = json::object();
  for (const auto& c : candidates.candidates) {
    requirements[c.id] = catalog.pattern(c.id).required_capabilities;
  }
  const json request{{"agent", "constraint"},
                     {"context", to_json(s_star)},
                     {"candidates", candidates.ids()},
                     {"requirements", requirements}};
  return call_agent<std::vector<PatternId>>(
      AgentRole::kConstraint, request, backend, call, [&](const json& r) {
        std::set<PatternId> kept;
        for (const auto& v : r.at("feasible")) {
          const auto id = v.get<std::string>();
          if (!catalog.contains(id)) {
            throw ClosedWorldViolation("constraint agent named unknown pattern " + id);
          }
          const bool offered = std::any_of(candidates.candidates.begin(), candidates.candidates.end(),
                                           [&](const Candidate& c) { return c.id == id; });
          if (!offered) throw ContractViolation("constraint agent added " + id);
          kept.insert(id);
        }
        for (const auto& v : r.at("rejected")) {
          const auto id = v.at("pattern_id").get<std::string>();
          if (!catalog.contains(id)) {
            throw ClosedWorldViolation("constraint agent named unknown pattern " + id);
          }
        }
        // The capability check is ours, whatever the agent said.
        std::vector<PatternId> out;
        for (const auto& c : candidates.candidates) {
          if (kept.contains(c.id) && capable(catalog.pattern(c.id), s_star.capabilities)) {
            out.push_back(c.id);
          }
        }
        return out;
      });
}

AgentCall<MitigationPlan> run_planner(const StructuredContext& s_star, const Portfolio& y_det,
                                      std::span<const PatternId> order_det, const Catalog& catalog,
                                      AgentBackend& backend, const CallInfo& call) {
  json names = json::object();
  for (const auto& id : y_det.members) names[id] = catalog.pattern(id).name;
  const json request{{"agent", "planner"},
                     {"context", to_json(s_star)},
                     {"selected_patterns", y_det.members},
                     {"activation_order", std::vector<PatternId>(order_det.begin(), order_det.end())},
                     {"names", names}};
  return call_agent<MitigationPlan>(AgentRole::kPlanner, request, backend, call,
                                    [](const json& r) {
    MitigationPlan plan;
    plan.selected_patterns = r.at("selected_patterns").get<std::vector<PatternId>>();
    plan.activation_order = r.at("activation_order").get<std::vector<PatternId>>();
    plan.narrative = r.at("narrative").get<std::string>();
    auto a = plan.selected_patterns, b = plan.activation_order;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw SchemaError("activation_order is not a permutation of selected_patterns");
    return plan;
  });
}

AgentCall<AuditVerdict> run_auditor(const StructuredContext& s_star, const MitigationPlan& plan,
                                    const std::vector<std::string>& gate_issues,
                                    AgentBackend& backend, const CallInfo& call) {
  const json request{{"agent", "auditor"},
                     {"context", to_json(s_star)},
                     {"plan", to_json(plan)},
                     {"gate_issues", gate_issues}};
  return call_agent<AuditVerdict>(AgentRole::kAuditor, request, backend, call, [](const json& r) {
    return AuditVerdict{r.at("approved").get<bool>(), r.at("issues").get<std::vector<std::string>>()};
  });
}

// ---------------------------------------------------------------------------

json MockBackend::invoke(AgentRole role, const json& request, const CallInfo& call) {
  switch (role) {
    case AgentRole::kContext:
      return json{{"context", request.at("context")}, {"status", "PASS"}};

    case AgentRole::kReasoner: {
      const StructuredContext s = context_from_json(request.at("context"));
      const ScoringWeights w = weights_from_json(request.at("weights"));
      const auto k = request.at("candidate_bound").get<std::size_t>();
      Rng rng(call.seed);
      struct Ranked {
        double key;
        double score;
        const SecurityPattern* p;
      };
      std::vector<Ranked> ranked;
      for (const auto& p : catalog_.patterns()) {
        const double score = suitability(p, s, w);
        ranked.push_back({score + rng.uniform(-jitter_, jitter_), score, &p});
      }
      std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.key != b.key) return a.key > b.key;
        return a.p->id < b.p->id;
      });
      json candidates = json::array();
      for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        const auto& p = *ranked[i].p;
        std::ostringstream why;
        why << p.name << ": suitability " << ranked[i].score;
        if (p.covered_threats.contains(s.threat)) why << ", covers " << s.threat;
        candidates.push_back({{"pattern_id", p.id}, {"rationale", why.str()}});
      }
      return json{{"candidates", candidates}};
    }

    case AgentRole::kConstraint: {
      const StructuredContext s = context_from_json(request.at("context"));
      json feasible = json::array();
      json rejected = json::array();
      for (const auto& id : request.at("candidates")) {
        const auto& p = catalog_.pattern(id.get<std::string>());
        std::vector<Label> missing;
        std::set_difference(p.required_capabilities.begin(), p.required_capabilities.end(),
                            s.capabilities.begin(), s.capabilities.end(),
                            std::back_inserter(missing));
        if (missing.empty()) {
          feasible.push_back(p.id);
        } else {
          std::string reason = "missing capability";
          for (const auto& m : missing) reason += " " + m;
          rejected.push_back({{"pattern_id", p.id}, {"reason", reason}});
        }
      }
      return json{{"feasible", feasible}, {"rejected", rejected}};
    }

    case AgentRole::kPlanner: {
      const auto& order = request.at("activation_order");
      const auto& names = request.at("names");
      std::string narrative;
      if (order.empty()) {
        narrative = "No pattern selected; keep the current posture.";
      } else {
        narrative = "Activate ";
        for (std::size_t i = 0; i < order.size(); ++i) {
          const auto id = order[i].get<std::string>();
          if (i) narrative += ", then ";
          narrative += names.value(id, id) + " (" + id + ")";
        }
        narrative += ".";
      }
      return json{{"selected_patterns", request.at("selected_patterns")},
                  {"activation_order", order},
                  {"narrative", narrative}};
    }

    case AgentRole::kAuditor: {
      const auto& issues = request.at("gate_issues");
      return json{{"approved", issues.empty()}, {"issues", issues}};
    }
  }
  throw std::logic_error("unhandled agent role");
}

}  // namespace aspo
