#include "aspo/decision_log.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace aspo {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string names(const std::vector<PatternId>& ids, const Catalog& catalog,
                  const char* separator = ", ") {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += separator;
    auto idx = catalog.find(ids[i]);
    out += idx ? catalog.pattern(*idx).name + " (" + ids[i] + ")" : ids[i];
  }
  return out;
}

std::string join(const LabelSet& labels) {
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += ", ";
    out += l;
  }
  return out;
}

// Every subset of `feasible` with at most B members, in size-then-lexicographic order.
void list_subsets(std::ostream& os, const std::vector<PatternId>& feasible,
                  const StructuredContext& s, const BudgetVector& b, const Catalog& catalog,
                  const ScoringWeights& w) {
  std::vector<PatternId> sorted = feasible;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t bound = std::min(w.portfolio_bound, n);
  for (std::size_t k = 1; k <= bound; ++k) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      std::vector<PatternId> subset;
      for (std::size_t i = 0; i < n; ++i) {
        if (pick[i]) subset.push_back(sorted[i]);
      }
      const auto idx = catalog.indices_of(subset);
      std::string status = "feasible";
      if (conflict_count(std::span<const std::size_t>(idx), catalog) > 0) status = "conflict";
      else if (!fits(total_cost(idx, catalog), b)) status = "over budget";
      const double score = portfolio_score(subset, s, b, catalog, w);
      os << "        Y = {" << names(subset, catalog) << "}  score = " << fixed(score, 4)
         << "  " << status << '\n';
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
}

}  // namespace

std::string render_decision_log(const DecisionTrace& t, const TelemetryVector& x,
                                const Catalog& catalog, const ScoringWeights& weights) {
  std::ostringstream os;
  os << "[Edge Gateway: " << t.node << "]  telemetry " << t.telemetry_digest << '\n';
  os << "------------------------------------------------------------\n";
  os << "-> New ASPO decision epoch detected [epoch: " << t.epoch << "]\n";
  if (t.context) {
    os << "-> Threat context: " << t.context->threat << "    Severity = "
       << fixed(t.context->severity, 4) << "    Confidence = " << fixed(t.context->confidence, 2)
       << '\n';
  }
  os << "-> Monitor stage: gateway telemetry captured\n";
  os << "        packet_rate = " << fixed(x.packet_rate, 0)
     << "/s    tcp_flag_anomaly = " << fixed(x.tcp_flag_anomaly, 2)
     << "    dst_port_entropy = " << fixed(x.dst_port_entropy, 2) << '\n';
  os << "        CPU headroom = " << fixed(t.budgets.cpu, 2) << "    Memory = "
     << fixed(t.budgets.mem, 2) << "    Latency budget = " << fixed(t.budgets.lat, 0)
     << " ms    Energy = " << fixed(t.budgets.ene, 0) << " J\n";

  if (!t.context) {
    os << "-> Analyze stage: encoder failed\n";
  } else {
    os << "-> Analyze stage: structured state constructed\n";
    os << "        S_t = [ threat = " << t.context->threat << ", severity = "
       << fixed(t.context->severity, 4) << ", confidence = " << fixed(t.context->confidence, 2)
       << ", SLA = " << t.context->sla << " ]\n";
    os << "        evidence tokens = {" << join(t.context->evidence) << "}\n";
    os << "        node capabilities = {" << join(t.context->capabilities) << "}\n";
  }

  if (!t.messages.empty()) os << "-> Invoking Multi-Agent Planning Layer\n";
  for (const auto& m : t.messages) {
    switch (m.agent) {
      case AgentRole::kContext:
        os << "    [Context Agent] -> normalised context representation and validated schema\n";
        os << "            status: " << m.payload.value("status", std::string("PASS")) << '\n';
        break;
      case AgentRole::kReasoner: {
        os << "    [Reasoner Agent] -> generated candidate mitigation patterns\n";
        std::vector<PatternId> ids;
        for (const auto& c : t.candidates) ids.push_back(c.id);
        os << "            {" << names(ids, catalog) << "}\n";
        break;
      }
      case AgentRole::kConstraint: {
        os << "    [Constraint Agent] -> filtered candidates using capability and relevance rules\n";
        std::vector<PatternId> rejected;
        for (const auto& c : t.candidates) {
          if (std::find(t.feasible.begin(), t.feasible.end(), c.id) == t.feasible.end()) {
            rejected.push_back(c.id);
          }
        }
        if (!rejected.empty()) os << "            rejected: " << names(rejected, catalog) << '\n';
        os << "            feasible set F_t = {" << names(t.feasible, catalog) << "}\n";
        if (t.normalized && t.deterministic) {
          os << "-> Running Deterministic Portfolio Optimization\n";
          list_subsets(os, t.feasible, *t.normalized, t.budgets, catalog, weights);
          os << "        Selected portfolio:\n";
          os << "            Y_t^det = {" << names(t.deterministic->members, catalog)
             << "}  score = " << fixed(t.deterministic->score, 4) << '\n';
          os << "-> Ordering module\n";
          os << "        activation order determined by precedence rules\n";
          os << "            [" << names(t.deterministic_order, catalog, " -> ") << "]\n";
        }
        break;
      }
      case AgentRole::kPlanner:
        os << "    [Planner Agent] -> generated executable mitigation plan\n";
        if (t.plan) os << "            " << t.plan->narrative << '\n';
        if (t.gate) {
          os << "    [Security Gate] -> deterministic validation\n";
          for (IssueCategory c : kIssueCategories) {
            bool failed = std::any_of(t.gate->issues.begin(), t.gate->issues.end(),
                                      [&](const GateIssue& i) { return i.category == c; });
            std::string label(to_string(c));
            std::replace(label.begin(), label.end(), '_', ' ');
            os << "            " << label << " = " << (failed ? "FAIL" : "PASS") << '\n';
          }
          for (const auto& issue : t.gate->issue_strings()) os << "            ! " << issue << '\n';
        }
        break;
      case AgentRole::kAuditor:
        os << "    [Auditor Agent] -> policy consistency "
           << (t.audit && t.audit->approved ? "verified" : "disputed") << '\n';
        os << "            approved = " << (t.audit && t.audit->approved ? "TRUE" : "FALSE") << '\n';
        break;
    }
  }
  if (t.failure) {
    os << "-> Pipeline failure at " << t.failure->stage << " (" << t.failure->kind << "): "
       << t.failure->detail << '\n';
  }

  if (t.executed) {
    os << "-> Execute stage\n";
    os << "        " << names(t.executed_order, catalog, " -> ") << '\n';
  } else if (t.failsafe) {
    os << "-> Fail-safe fallback (" << t.failsafe_reason << ")\n";
    if (t.critical_event) {
      os << "        critical event: " << *t.critical_event << '\n';
    } else {
      os << "        " << names(t.executed_order, catalog, " -> ") << '\n';
    }
  }
  os << "-> Final system outcome\n";
  os << "        decision latency = " << fixed(t.dt, 3) << " s    energy overhead = "
     << fixed(t.energy, 3) << " J    average power = " << fixed(t.power, 3) << " W\n";
  os << "        gateway state = "
     << (t.critical_event ? "critical" : t.executed ? "stable" : "fail-safe") << '\n';
  return os.str();
}

}  // namespace aspo
