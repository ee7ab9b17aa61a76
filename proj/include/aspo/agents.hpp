#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/context.hpp"
#include "aspo/error.hpp"
#include "aspo/optimizer.hpp"
#include "aspo/plan.hpp"

namespace aspo {

enum class AgentRole { kContext, kReasoner, kConstraint, kPlanner, kAuditor };

// Pipeline order.
inline constexpr AgentRole kAgentRoles[] = {AgentRole::kContext, AgentRole::kReasoner,
                                            AgentRole::kConstraint, AgentRole::kPlanner,
                                            AgentRole::kAuditor};

std::string_view to_string(AgentRole role);
AgentRole agent_role_from_string(std::string_view name);

struct AgentMessage {
  AgentRole agent = AgentRole::kContext;
  std::uint64_t epoch = 0;
  nlohmann::json payload;  // validated response document
  double latency = 0.0;    // seconds, across all attempts
  int attempts = 1;
};

nlohmann::json to_json(const AgentMessage& m);

struct Candidate {
  PatternId id;
  std::string rationale;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct CandidateSet {
  std::vector<Candidate> candidates;

  std::vector<PatternId> ids() const;
  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

// Per-call information handed to a backend. `seed` is specific to the role;
// `epoch_seed` is shared by all calls of one epoch.
struct CallInfo {
  std::uint64_t seed = 0;
  std::uint64_t epoch_seed = 0;
  std::uint64_t epoch = 0;
  std::string node;
  int attempt = 1;
};

// A backend turns one request document into one response document. It may
// throw BackendTimeout or SchemaError; everything else about the response is
// checked by the caller. Implementations must be safe for concurrent use.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual nlohmann::json invoke(AgentRole role, const nlohmann::json& request,
                                const CallInfo& call) = 0;
  virtual std::string name() const = 0;
  // True when latencies reported by this backend are not meaningful wall-clock figures.
  virtual bool simulated() const { return false; }
};

// Raised when an agent stage cannot produce an accepted message.
class AgentStageFailure : public Error {
 public:
  AgentStageFailure(AgentRole role, std::string kind, int attempts, double latency,
                    const std::string& detail)
      : Error(std::string(to_string(role)) + " stage failed (" + kind + "): " + detail),
        role_(role), kind_(std::move(kind)), attempts_(attempts), latency_(latency) {}

  AgentRole role() const noexcept { return role_; }
  // One of schema, timeout, closed_world, contract.
  const std::string& kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }
  double latency() const noexcept { return latency_; }

 private:
  AgentRole role_;
  std::string kind_;
  int attempts_;
  double latency_;
};

template <class T>
struct AgentCall {
  T value;
  AgentMessage message;
};

// Response schema documents, keyed by role, as shipped in schemas/agents.
const nlohmann::json& response_schema(AgentRole role);

// Minimal JSON-schema check (type, required, properties, additionalProperties,
// items, enum, minimum, maximum, minLength, uniqueItems). Returns the first
// violation as "path: message".
std::optional<std::string> schema_violation(const nlohmann::json& schema,
                                            const nlohmann::json& instance);

AgentCall<StructuredContext> run_context_agent(const StructuredContext& s, const Catalog& catalog,
                                               AgentBackend& backend, const CallInfo& call);

AgentCall<CandidateSet> run_reasoner(const StructuredContext& s_star, const Catalog& catalog,
                                     const ScoringWeights& w, AgentBackend& backend,
                                     const CallInfo& call);

// Feasible subset of the candidates, in candidate order. The capability filter
// is re-applied after the backend answers.
AgentCall<std::vector<PatternId>> filter_feasible(const CandidateSet& candidates,
                                                  const StructuredContext& s_star,
                                                  const Catalog& catalog, AgentBackend& backend,
                                                  const CallInfo& call);

AgentCall<MitigationPlan> run_planner(const StructuredContext& s_star, const Portfolio& y_det,
                                      std::span<const PatternId> order_det, const Catalog& catalog,
                                      AgentBackend& backend, const CallInfo& call);

AgentCall<AuditVerdict> run_auditor(const StructuredContext& s_star, const MitigationPlan& plan,
                                    const std::vector<std::string>& gate_issues,
                                    AgentBackend& backend, const CallInfo& call);

// Deterministic stand-in for model backends. Context and constraint agents are
// exact, the reasoner ranks by suitability with seeded jitter, the planner
// copies the deterministic plan and the auditor approves iff no gate issues.
class MockBackend : public AgentBackend {
 public:
  explicit MockBackend(const Catalog& catalog, double jitter = 0.05)
      : catalog_(catalog), jitter_(jitter) {}

  nlohmann::json invoke(AgentRole role, const nlohmann::json& request,
                        const CallInfo& call) override;
  std::string name() const override { return "mock"; }
  bool simulated() const override { return true; }

 private:
  const Catalog& catalog_;
  double jitter_;
};

enum class FaultProfile {
  kOrderSwap,           // planner reverses the activation order
  kSetTamper,           // planner adds a pattern (conflicting with a member if possible)
  kBudgetBlind,         // planner piles on expensive patterns regardless of budgets
  kOutOfCatalog,        // planner names a pattern that does not exist
  kReasonerOutOfCatalog,// reasoner proposes a pattern that does not exist
  kReasonerOversize,    // reasoner returns more than K candidates
  kConstraintAdd,       // constraint agent adds a pattern it was not offered
  kContextGarbage,      // context agent returns a schema-invalid document
  kContextTaxonomy,     // context agent invents a threat label
  kAuditorRubberStamp,  // auditor approves everything
  kTimeout,             // reasoner never answers
  kFlakyTimeout,        // reasoner times out on the first attempt only
};

std::string_view to_string(FaultProfile p);
FaultProfile fault_profile_from_string(std::string_view name);

struct FaultSpec {
  FaultProfile profile = FaultProfile::kOrderSwap;
  std::optional<PatternId> pattern;  // set_tamper: the pattern to add
  double rate = 1.0;                 // fraction of epochs affected
};

// "<profile>[:<pattern>][@<rate>]"
FaultSpec parse_fault_spec(std::string_view text);

// Wraps another backend and corrupts selected responses.
class FaultBackend : public AgentBackend {
 public:
  FaultBackend(std::shared_ptr<AgentBackend> inner, FaultSpec spec, const Catalog& catalog)
      : inner_(std::move(inner)), spec_(std::move(spec)), catalog_(catalog) {}

  nlohmann::json invoke(AgentRole role, const nlohmann::json& request,
                        const CallInfo& call) override;
  std::string name() const override;
  bool simulated() const override { return inner_->simulated(); }
  // Whether the fault fires in the epoch identified by `epoch_seed`.
  bool active(std::uint64_t epoch_seed) const;

 private:
  nlohmann::json tamper_plan(nlohmann::json plan, const nlohmann::json& request) const;

  std::shared_ptr<AgentBackend> inner_;
  FaultSpec spec_;
  const Catalog& catalog_;
};

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  std::string token_env = "ASPO_BACKEND_TOKEN";
  double timeout_s = 30.0;
};

RemoteConfig remote_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RemoteConfig& c);

// One HTTP POST per agent call. The response may be the payload itself or a
// chat-completion document whose first choice carries the payload as text.
class RemoteBackend : public AgentBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  nlohmann::json invoke(AgentRole role, const nlohmann::json& request,
                        const CallInfo& call) override;
  std::string name() const override { return "remote"; }

 private:
  RemoteConfig config_;
  std::string origin_;  // scheme://host:port
  std::string path_;
};

// Extracts the payload document from a raw HTTP response body.
nlohmann::json decode_remote_response(std::string_view body);

// "mock", "remote" or "fault:<spec>" (wrapping the mock backend).
std::shared_ptr<AgentBackend> make_backend(std::string_view selector, const Catalog& catalog,
                                           const RemoteConfig& remote);

}  // namespace aspo
