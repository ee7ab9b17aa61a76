#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <thread>

#include <httplib.h>

#include "aspo/agents.hpp"
#include "fixtures.hpp"

using namespace aspo;
using nlohmann::json;

namespace {

StructuredContext worked_dos_context() {
  EncoderConfig e;
  e.capabilities = {"packet_filter", "vlan_control"};
  return encode_context(testing::worked_dos(), testing::default_catalog(), e);
}

// Backend answering from a callback, counting calls.
class ScriptedBackend : public AgentBackend {
 public:
  using Script = std::function<json(AgentRole, const json&, const CallInfo&)>;
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
  json invoke(AgentRole role, const json& request, const CallInfo& call) override {
    ++calls;
    return script_(role, request, call);
  }
  std::string name() const override { return "scripted"; }
  int calls = 0;

 private:
  Script script_;
};

CallInfo call_for(std::uint64_t seed) {
  CallInfo c;
  c.seed = seed;
  c.epoch_seed = seed;
  c.node = "node-02";
  return c;
}

AgentStageFailure expect_failure(const std::function<void()>& f) {
  try {
    f();
  } catch (const AgentStageFailure& e) {
    return e;
  }
  FAIL("stage did not fail");
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("response schemas accept well-formed and reject malformed documents") {
  for (auto role : kAgentRoles) CHECK(response_schema(role).is_object());
  const auto& ctx = response_schema(AgentRole::kContext);
  json good{{"context", to_json(worked_dos_context())}, {"status", "PASS"}};
  CHECK_FALSE(schema_violation(ctx, good).has_value());

  auto bad = good;
  bad["context"]["severity"] = 1.5;
  CHECK(schema_violation(ctx, bad).has_value());
  bad = good;
  bad["status"] = "MAYBE";
  CHECK(schema_violation(ctx, bad).has_value());
  bad = good;
  bad["extra"] = true;
  CHECK(schema_violation(ctx, bad).has_value());
  bad = good;
  bad["context"].erase("budgets");
  CHECK(schema_violation(ctx, bad).has_value());
  bad = good;
  bad["context"]["budgets"]["cpu"] = "lots";
  CHECK(schema_violation(ctx, bad).has_value());

  const auto& constraint = response_schema(AgentRole::kConstraint);
  CHECK_FALSE(schema_violation(constraint, {{"feasible", {"P01"}}, {"rejected", json::array()}}));
  CHECK(schema_violation(constraint, {{"feasible", {"P01", "P01"}}, {"rejected", json::array()}}));

  const auto& auditor = response_schema(AgentRole::kAuditor);
  CHECK_FALSE(schema_violation(auditor, {{"approved", true}, {"issues", json::array()}}));
  CHECK(schema_violation(auditor, {{"approved", "yes"}, {"issues", json::array()}}));
  CHECK(schema_violation(auditor, json::array()));
}

TEST_CASE("validator rejects schema keywords it does not implement") {
  json schema{{"type", "object"}, {"patternProperties", json::object()}};
  CHECK_THROWS_AS(schema_violation(schema, json::object()), std::invalid_argument);
}

TEST_CASE("mock context agent is the identity") {
  const auto s = worked_dos_context();
  MockBackend mock(testing::default_catalog());
  const auto r = run_context_agent(s, testing::default_catalog(), mock, call_for(1));
  CHECK(r.value == s);
  CHECK(r.message.payload["status"] == "PASS");
  CHECK(r.message.attempts == 1);
  CHECK(r.message.agent == AgentRole::kContext);
}

TEST_CASE("out of taxonomy threat from the context agent is a schema failure after one retry") {
  ScriptedBackend backend([](AgentRole, const json& req, const CallInfo&) {
    json ctx = req.at("context");
    ctx["threat"] = "alien_invasion";
    return json{{"context", ctx}, {"status", "PASS"}};
  });
  const auto f = expect_failure(
      [&] { run_context_agent(worked_dos_context(), testing::default_catalog(), backend, call_for(1)); });
  CHECK(f.kind() == "schema");
  CHECK(f.attempts() == 2);
  CHECK(backend.calls == 2);
}

TEST_CASE("mock reasoner proposes the worked DoS candidates") {
  MockBackend mock(testing::default_catalog());
  const ScoringWeights w;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_reasoner(worked_dos_context(), testing::default_catalog(), w, mock, call_for(seed));
    const auto ids = r.value.ids();
    CHECK(ids.size() <= w.candidate_bound);
    for (const char* id : {"P01", "P03", "P07"}) {
      CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
    }
  }
}

TEST_CASE("reasoner output stays within K valid ids for a featureless context") {
  StructuredContext s;
  s.threat = "benign";
  s.sla = "critical";
  MockBackend mock(testing::default_catalog());
  ScoringWeights w;
  w.candidate_bound = 4;
  const auto r = run_reasoner(s, testing::default_catalog(), w, mock, call_for(3));
  CHECK(r.value.candidates.size() <= 4);
  CHECK_FALSE(r.value.candidates.empty());
  for (const auto& c : r.value.candidates) CHECK(testing::default_catalog().contains(c.id));
}

TEST_CASE("reasoner naming an unknown pattern fails closed-world without retry") {
  ScriptedBackend backend([](AgentRole, const json&, const CallInfo&) {
    return json{{"candidates", {{{"pattern_id", "P99"}, {"rationale", "trust me"}}}}};
  });
  const auto f = expect_failure([&] {
    run_reasoner(worked_dos_context(), testing::default_catalog(), ScoringWeights{}, backend, call_for(1));
  });
  CHECK(f.kind() == "closed_world");
  CHECK(f.attempts() == 1);
  CHECK(backend.calls == 1);
}

TEST_CASE("constraint stage removes candidates missing a capability") {
  const auto s = worked_dos_context();
  MockBackend mock(testing::default_catalog());
  CandidateSet cands{{{"P07", ""}, {"P03", ""}, {"P08", ""}, {"P01", ""}}};
  const auto r = filter_feasible(cands, s, testing::default_catalog(), mock, call_for(1));
  CHECK(r.value == std::vector<PatternId>{"P07", "P03", "P01"});
  CHECK(r.message.payload["rejected"][0]["pattern_id"] == "P08");

  auto full = s;
  full.capabilities = testing::default_catalog().capabilities();
  CandidateSet capfree{{{"P01", ""}}};
  CHECK(filter_feasible(capfree, full, testing::default_catalog(), mock, call_for(1)).value ==
        std::vector<PatternId>{"P01"});
}

TEST_CASE("constraint filter is re-applied when the backend is too permissive") {
  ScriptedBackend backend([](AgentRole, const json& req, const CallInfo&) {
    return json{{"feasible", req.at("candidates")}, {"rejected", json::array()}};
  });
  CandidateSet cands{{{"P08", ""}, {"P07", ""}}};
  const auto r = filter_feasible(cands, worked_dos_context(), testing::default_catalog(), backend, call_for(1));
  CHECK(r.value == std::vector<PatternId>{"P07"});
}

TEST_CASE("constraint agent adding a pattern is a contract violation") {
  const auto& c = testing::default_catalog();
  auto fault = std::make_shared<FaultBackend>(std::make_shared<MockBackend>(c),
                                              parse_fault_spec("constraint_add"), c);
  CandidateSet cands{{{"P07", ""}, {"P03", ""}}};
  const auto f = expect_failure([&] { filter_feasible(cands, worked_dos_context(), c, *fault, call_for(1)); });
  CHECK(f.kind() == "contract");
}

TEST_CASE("planner pass-through and planner faults") {
  const auto& c = testing::default_catalog();
  Portfolio y;
  y.members = {"P03", "P07"};
  const std::vector<PatternId> order = {"P03", "P07"};
  MockBackend mock(c);
  auto plan = run_planner(worked_dos_context(), y, order, c, mock, call_for(1)).value;
  CHECK(plan.selected_patterns == y.members);
  CHECK(plan.activation_order == order);
  CHECK(plan.narrative.find("Security Segmentation") != std::string::npos);

  FaultBackend swap(std::make_shared<MockBackend>(c), parse_fault_spec("order_swap"), c);
  plan = run_planner(worked_dos_context(), y, order, c, swap, call_for(1)).value;
  CHECK(plan.activation_order == std::vector<PatternId>{"P07", "P03"});

  FaultBackend add(std::make_shared<MockBackend>(c), parse_fault_spec("set_tamper:P05"), c);
  plan = run_planner(worked_dos_context(), y, order, c, add, call_for(1)).value;
  CHECK(std::find(plan.selected_patterns.begin(), plan.selected_patterns.end(), "P05") !=
        plan.selected_patterns.end());

  FaultBackend oob(std::make_shared<MockBackend>(c), parse_fault_spec("out_of_catalog"), c);
  plan = run_planner(worked_dos_context(), y, order, c, oob, call_for(1)).value;
  CHECK(std::find(plan.selected_patterns.begin(), plan.selected_patterns.end(), "P99") !=
        plan.selected_patterns.end());
}

TEST_CASE("auditor verdicts") {
  const auto& c = testing::default_catalog();
  MockBackend mock(c);
  MitigationPlan plan{{"P03", "P07"}, {"P03", "P07"}, ""};
  CHECK(run_auditor(worked_dos_context(), plan, {}, mock, call_for(1)).value.approved);
  const auto v = run_auditor(worked_dos_context(), plan, {"activation_order mismatch"}, mock, call_for(1)).value;
  CHECK_FALSE(v.approved);

  FaultBackend stamp(std::make_shared<MockBackend>(c), parse_fault_spec("auditor_rubberstamp"), c);
  CHECK(run_auditor(worked_dos_context(), plan, {"conflict: P06 conflicts with P07"}, stamp, call_for(1))
            .value.approved);
}

TEST_CASE("timeouts are retried once") {
  const auto& c = testing::default_catalog();
  FaultBackend flaky(std::make_shared<MockBackend>(c), parse_fault_spec("flaky_timeout"), c);
  const auto r = run_reasoner(worked_dos_context(), c, ScoringWeights{}, flaky, call_for(1));
  CHECK(r.message.attempts == 2);

  FaultBackend dead(std::make_shared<MockBackend>(c), parse_fault_spec("timeout"), c);
  const auto f = expect_failure([&] { run_reasoner(worked_dos_context(), c, ScoringWeights{}, dead, call_for(1)); });
  CHECK(f.kind() == "timeout");
  CHECK(f.attempts() == 2);
}

TEST_CASE("fault spec parsing") {
  auto s = parse_fault_spec("set_tamper:P05@0.25");
  CHECK(s.profile == FaultProfile::kSetTamper);
  CHECK(s.pattern == std::optional<PatternId>("P05"));
  CHECK(s.rate == 0.25);
  s = parse_fault_spec("order_swap");
  CHECK(s.rate == 1.0);
  CHECK_FALSE(s.pattern.has_value());
  CHECK_THROWS(parse_fault_spec("gremlins"));
  CHECK_THROWS(parse_fault_spec("order_swap@1.5"));
}

TEST_CASE("fault firing rate is seeded per epoch") {
  const auto& c = testing::default_catalog();
  FaultBackend half(std::make_shared<MockBackend>(c), parse_fault_spec("order_swap@0.5"), c);
  int fired = 0;
  for (std::uint64_t e = 0; e < 2000; ++e) {
    const auto seed = mix_seed(1, e);
    CHECK(half.active(seed) == half.active(seed));
    fired += half.active(seed);
  }
  CHECK(fired > 900);
  CHECK(fired < 1100);
}

TEST_CASE("backend selector") {
  const auto& c = testing::default_catalog();
  CHECK(make_backend("mock", c, {})->name() == "mock");
  CHECK(make_backend("fault:order_swap", c, {})->simulated());
  CHECK_THROWS(make_backend("oracle", c, {}));
  CHECK_THROWS_AS(make_backend("remote", c, RemoteConfig{"ftp://x", "m"}), ConfigError);
}

TEST_CASE("remote reply decoding") {
  CHECK(decode_remote_response(R"({"approved": true, "issues": []})")["approved"] == true);
  const std::string chat =
      R"({"choices":[{"message":{"role":"assistant","content":"```json\n{\"approved\": false, \"issues\": []}\n```"}}]})";
  CHECK(decode_remote_response(chat)["approved"] == false);
  CHECK_THROWS_AS(decode_remote_response("not json"), SchemaError);
  CHECK_THROWS_AS(decode_remote_response(R"({"choices":[]})"), SchemaError);
  CHECK_THROWS_AS(decode_remote_response(R"({"choices":[{"message":{"content":"hello"}}]})"), SchemaError);
}

TEST_CASE("remote backend against a local chat endpoint echoing the context") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string auth_seen;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    auth_seen = req.get_header_value("Authorization");
    const auto body = json::parse(req.body);
    const auto request = json::parse(body["messages"][1]["content"].get<std::string>());
    const json payload{{"context", request.at("context")}, {"status", "PASS"}};
    const json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", payload.dump()}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("ASPO_TEST_TOKEN", "s3cret", 1);
  RemoteConfig config{"http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "test-model",
                      "ASPO_TEST_TOKEN", 5.0};
  RemoteBackend remote(config);
  const auto s = worked_dos_context();
  const auto r = run_context_agent(s, testing::default_catalog(), remote, call_for(1));
  CHECK(r.value == s);
  CHECK(r.message.payload["status"] == "PASS");
  CHECK(hits == 1);
  CHECK(auth_seen == "Bearer s3cret");

  server.stop();
  worker.join();

  // Nobody listens any more: transport failure is treated as a timeout and retried.
  const auto f = expect_failure([&] { run_context_agent(s, testing::default_catalog(), remote, call_for(1)); });
  CHECK(f.kind() == "timeout");
  CHECK(f.attempts() == 2);
}
