#include <doctest.h>

#include <algorithm>
#include <set>

#include "aspo/error.hpp"
#include "aspo/optimizer.hpp"
#include "fixtures.hpp"

using namespace aspo;

namespace {

// Three patterns: pA and pB cover the threat and synergize, pB and pC conflict.
struct ThreePatterns {
  Catalog catalog;
  StructuredContext s;
  BudgetVector b{100, 100, 50, 50};

  ThreePatterns() : catalog(build()) {
    s.threat = "dos";
    s.severity = 0.8;
    s.confidence = 0.9;
    s.sla = "normal";
    s.evidence = {"burst", "syn"};
    s.capabilities = {"packet_filter"};
    s.budgets = b;
  }

  static Catalog build() {
    auto make = [](const char* id, LabelSet threats, CostVector cost, LabelSet evidence) {
      SecurityPattern p;
      p.id = id;
      p.name = id;
      p.covered_threats = std::move(threats);
      p.cost = cost;
      p.expected_evidence = std::move(evidence);
      return p;
    };
    std::vector<SecurityPattern> ps = {
        make("pA", {"dos"}, {0, 10, 10, 5}, {"burst", "syn"}),
        make("pB", {"dos"}, {30, 20, 5, 5}, {"burst", "syn"}),
        make("pC", {"botnet"}, {5, 5, 2, 2}, {"port_sweep"}),
    };
    ps[0].is_baseline = true;
    std::vector<std::uint8_t> conflict = {0, 0, 0, 0, 0, 1, 0, 1, 0};
    std::vector<std::uint8_t> synergy = {0, 1, 0, 1, 0, 0, 0, 0, 0};
    return Catalog::from_matrices(std::move(ps), {"dos", "botnet"}, {"packet_filter"}, conflict,
                                  synergy, {}, {"normal", "degraded", "critical"});
  }
};

}  // namespace

TEST_CASE("evidence alignment ratio") {
  SecurityPattern p;
  p.expected_evidence = {"burst", "syn"};
  CHECK(evidence_alignment(p, {"burst", "syn"}) == 1.0);
  CHECK(evidence_alignment(p, {"burst"}) == 0.5);
  CHECK(evidence_alignment(p, {}) == 0.0);
  p.expected_evidence.clear();
  CHECK(evidence_alignment(p, {"burst", "syn"}) == 0.0);
}

TEST_CASE("hand-evaluated suitability, cost and score") {
  ThreePatterns t;
  const ScoringWeights w;
  CHECK(suitability(t.catalog.pattern("pA"), t.s, w) == doctest::Approx(0.4 + 0.16 + 0.18 + 0.1 + 0.1));
  CHECK(suitability(t.catalog.pattern("pC"), t.s, w) == doctest::Approx(0.16 + 0.18 + 0.1));
  CHECK(normalized_cost(t.catalog.pattern("pA"), t.b, w) == doctest::Approx(0.1));
  CHECK(normalized_cost(t.catalog.pattern("pB"), t.b, w) == doctest::Approx(0.175));

  StructuredContext zero = t.s;
  zero.severity = zero.confidence = 0.0;
  zero.capabilities.clear();
  zero.evidence.clear();
  zero.threat = "benign";
  SecurityPattern needy = t.catalog.pattern("pA");
  needy.required_capabilities = {"packet_filter"};
  CHECK(suitability(needy, zero, w) == 0.0);

  SecurityPattern free_pattern;
  CHECK(normalized_cost(free_pattern, t.b, w) == 0.0);

  const std::vector<PatternId> ab = {"pA", "pB"}, bc = {"pB", "pC"}, none;
  CHECK(portfolio_score(ab, t.s, t.b, t.catalog, w) == doctest::Approx(0.84 + 0.765 + 0.1));
  CHECK(portfolio_score(none, t.s, t.b, t.catalog, w) == 0.0);
  CHECK(portfolio_score(bc, t.s, t.b, t.catalog, w) == doctest::Approx(0.765 + 0.395 - 1000.0));
}

TEST_CASE("selection on the three-pattern catalogue") {
  ThreePatterns t;
  const ScoringWeights w;
  const std::vector<PatternId> all = {"pA", "pB", "pC"};
  auto y = select_portfolio(all, t.s, t.b, t.catalog, w);
  CHECK(y.members == std::vector<PatternId>{"pA", "pB"});
  CHECK(y.score == doctest::Approx(1.705));
  CHECK(y.subsets_evaluated >= 7);

  const std::vector<PatternId> none;
  y = select_portfolio(none, t.s, t.b, t.catalog, w);
  CHECK(y.empty());
  CHECK(y.score == 0.0);

  BudgetVector tight = t.b;
  tight.cpu = 25;
  const std::vector<PatternId> ab = {"pA", "pB"};
  y = select_portfolio(ab, t.s, tight, t.catalog, w);
  CHECK(y.members == std::vector<PatternId>{"pA"});
  CHECK(y.score == doctest::Approx(0.84));
}

TEST_CASE("selection rejects oversized feasible sets and unknown ids") {
  const auto& c = testing::default_catalog();
  ScoringWeights w;
  w.candidate_bound = 2;
  StructuredContext s;
  s.threat = "dos";
  s.sla = "normal";
  const std::vector<PatternId> three = {"P01", "P03", "P07"};
  CHECK_THROWS_AS(select_portfolio(three, s, {1, 1, 100, 100}, c, w), std::invalid_argument);
  const std::vector<PatternId> bad = {"P99"};
  CHECK_THROWS_AS(select_portfolio(bad, s, {1, 1, 100, 100}, c, ScoringWeights{}), UnknownPatternError);
}

TEST_CASE("ties go to the smaller then lexicographically smaller subset") {
  // Two identical zero-value patterns and a zero-value baseline: the empty
  // portfolio ties with everything and wins on cardinality.
  SecurityPattern a, b;
  a.id = "A";
  b.id = "B";
  a.is_baseline = true;
  auto cat = Catalog::from_matrices({a, b}, {"dos"}, {}, {0, 0, 0, 0}, {0, 0, 0, 0}, {}, {"normal"});
  StructuredContext s;
  s.threat = "botnet";
  ScoringWeights w;
  w.alpha = {0, 0, 0, 0, 0};
  const std::vector<PatternId> both = {"B", "A"};
  CHECK(select_portfolio(both, s, {1, 1, 1, 1}, cat, w).members.empty());

  // With identical positive values, the lexicographically smaller singleton wins when B = 1.
  w.alpha = {0, 0, 0, 1, 0};
  w.portfolio_bound = 1;
  CHECK(select_portfolio(both, s, {1, 1, 1, 1}, cat, w).members == std::vector<PatternId>{"A"});
}

TEST_CASE("selection matches the brute-force enumerator on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto catalog = testing::random_catalog(rng, 4 + rng.below(7));
    const auto s = testing::random_context(rng, catalog);
    ScoringWeights w;
    w.portfolio_bound = 1 + rng.below(4);
    w.candidate_bound = 8;
    const auto feasible = testing::random_feasible(rng, catalog, 8);
    const auto y = select_portfolio(feasible, s, s.budgets, catalog, w);
    const auto oracle = testing::brute_force_select(feasible, s, s.budgets, catalog, w);
    REQUIRE(y.members == oracle.members);
    CHECK(y.score == doctest::Approx(oracle.score).epsilon(1e-9));
  }
}

TEST_CASE("selected portfolios are safe, bounded and deterministic") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto catalog = testing::random_catalog(rng, 2 + rng.below(9));
    const auto s = testing::random_context(rng, catalog);
    ScoringWeights w;
    w.candidate_bound = 10;
    const auto feasible = testing::random_feasible(rng, catalog, 10);
    const auto y = select_portfolio(feasible, s, s.budgets, catalog, w);
    CHECK(y.members.size() <= w.portfolio_bound);
    CHECK(std::is_sorted(y.members.begin(), y.members.end()));
    for (const auto& id : y.members) {
      CHECK(std::find(feasible.begin(), feasible.end(), id) != feasible.end());
    }
    CHECK(conflict_count(y.members, catalog) == 0);
    const auto idx = catalog.indices_of(y.members);
    CHECK(fits(total_cost(idx, catalog), s.budgets));
    CHECK(y.score >= 0.0);
    CHECK(y.score <= static_cast<double>(w.portfolio_bound) * w.alpha_sum() + w.eta * 3.0 + 1e-12);
    CHECK(select_portfolio(feasible, s, s.budgets, catalog, w) == y);
  }
}

TEST_CASE("activation order") {
  const auto& c = testing::default_catalog();
  const std::vector<PatternId> seg_black = {"P07", "P03"};
  CHECK(activation_order(seg_black, c) == std::vector<PatternId>{"P03", "P07"});
  const std::vector<PatternId> single = {"P05"};
  CHECK(activation_order(single, c) == std::vector<PatternId>{"P05"});
  const std::vector<PatternId> free_pair = {"P05", "P01"};
  CHECK(activation_order(free_pair, c) == std::vector<PatternId>{"P01", "P05"});
  const std::vector<PatternId> none;
  CHECK(activation_order(none, c).empty());
}

TEST_CASE("activation order is the smallest valid topological order") {
  Rng rng(404);
  for (int trial = 0; trial < 500; ++trial) {
    const auto catalog = testing::random_catalog(rng, 3 + rng.below(6));
    auto members = testing::random_feasible(rng, catalog, 6);
    const auto order = activation_order(members, catalog);

    std::sort(members.begin(), members.end());
    std::optional<std::vector<PatternId>> smallest;
    do {
      bool valid = true;
      for (const auto& [a, b] : catalog.precedence()) {
        auto pa = std::find(members.begin(), members.end(), catalog.pattern(a).id);
        auto pb = std::find(members.begin(), members.end(), catalog.pattern(b).id);
        if (pa != members.end() && pb != members.end() && pa > pb) valid = false;
      }
      if (valid) {
        smallest = members;
        break;
      }
    } while (std::next_permutation(members.begin(), members.end()));
    REQUIRE(smallest.has_value());
    CHECK(order == *smallest);
  }
}

TEST_CASE("weights validation and JSON round trip") {
  ScoringWeights w;
  CHECK_NOTHROW(w.validate());
  CHECK(weights_from_json(to_json(w)).alpha == w.alpha);
  auto bad = w;
  bad.lambda = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = w;
  bad.epsilon = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = w;
  bad.portfolio_bound = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(weights_from_json({{"gamma", 1}}), ConfigError);
}
