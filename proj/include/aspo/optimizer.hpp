#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/context.hpp"

namespace aspo {

// Free coefficients of the suitability, cost and score functions.
struct ScoringWeights {
  // Threat coverage, severity, confidence, capability match, evidence alignment.
  std::array<double, 5> alpha = {0.4, 0.2, 0.2, 0.1, 0.1};
  // Per-resource cost weights, indexed by Resource.
  std::array<double, 4> beta = {0.25, 0.25, 0.25, 0.25};
  double eta = 0.1;       // synergy bonus per pair
  double lambda = 1000.0; // conflict penalty per pair
  double epsilon = 1e-6;  // budget division guard
  std::size_t portfolio_bound = 3;  // B
  std::size_t candidate_bound = 5;  // K

  double alpha_sum() const;
  // Throws ConfigError when an invariant is violated (epsilon > 0, lambda > sum(alpha), ...).
  void validate() const;
};

ScoringWeights weights_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoringWeights& w);

struct PatternTerm {
  PatternId id;
  double suitability = 0.0;
  double normalized_cost = 0.0;

  friend bool operator==(const PatternTerm&, const PatternTerm&) = default;
};

struct Portfolio {
  std::vector<PatternId> members;  // sorted by id
  double score = 0.0;
  std::vector<PatternTerm> per_pattern;  // same order as members
  std::size_t subsets_evaluated = 0;

  bool empty() const noexcept { return members.empty(); }
  friend bool operator==(const Portfolio&, const Portfolio&) = default;
};

nlohmann::json to_json(const Portfolio& p);

// |E_p ∩ e| / max(1, |E_p|)
double evidence_alignment(const SecurityPattern& p, const LabelSet& evidence);

double suitability(const SecurityPattern& p, const StructuredContext& s, const ScoringWeights& w);

// sum_r beta_r * q_p^r / max(epsilon, b^r)
double normalized_cost(const SecurityPattern& p, const BudgetVector& b, const ScoringWeights& w);

// Sum of (suitability - cost) plus synergy bonus minus conflict penalty.
// Defined for any subset, including conflicting ones. Throws UnknownPatternError.
double portfolio_score(std::span<const PatternId> portfolio, const StructuredContext& s,
                       const BudgetVector& b, const Catalog& catalog, const ScoringWeights& w);

// Exhaustive constrained argmax over subsets of `feasible` with at most B
// members, excluding conflicting and over-budget subsets. Ties go to the
// smaller subset, then the lexicographically smallest sorted id sequence.
// Throws std::invalid_argument when |feasible| > K, UnknownPatternError on
// ids outside the catalogue.
Portfolio select_portfolio(std::span<const PatternId> feasible, const StructuredContext& s,
                           const BudgetVector& b, const Catalog& catalog, const ScoringWeights& w);

// Topological order of the precedence edges restricted to `members`; ties by ascending id.
std::vector<PatternId> activation_order(std::span<const PatternId> members, const Catalog& catalog);

}  // namespace aspo
