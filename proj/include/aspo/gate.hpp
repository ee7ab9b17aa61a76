#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/optimizer.hpp"
#include "aspo/plan.hpp"

namespace aspo {

// Listed in the order the gate evaluates them.
enum class IssueCategory {
  kCatalogMembership,
  kSetMismatch,
  kActivationOrderMismatch,
  kConflict,
  kResourceFeasibility,
};

inline constexpr IssueCategory kIssueCategories[] = {
    IssueCategory::kCatalogMembership, IssueCategory::kSetMismatch,
    IssueCategory::kActivationOrderMismatch, IssueCategory::kConflict,
    IssueCategory::kResourceFeasibility};

std::string_view to_string(IssueCategory c);
std::optional<IssueCategory> issue_category_from_string(std::string_view s);

struct GateIssue {
  IssueCategory category;
  std::string detail;

  friend bool operator==(const GateIssue&, const GateIssue&) = default;
};

struct GateVerdict {
  bool ok = true;  // true iff issues is empty
  std::vector<GateIssue> issues;

  // "category: detail" strings, the form handed to the auditor.
  std::vector<std::string> issue_strings() const;
  friend bool operator==(const GateVerdict&, const GateVerdict&) = default;
};

nlohmann::json to_json(const GateVerdict& v);

// Runs every check without short-circuiting: catalogue membership, set
// consistency with the deterministic portfolio, exact activation order,
// conflict freedom, component-wise budget feasibility.
GateVerdict validate_plan(const MitigationPlan& plan, const Portfolio& deterministic,
                          std::span<const PatternId> deterministic_order, const BudgetVector& b,
                          const Catalog& catalog);

struct FailsafeResult {
  Portfolio portfolio;
  std::vector<PatternId> order;
  // Set when no baseline pattern fits the budgets and the portfolio is empty.
  std::optional<std::string> critical_event;
};

// Cheapest capability-free baseline pattern that fits the budgets (cost
// measured as the sum of budget-normalised components), ties by lower id.
FailsafeResult failsafe_portfolio(const Catalog& catalog, const BudgetVector& b);

}  // namespace aspo
