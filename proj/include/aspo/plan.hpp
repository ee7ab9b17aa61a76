#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"

namespace aspo {

// Planner output. Ids are not assumed to be catalogue members; the gate checks that.
struct MitigationPlan {
  std::vector<PatternId> selected_patterns;
  std::vector<PatternId> activation_order;
  std::string narrative;

  friend bool operator==(const MitigationPlan&, const MitigationPlan&) = default;
};

struct AuditVerdict {
  bool approved = false;
  std::vector<std::string> issues;

  friend bool operator==(const AuditVerdict&, const AuditVerdict&) = default;
};

nlohmann::json to_json(const MitigationPlan& p);
nlohmann::json to_json(const AuditVerdict& v);

}  // namespace aspo
