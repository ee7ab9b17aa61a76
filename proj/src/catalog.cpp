#include "aspo/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "aspo/error.hpp"
#include "json_util.hpp"

namespace aspo {

const char* to_string(CatalogErrorKind kind) {
  switch (kind) {
    case CatalogErrorKind::kSchema: return "schema violation";
    case CatalogErrorKind::kDuplicateId: return "duplicate pattern id";
    case CatalogErrorKind::kUnknownReference: return "unknown reference";
    case CatalogErrorKind::kAsymmetricMatrix: return "asymmetric matrix";
    case CatalogErrorKind::kNonzeroDiagonal: return "nonzero diagonal";
    case CatalogErrorKind::kConflictSynergyOverlap: return "conflict/synergy overlap";
    case CatalogErrorKind::kPrecedenceCycle: return "precedence cycle";
    case CatalogErrorKind::kMissingBaseline: return "missing baseline pattern";
    case CatalogErrorKind::kInvalidCost: return "invalid cost";
  }
  return "catalog error";
}

namespace {

using detail::json;

struct SchemaFail : CatalogError {
  explicit SchemaFail(const std::string& what) : CatalogError(CatalogErrorKind::kSchema, what) {}
};

CostVector parse_cost(const json& j, const std::string& where) {
  detail::reject_unknown_keys<SchemaFail>(j, {"cpu", "mem", "lat", "ene"}, where);
  CostVector c;
  for (Resource r : kResources) {
    const std::string key(resource_name(r));
    c[r] = detail::as_number<SchemaFail>(detail::require<SchemaFail>(j, key, where), where + "." + key);
  }
  return c;
}

SecurityPattern parse_pattern(const json& j, std::size_t pos) {
  const std::string where = "patterns[" + std::to_string(pos) + "]";
  detail::reject_unknown_keys<SchemaFail>(
      j,
      {"id", "name", "covered_threats", "required_capabilities", "cost", "expected_evidence",
       "activation_semantics", "rollback_triggers", "descriptor", "is_baseline"},
      where);
  SecurityPattern p;
  p.id = detail::as_string<SchemaFail>(detail::require<SchemaFail>(j, "id", where), where + ".id");
  if (p.id.empty()) throw SchemaFail(where + ".id: empty identifier");
  p.name = detail::as_string<SchemaFail>(detail::require<SchemaFail>(j, "name", where), where);
  p.covered_threats = detail::as_string_set<SchemaFail>(
      detail::require<SchemaFail>(j, "covered_threats", where), where + ".covered_threats");
  p.required_capabilities = detail::as_string_set<SchemaFail>(
      detail::require<SchemaFail>(j, "required_capabilities", where),
      where + ".required_capabilities");
  p.cost = parse_cost(detail::require<SchemaFail>(j, "cost", where), where + ".cost");
  p.expected_evidence = detail::as_string_set<SchemaFail>(
      detail::require<SchemaFail>(j, "expected_evidence", where), where + ".expected_evidence");
  if (auto it = j.find("activation_semantics"); it != j.end()) {
    p.activation_semantics = detail::as_string<SchemaFail>(*it, where + ".activation_semantics");
  }
  if (auto it = j.find("rollback_triggers"); it != j.end()) {
    p.rollback_triggers = detail::as_string_list<SchemaFail>(*it, where + ".rollback_triggers");
  }
  if (auto it = j.find("descriptor"); it != j.end()) {
    p.descriptor = detail::as_string<SchemaFail>(*it, where + ".descriptor");
  }
  if (auto it = j.find("is_baseline"); it != j.end()) {
    if (!it->is_boolean()) throw SchemaFail(where + ".is_baseline: expected a boolean");
    p.is_baseline = it->get<bool>();
  }
  return p;
}

std::vector<Catalog::Pair> parse_pairs(const json& j, const std::string& where) {
  std::vector<Catalog::Pair> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      throw SchemaFail(where + ": expected [id, id] pairs");
    }
    out.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
  }
  return out;
}

// A matrix-valued entry: array of m arrays of m integers in {0,1}.
bool looks_like_matrix(const json& j) {
  return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_number();
}

std::vector<std::uint8_t> parse_matrix(const json& j, std::size_t m, const std::string& where) {
  if (j.size() != m) throw SchemaFail(where + ": matrix must have one row per pattern");
  std::vector<std::uint8_t> out(m * m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!j[i].is_array() || j[i].size() != m) {
      throw SchemaFail(where + ": row " + std::to_string(i) + " has wrong length");
    }
    for (std::size_t k = 0; k < m; ++k) {
      const auto& v = j[i][k];
      if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
        throw SchemaFail(where + ": entries must be 0 or 1");
      }
      out[i * m + k] = static_cast<std::uint8_t>(v.get<int>());
    }
  }
  return out;
}

}  // namespace

Catalog::Catalog(Document doc) {
  patterns_ = std::move(doc.patterns);
  threats_ = std::move(doc.threats);
  capabilities_ = std::move(doc.capabilities);
  sla_levels_ = std::move(doc.sla_levels);

  // Index first so pair references can be resolved; duplicates caught here.
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    if (!index_.emplace(patterns_[i].id, i).second) {
      throw CatalogError(CatalogErrorKind::kDuplicateId, patterns_[i].id);
    }
  }
  const std::size_t m = patterns_.size();
  auto resolve = [&](const PatternId& id, const char* what) {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw CatalogError(CatalogErrorKind::kUnknownReference,
                         std::string(what) + " references unknown pattern '" + id + "'");
    }
    return it->second;
  };
  conflict_.assign(m * m, 0);
  synergy_.assign(m * m, 0);
  for (const auto& [a, b] : doc.conflicts) {
    const auto i = resolve(a, "conflicts");
    const auto j = resolve(b, "conflicts");
    conflict_[i * m + j] = conflict_[j * m + i] = 1;
  }
  for (const auto& [a, b] : doc.synergies) {
    const auto i = resolve(a, "synergies");
    const auto j = resolve(b, "synergies");
    synergy_[i * m + j] = synergy_[j * m + i] = 1;
  }
  for (const auto& [a, b] : doc.precedence) {
    precedence_.emplace_back(resolve(a, "precedence"), resolve(b, "precedence"));
  }
  index_.clear();
  validate_and_index();
}

Catalog Catalog::from_matrices(std::vector<SecurityPattern> patterns, LabelSet threats,
                               LabelSet capabilities, std::vector<std::uint8_t> conflict,
                               std::vector<std::uint8_t> synergy,
                               std::vector<std::pair<std::size_t, std::size_t>> precedence,
                               LabelSet sla_levels) {
  Catalog c;
  const std::size_t m = patterns.size();
  if (conflict.size() != m * m || synergy.size() != m * m) {
    throw CatalogError(CatalogErrorKind::kSchema, "matrix dimensions do not match pattern count");
  }
  for (const auto& [a, b] : precedence) {
    if (a >= m || b >= m) {
      throw CatalogError(CatalogErrorKind::kUnknownReference, "precedence index out of range");
    }
  }
  c.patterns_ = std::move(patterns);
  c.threats_ = std::move(threats);
  c.capabilities_ = std::move(capabilities);
  c.conflict_ = std::move(conflict);
  c.synergy_ = std::move(synergy);
  c.precedence_ = std::move(precedence);
  c.sla_levels_ = std::move(sla_levels);
  c.validate_and_index();
  return c;
}

void Catalog::validate_and_index() {
  const std::size_t m = patterns_.size();
  if (m == 0) throw CatalogError(CatalogErrorKind::kSchema, "catalogue has no patterns");
  if (sla_levels_.empty()) throw CatalogError(CatalogErrorKind::kSchema, "no SLA levels declared");

  index_.clear();
  for (std::size_t i = 0; i < m; ++i) {
    const auto& p = patterns_[i];
    if (!index_.emplace(p.id, i).second) {
      throw CatalogError(CatalogErrorKind::kDuplicateId, p.id);
    }
    if (!p.cost.valid()) {
      throw CatalogError(CatalogErrorKind::kInvalidCost,
                         p.id + ": cost components must be finite and non-negative");
    }
    for (const auto& t : p.covered_threats) {
      if (!threats_.contains(t)) {
        throw CatalogError(CatalogErrorKind::kUnknownReference,
                           p.id + " covers threat '" + t + "' outside the taxonomy");
      }
    }
    for (const auto& cap : p.required_capabilities) {
      if (!capabilities_.contains(cap)) {
        throw CatalogError(CatalogErrorKind::kUnknownReference,
                           p.id + " requires undeclared capability '" + cap + "'");
      }
    }
  }

  auto check_matrix = [&](const std::vector<std::uint8_t>& mat, const char* name) {
    for (std::size_t i = 0; i < m; ++i) {
      if (mat[i * m + i] != 0) {
        throw CatalogError(CatalogErrorKind::kNonzeroDiagonal,
                           std::string(name) + " matrix at " + patterns_[i].id);
      }
      for (std::size_t j = i + 1; j < m; ++j) {
        if (mat[i * m + j] != mat[j * m + i]) {
          throw CatalogError(CatalogErrorKind::kAsymmetricMatrix,
                             std::string(name) + " matrix at (" + patterns_[i].id + ", " +
                                 patterns_[j].id + ")");
        }
      }
    }
  };
  check_matrix(conflict_, "conflict");
  check_matrix(synergy_, "synergy");

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (conflict_[i * m + j] && synergy_[i * m + j]) {
        throw CatalogError(CatalogErrorKind::kConflictSynergyOverlap,
                           patterns_[i].id + " and " + patterns_[j].id);
      }
    }
  }

  // Kahn's algorithm; any leftover node sits on a cycle.
  std::vector<std::size_t> indegree(m, 0);
  std::vector<std::vector<std::size_t>> out(m);
  for (const auto& [a, b] : precedence_) {
    if (a == b) {
      throw CatalogError(CatalogErrorKind::kPrecedenceCycle, "self-edge on " + patterns_[a].id);
    }
    out[a].push_back(b);
    ++indegree[b];
  }
  std::queue<std::size_t> ready;
  for (std::size_t i = 0; i < m; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto n = ready.front();
    ready.pop();
    ++visited;
    for (auto next : out[n]) {
      if (--indegree[next] == 0) ready.push(next);
    }
  }
  if (visited != m) {
    std::string members;
    for (std::size_t i = 0; i < m; ++i) {
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + patterns_[i].id;
    }
    throw CatalogError(CatalogErrorKind::kPrecedenceCycle, "involving " + members);
  }

  const bool has_baseline = std::any_of(patterns_.begin(), patterns_.end(), [](const auto& p) {
    return p.is_baseline && p.required_capabilities.empty();
  });
  if (!has_baseline) {
    throw CatalogError(CatalogErrorKind::kMissingBaseline,
                       "no baseline pattern without capability preconditions");
  }
}

const SecurityPattern& Catalog::pattern(std::string_view id) const {
  return patterns_[index_of(id)];
}

bool Catalog::contains(std::string_view id) const { return find(id).has_value(); }

std::optional<std::size_t> Catalog::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Catalog::index_of(std::string_view id) const {
  auto idx = find(id);
  if (!idx) throw UnknownPatternError(std::string(id));
  return *idx;
}

std::vector<PatternId> Catalog::ids() const {
  std::vector<PatternId> out;
  out.reserve(patterns_.size());
  for (const auto& p : patterns_) out.push_back(p.id);
  return out;
}

std::vector<std::size_t> Catalog::indices_of(std::span<const PatternId> ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(index_of(id));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Catalog load_catalog(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    throw CatalogError(CatalogErrorKind::kSchema, std::string("unparseable document: ") + e.what());
  }
  detail::reject_unknown_keys<SchemaFail>(j,
                                          {"description", "patterns", "threats", "capabilities",
                                           "conflicts", "synergies", "precedence", "sla_levels"},
                                          "catalogue");
  const auto& jp = detail::require<SchemaFail>(j, "patterns", "catalogue");
  if (!jp.is_array()) throw SchemaFail("patterns: expected an array");

  std::vector<SecurityPattern> patterns;
  for (std::size_t i = 0; i < jp.size(); ++i) patterns.push_back(parse_pattern(jp[i], i));

  auto labels = [&](const char* key) {
    return detail::as_string_set<SchemaFail>(detail::require<SchemaFail>(j, key, "catalogue"), key);
  };
  LabelSet threats = labels("threats");
  LabelSet capabilities = labels("capabilities");
  LabelSet sla = labels("sla_levels");

  auto optional_array = [&](const char* key) -> json {
    auto it = j.find(key);
    if (it == j.end()) return json::array();
    if (!it->is_array()) throw SchemaFail(std::string(key) + ": expected an array");
    return *it;
  };
  const json conflicts = optional_array("conflicts");
  const json synergies = optional_array("synergies");
  const json precedence = optional_array("precedence");

  // Dense matrix form is accepted so asymmetric authoring errors surface as such.
  if (looks_like_matrix(conflicts) || looks_like_matrix(synergies)) {
    const std::size_t m = patterns.size();
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < m; ++i) {
      if (!idx.emplace(patterns[i].id, i).second) {
        throw CatalogError(CatalogErrorKind::kDuplicateId, patterns[i].id);
      }
    }
    auto densify = [&](const json& src, const char* name) {
      if (looks_like_matrix(src)) return parse_matrix(src, m, name);
      std::vector<std::uint8_t> mat(m * m, 0);
      for (const auto& [a, b] : parse_pairs(src, name)) {
        auto ia = idx.find(a), ib = idx.find(b);
        if (ia == idx.end() || ib == idx.end()) {
          throw CatalogError(CatalogErrorKind::kUnknownReference,
                             std::string(name) + " references unknown pattern");
        }
        mat[ia->second * m + ib->second] = mat[ib->second * m + ia->second] = 1;
      }
      return mat;
    };
    auto conflict = densify(conflicts, "conflicts");
    auto synergy = densify(synergies, "synergies");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& [a, b] : parse_pairs(precedence, "precedence")) {
      auto ia = idx.find(a), ib = idx.find(b);
      if (ia == idx.end() || ib == idx.end()) {
        throw CatalogError(CatalogErrorKind::kUnknownReference,
                           "precedence references unknown pattern");
      }
      edges.emplace_back(ia->second, ib->second);
    }
    return Catalog::from_matrices(std::move(patterns), std::move(threats), std::move(capabilities),
                                  std::move(conflict), std::move(synergy), std::move(edges),
                                  std::move(sla));
  }

  Catalog::Document doc;
  doc.patterns = std::move(patterns);
  doc.threats = std::move(threats);
  doc.capabilities = std::move(capabilities);
  doc.sla_levels = std::move(sla);
  doc.conflicts = parse_pairs(conflicts, "conflicts");
  doc.synergies = parse_pairs(synergies, "synergies");
  doc.precedence = parse_pairs(precedence, "precedence");
  return Catalog(std::move(doc));
}

Catalog load_catalog_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open catalogue file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_catalog(ss.str());
}

std::size_t conflict_count(std::span<const std::size_t> members, const Catalog& catalog) {
  std::size_t n = 0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      if (catalog.conflicts(members[a], members[b])) ++n;
    }
  }
  return n;
}

std::size_t synergy_count(std::span<const std::size_t> members, const Catalog& catalog) {
  std::size_t n = 0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      if (catalog.synergizes(members[a], members[b])) ++n;
    }
  }
  return n;
}

std::size_t conflict_count(std::span<const PatternId> portfolio, const Catalog& catalog) {
  const auto idx = catalog.indices_of(portfolio);
  return conflict_count(std::span<const std::size_t>(idx), catalog);
}

std::size_t synergy_count(std::span<const PatternId> portfolio, const Catalog& catalog) {
  const auto idx = catalog.indices_of(portfolio);
  return synergy_count(std::span<const std::size_t>(idx), catalog);
}

CostVector total_cost(std::span<const std::size_t> members, const Catalog& catalog) {
  CostVector sum;
  for (auto i : members) {
    const auto& c = catalog.pattern(i).cost;
    for (Resource r : kResources) sum[r] += c[r];
  }
  return sum;
}

}  // namespace aspo
