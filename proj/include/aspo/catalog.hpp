#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aspo/resources.hpp"

namespace aspo {

using PatternId = std::string;
using Label = std::string;
using LabelSet = std::set<Label>;

// One closed-world mitigation primitive.
struct SecurityPattern {
  PatternId id;
  std::string name;
  LabelSet covered_threats;
  LabelSet required_capabilities;
  CostVector cost;
  LabelSet expected_evidence;
  std::string activation_semantics;
  std::vector<std::string> rollback_triggers;
  // Opaque per-pattern descriptor carried through unchanged; never used in
  // scoring or validation.
  std::string descriptor;
  bool is_baseline = false;
};

// Immutable after construction. All cross-references are resolved to dense
// indices; patterns keep their document order.
class Catalog {
 public:
  struct Pair {
    PatternId a;
    PatternId b;
  };

  struct Document {
    std::vector<SecurityPattern> patterns;
    LabelSet threats;
    LabelSet capabilities;
    std::vector<Pair> conflicts;
    std::vector<Pair> synergies;
    std::vector<Pair> precedence;  // a must activate before b
    LabelSet sla_levels;
  };

  // Validates every invariant; throws CatalogError on the first violation.
  explicit Catalog(Document doc);

  // Builds directly from dense matrices (used by tests and generators).
  // Matrices are row-major m*m and are validated like a parsed document.
  static Catalog from_matrices(std::vector<SecurityPattern> patterns, LabelSet threats,
                               LabelSet capabilities, std::vector<std::uint8_t> conflict,
                               std::vector<std::uint8_t> synergy,
                               std::vector<std::pair<std::size_t, std::size_t>> precedence,
                               LabelSet sla_levels);

  std::size_t size() const noexcept { return patterns_.size(); }
  std::span<const SecurityPattern> patterns() const noexcept { return patterns_; }
  const SecurityPattern& pattern(std::size_t index) const { return patterns_.at(index); }
  const SecurityPattern& pattern(std::string_view id) const;

  bool contains(std::string_view id) const;
  std::optional<std::size_t> find(std::string_view id) const;
  // Throws UnknownPatternError.
  std::size_t index_of(std::string_view id) const;

  bool conflicts(std::size_t i, std::size_t j) const { return conflict_[i * size() + j] != 0; }
  bool synergizes(std::size_t i, std::size_t j) const { return synergy_[i * size() + j] != 0; }
  std::span<const std::pair<std::size_t, std::size_t>> precedence() const noexcept {
    return precedence_;
  }

  const LabelSet& threats() const noexcept { return threats_; }
  const LabelSet& capabilities() const noexcept { return capabilities_; }
  const LabelSet& sla_levels() const noexcept { return sla_levels_; }

  std::vector<PatternId> ids() const;

  // Sorted catalogue indices for a set of ids. Throws UnknownPatternError.
  std::vector<std::size_t> indices_of(std::span<const PatternId> ids) const;

 private:
  Catalog() = default;
  void validate_and_index();

  std::vector<SecurityPattern> patterns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint8_t> conflict_;
  std::vector<std::uint8_t> synergy_;
  std::vector<std::pair<std::size_t, std::size_t>> precedence_;
  LabelSet threats_;
  LabelSet capabilities_;
  LabelSet sla_levels_;
};

// Parses a catalogue document (JSON text). Unknown keys are rejected.
Catalog load_catalog(std::string_view document);
Catalog load_catalog_file(const std::filesystem::path& path);

// Number of unordered conflicting pairs inside the portfolio.
std::size_t conflict_count(std::span<const PatternId> portfolio, const Catalog& catalog);
std::size_t synergy_count(std::span<const PatternId> portfolio, const Catalog& catalog);

// Index-based variants; indices must be distinct and in range.
std::size_t conflict_count(std::span<const std::size_t> members, const Catalog& catalog);
std::size_t synergy_count(std::span<const std::size_t> members, const Catalog& catalog);

// Component-wise sum of pattern costs.
CostVector total_cost(std::span<const std::size_t> members, const Catalog& catalog);

}  // namespace aspo
