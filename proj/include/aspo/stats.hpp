#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"

namespace aspo {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Clopper-Pearson interval. Throws std::invalid_argument unless 0 <= k <= n, n >= 1.
Interval exact_binomial_ci(std::size_t k, std::size_t n, double level = 0.95);

// Two-sided p-value of the 2x2 table [[k1, n1-k1], [k2, n2-k2]], summing every
// table with the observed margins whose point probability is not above the
// observed one. Throws std::invalid_argument for an empty row.
double fisher_exact_two_sided(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2);

// Second group over first; empty when a denominator vanishes.
struct RateRatios {
  std::optional<double> risk_ratio;
  std::optional<double> odds_ratio;
};
RateRatios risk_and_odds_ratio(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2);

struct RareEventComparison {
  std::size_t k1 = 0, n1 = 0, k2 = 0, n2 = 0;
  double rate1 = 0.0, rate2 = 0.0;
  Interval ci1, ci2;
  RateRatios ratios;
  double fisher_p = 1.0;
};
RareEventComparison compare_rates(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2);
nlohmann::json to_json(const RareEventComparison& c);

// Average ranks (1-based) for ties.
std::vector<double> average_ranks(std::span<const double> xs);

// Pearson correlation of average ranks. Throws std::invalid_argument on
// length mismatch, fewer than two points, or a constant input.
double spearman_rank(std::span<const double> xs, std::span<const double> ys);

// sup |F_a - F_b| over the pooled sample. Throws std::invalid_argument on empty input.
double ks_distance(std::span<const double> a, std::span<const double> b);

// Nearest-rank percentiles: the value at rank ceil(q/100 * n), rank >= 1.
std::vector<double> percentiles(std::span<const double> samples, std::span<const double> qs);
double percentile(std::span<const double> samples, double q);

struct Distribution {
  std::size_t n = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};
Distribution describe(std::span<const double> samples);

// Aggregates over a list of trace records (the JSON-lines form).
struct RunSummary {
  std::size_t total = 0;
  std::size_t gate_accept = 0;
  std::size_t gate_reject = 0;
  std::size_t approved = 0;                // gate ok and auditor approved
  std::size_t accept_approved = 0;         // auditor approved among gate accepts
  std::size_t reject_audit_rejected = 0;   // auditor rejected among gate rejects
  std::size_t audit_rejected = 0;          // gate ok, auditor said no
  std::size_t pipeline_failures = 0;       // no gate verdict (agent or encoder failure)
  std::size_t executed = 0;
  std::size_t failsafe = 0;
  std::size_t critical_events = 0;
  std::size_t unsafe_executions = 0;       // independent recheck of executed portfolios

  std::map<std::string, std::size_t> category_counts;  // every issue category on rejected plans
  std::map<std::string, std::size_t> primary_category; // first issue of each rejected plan
  std::map<std::string, std::size_t> failure_kinds;    // "stage/kind"
  std::map<std::string, std::size_t> failsafe_reasons;
  std::map<std::string, std::size_t> pattern_selected; // deterministic portfolio membership
  std::map<std::string, std::size_t> pattern_executed;

  struct ThreatRow {
    std::size_t n = 0;
    std::size_t approved = 0;
  };
  std::map<std::string, ThreatRow> per_threat;

  std::array<std::vector<double>, 5> agent_latency;  // pipeline order
  std::vector<double> latency;
  std::vector<double> energy;
  std::vector<double> power;

  double approval_rate() const;
  Interval approval_ci() const;
};

// With a catalogue, executed portfolios are re-checked for membership,
// conflicts and budgets, and never-selected patterns are listed with zero counts.
RunSummary summarize_run(const std::vector<nlohmann::json>& records,
                         const Catalog* catalog = nullptr);

nlohmann::json to_json(const RunSummary& s);
std::string render_text(const RunSummary& s, const std::string& title);

struct WorkloadComparison {
  RareEventComparison approval;
  std::optional<double> pattern_spearman;
  double latency_ks = 0.0;
  double energy_ks = 0.0;
  std::array<double, 5> agent_ks = {};
};

// First argument is the reference (smaller) workload.
WorkloadComparison compare_runs(const RunSummary& a, const RunSummary& b);
nlohmann::json to_json(const WorkloadComparison& c);
std::string render_text(const WorkloadComparison& c, const std::string& label_a,
                        const std::string& label_b);

}  // namespace aspo
