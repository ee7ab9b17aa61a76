#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/resources.hpp"

namespace aspo {

// Raw per-window gateway telemetry.
struct TelemetryVector {
  double packet_rate = 0.0;          // packets/s
  double byte_rate = 0.0;            // bytes/s
  double connection_duration = 0.0;  // s
  double tcp_flag_anomaly = 0.0;     // [0,1]
  double dst_port_entropy = 0.0;     // [0,1]
  double auth_failure_burst = 0.0;   // count per window
  double dns_anomaly = 0.0;          // [0,1]
  double timeout_irregularity = 0.0; // [0,1]
  double cpu_headroom = 0.0;         // [0,1]
  double mem_headroom = 0.0;         // [0,1]
  double latency_budget = 0.0;       // ms
  double energy_budget = 0.0;        // J
  double device_temp = 0.0;          // degrees C
  double load_proxy = 0.0;           // >= 0
  Label threat_label;
  double label_confidence = 0.0;     // [0,1]

  friend bool operator==(const TelemetryVector&, const TelemetryVector&) = default;
};

// Names of the numeric telemetry fields, in declaration order.
const std::vector<std::string_view>& telemetry_fields();
// Numeric field by name; throws std::invalid_argument for unknown names.
double telemetry_field(const TelemetryVector& x, std::string_view name);
double& telemetry_field(TelemetryVector& x, std::string_view name);

nlohmann::json to_json(const TelemetryVector& x);
TelemetryVector telemetry_from_json(const nlohmann::json& j);

// Stable 64-bit FNV-1a digest of the canonical telemetry serialisation, hex encoded.
std::string telemetry_digest(const TelemetryVector& x);

struct StructuredContext {
  Label threat;
  double severity = 0.0;
  double confidence = 0.0;
  BudgetVector budgets;
  Label sla;
  LabelSet evidence;
  LabelSet capabilities;

  friend bool operator==(const StructuredContext&, const StructuredContext&) = default;
};

nlohmann::json to_json(const StructuredContext& s);
// Structural parse only; closed-world checks live with the callers.
StructuredContext context_from_json(const nlohmann::json& j);

struct EvidenceRule {
  std::string feature;
  Label token;
  double threshold = 0.0;  // token emitted when feature value > threshold
};

struct EncoderConfig {
  double flood_packet_rate = 3600.0;
  double flood_byte_rate = 2.5e6;
  std::vector<EvidenceRule> evidence_rules = default_evidence_rules();
  std::size_t evidence_cap = 8;
  LabelSet dos_family = {"dos", "ddos"};
  double degraded_headroom = 0.2;
  double critical_headroom = 0.1;
  // The node's declared capability set.
  LabelSet capabilities;

  static std::vector<EvidenceRule> default_evidence_rules();
};

EncoderConfig encoder_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EncoderConfig& c);

// Tokens for every feature above its threshold, in rule order, truncated at the cap.
LabelSet derive_evidence_tokens(const TelemetryVector& x, const EncoderConfig& config);

// Sanitised budget vector carried by the telemetry (cpu/mem clipped to [0,1],
// unreadable lat/ene budgets read as 0).
BudgetVector budgets_from_telemetry(const TelemetryVector& x);

// Deterministic Monitor/Analyse encoder. Non-finite or out-of-range inputs are
// sanitised so the result always satisfies the context invariants.
// Throws TaxonomyError for a threat label outside the catalogue taxonomy.
StructuredContext encode_context(const TelemetryVector& x, const Catalog& catalog,
                                 const EncoderConfig& config);

// Numeric context fields addressable by perturb_context.
const std::vector<std::string_view>& perturbable_fields();

// Applies per-field offsets (l-infinity bounded by `bound`) and re-clips.
// Throws PerturbationBoundError when an offset exceeds the bound and
// std::invalid_argument for unknown fields.
StructuredContext perturb_context(const StructuredContext& s,
                                  const std::map<std::string, double>& delta, double bound);

// Throws Error describing the first violated invariant.
void check_context_invariants(const StructuredContext& s, const Catalog& catalog,
                              std::size_t evidence_cap);

}  // namespace aspo
