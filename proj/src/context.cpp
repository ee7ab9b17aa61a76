#include "aspo/context.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>

#include "aspo/error.hpp"
#include "json_util.hpp"

namespace aspo {

namespace {

using nlohmann::json;

struct FieldRef {
  std::string_view name;
  double TelemetryVector::*member;
};

constexpr FieldRef kFields[] = {
    {"packet_rate", &TelemetryVector::packet_rate},
    {"byte_rate", &TelemetryVector::byte_rate},
    {"connection_duration", &TelemetryVector::connection_duration},
    {"tcp_flag_anomaly", &TelemetryVector::tcp_flag_anomaly},
    {"dst_port_entropy", &TelemetryVector::dst_port_entropy},
    {"auth_failure_burst", &TelemetryVector::auth_failure_burst},
    {"dns_anomaly", &TelemetryVector::dns_anomaly},
    {"timeout_irregularity", &TelemetryVector::timeout_irregularity},
    {"cpu_headroom", &TelemetryVector::cpu_headroom},
    {"mem_headroom", &TelemetryVector::mem_headroom},
    {"latency_budget", &TelemetryVector::latency_budget},
    {"energy_budget", &TelemetryVector::energy_budget},
    {"device_temp", &TelemetryVector::device_temp},
    {"load_proxy", &TelemetryVector::load_proxy},
    {"label_confidence", &TelemetryVector::label_confidence},
};

const FieldRef& field_ref(std::string_view name) {
  for (const auto& f : kFields) {
    if (f.name == name) return f;
  }
  throw std::invalid_argument("unknown telemetry field: " + std::string(name));
}

// NaN and negatives map to 0; +inf is kept so rate ratios saturate.
double non_negative(double v) {
  if (std::isnan(v) || v < 0.0) return 0.0;
  return v;
}

double unit_interval(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, 1.0);
}

// Budgets must be finite; an unreadable budget is treated as no headroom.
double finite_budget(double v) {
  if (!std::isfinite(v) || v < 0.0) return 0.0;
  return v;
}

double ratio_clipped(double value, double scale) {
  if (scale <= 0.0) return value > 0.0 ? 1.0 : 0.0;
  return std::min(1.0, non_negative(value) / scale);
}

}  // namespace

const std::vector<std::string_view>& telemetry_fields() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> out;
    for (const auto& f : kFields) out.push_back(f.name);
    return out;
  }();
  return names;
}

double telemetry_field(const TelemetryVector& x, std::string_view name) {
  return x.*(field_ref(name).member);
}

double& telemetry_field(TelemetryVector& x, std::string_view name) {
  return x.*(field_ref(name).member);
}

json to_json(const TelemetryVector& x) {
  json j = json::object();
  for (const auto& f : kFields) j[std::string(f.name)] = x.*(f.member);
  j["threat_label"] = x.threat_label;
  return j;
}

TelemetryVector telemetry_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("telemetry: expected an object");
  TelemetryVector x;
  for (const auto& [key, value] : j.items()) {
    if (key == "threat_label") {
      x.threat_label = detail::as_string<ConfigError>(value, "telemetry.threat_label");
      continue;
    }
    const FieldRef* ref = nullptr;
    for (const auto& f : kFields) {
      if (f.name == key) ref = &f;
    }
    if (ref == nullptr) throw ConfigError("telemetry: unknown field '" + key + "'");
    x.*(ref->member) = detail::as_number<ConfigError>(value, "telemetry." + key);
  }
  if (x.threat_label.empty()) throw ConfigError("telemetry: missing threat_label");
  return x;
}

std::string telemetry_digest(const TelemetryVector& x) {
  const std::string canonical = to_json(x).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const StructuredContext& s) {
  return json{{"threat", s.threat},
              {"severity", s.severity},
              {"confidence", s.confidence},
              {"budgets", {{"cpu", s.budgets.cpu}, {"mem", s.budgets.mem},
                           {"lat", s.budgets.lat}, {"ene", s.budgets.ene}}},
              {"sla", s.sla},
              {"evidence", s.evidence},
              {"capabilities", s.capabilities}};
}

StructuredContext context_from_json(const json& j) {
  detail::reject_unknown_keys<SchemaError>(
      j, {"threat", "severity", "confidence", "budgets", "sla", "evidence", "capabilities"},
      "context");
  StructuredContext s;
  s.threat = detail::as_string<SchemaError>(detail::require<SchemaError>(j, "threat", "context"),
                                            "context.threat");
  s.severity = detail::as_number<SchemaError>(
      detail::require<SchemaError>(j, "severity", "context"), "context.severity");
  s.confidence = detail::as_number<SchemaError>(
      detail::require<SchemaError>(j, "confidence", "context"), "context.confidence");
  const auto& b = detail::require<SchemaError>(j, "budgets", "context");
  detail::reject_unknown_keys<SchemaError>(b, {"cpu", "mem", "lat", "ene"}, "context.budgets");
  for (Resource r : kResources) {
    const std::string key(resource_name(r));
    s.budgets[r] = detail::as_number<SchemaError>(detail::require<SchemaError>(b, key, "budgets"),
                                                  "context.budgets." + key);
  }
  s.sla = detail::as_string<SchemaError>(detail::require<SchemaError>(j, "sla", "context"),
                                         "context.sla");
  s.evidence = detail::as_string_set<SchemaError>(
      detail::require<SchemaError>(j, "evidence", "context"), "context.evidence");
  s.capabilities = detail::as_string_set<SchemaError>(
      detail::require<SchemaError>(j, "capabilities", "context"), "context.capabilities");
  return s;
}

std::vector<EvidenceRule> EncoderConfig::default_evidence_rules() {
  return {
      {"packet_rate", "traffic_burst", 2000.0},
      {"byte_rate", "service_saturation", 1.5e6},
      {"connection_duration", "persistent_session", 60.0},
      {"tcp_flag_anomaly", "syn_flood_pattern", 0.5},
      {"dst_port_entropy", "port_sweep", 0.6},
      {"auth_failure_burst", "auth_failure_burst", 5.0},
      {"dns_anomaly", "dns_irregularity", 0.4},
      {"timeout_irregularity", "timeout_instability", 0.4},
  };
}

EncoderConfig encoder_config_from_json(const json& j) {
  detail::reject_unknown_keys<ConfigError>(
      j,
      {"flood_packet_rate", "flood_byte_rate", "evidence_rules", "evidence_cap", "dos_family",
       "degraded_headroom", "critical_headroom", "capabilities"},
      "encoder");
  EncoderConfig c;
  auto num = [&](const char* key, double& out) {
    if (auto it = j.find(key); it != j.end()) {
      out = detail::as_number<ConfigError>(*it, std::string("encoder.") + key);
    }
  };
  num("flood_packet_rate", c.flood_packet_rate);
  num("flood_byte_rate", c.flood_byte_rate);
  num("degraded_headroom", c.degraded_headroom);
  num("critical_headroom", c.critical_headroom);
  if (auto it = j.find("evidence_cap"); it != j.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("encoder.evidence_cap: expected an unsigned integer");
    c.evidence_cap = it->get<std::size_t>();
  }
  if (auto it = j.find("dos_family"); it != j.end()) {
    c.dos_family = detail::as_string_set<ConfigError>(*it, "encoder.dos_family");
  }
  if (auto it = j.find("capabilities"); it != j.end()) {
    c.capabilities = detail::as_string_set<ConfigError>(*it, "encoder.capabilities");
  }
  if (auto it = j.find("evidence_rules"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("encoder.evidence_rules: expected an array");
    c.evidence_rules.clear();
    for (const auto& r : *it) {
      detail::reject_unknown_keys<ConfigError>(r, {"feature", "token", "threshold"},
                                               "encoder.evidence_rules[]");
      EvidenceRule rule;
      rule.feature = detail::as_string<ConfigError>(
          detail::require<ConfigError>(r, "feature", "evidence rule"), "feature");
      (void)field_ref(rule.feature);
      rule.token = detail::as_string<ConfigError>(
          detail::require<ConfigError>(r, "token", "evidence rule"), "token");
      rule.threshold = detail::as_number<ConfigError>(
          detail::require<ConfigError>(r, "threshold", "evidence rule"), "threshold");
      c.evidence_rules.push_back(std::move(rule));
    }
  }
  if (!(c.flood_packet_rate > 0.0) || !(c.flood_byte_rate > 0.0)) {
    throw ConfigError("encoder: flood rates must be positive");
  }
  return c;
}

json to_json(const EncoderConfig& c) {
  json rules = json::array();
  for (const auto& r : c.evidence_rules) {
    rules.push_back({{"feature", r.feature}, {"token", r.token}, {"threshold", r.threshold}});
  }
  return json{{"flood_packet_rate", c.flood_packet_rate},
              {"flood_byte_rate", c.flood_byte_rate},
              {"evidence_rules", rules},
              {"evidence_cap", c.evidence_cap},
              {"dos_family", c.dos_family},
              {"degraded_headroom", c.degraded_headroom},
              {"critical_headroom", c.critical_headroom},
              {"capabilities", c.capabilities}};
}

LabelSet derive_evidence_tokens(const TelemetryVector& x, const EncoderConfig& config) {
  LabelSet out;
  std::size_t emitted = 0;
  for (const auto& rule : config.evidence_rules) {
    if (emitted >= config.evidence_cap) break;
    const double v = telemetry_field(x, rule.feature);
    if (!std::isnan(v) && v > rule.threshold) {
      if (out.insert(rule.token).second) ++emitted;
    }
  }
  return out;
}

BudgetVector budgets_from_telemetry(const TelemetryVector& x) {
  BudgetVector b;
  b.cpu = unit_interval(x.cpu_headroom);
  b.mem = unit_interval(x.mem_headroom);
  b.lat = finite_budget(x.latency_budget);
  b.ene = finite_budget(x.energy_budget);
  return b;
}

StructuredContext encode_context(const TelemetryVector& x, const Catalog& catalog,
                                 const EncoderConfig& config) {
  if (!catalog.threats().contains(x.threat_label)) {
    throw TaxonomyError("threat label '" + x.threat_label + "' is outside the catalogue taxonomy");
  }
  StructuredContext s;
  s.threat = x.threat_label;

  const double packet_intensity = ratio_clipped(x.packet_rate, config.flood_packet_rate);
  if (config.dos_family.contains(x.threat_label)) {
    s.severity = 0.5 * packet_intensity + 0.5 * unit_interval(x.tcp_flag_anomaly);
  } else {
    s.severity = std::max(packet_intensity, ratio_clipped(x.byte_rate, config.flood_byte_rate));
  }
  s.severity = unit_interval(s.severity);
  s.confidence = unit_interval(x.label_confidence);

  s.budgets = budgets_from_telemetry(x);

  const double headroom = std::min(s.budgets.cpu, s.budgets.mem);
  if (headroom < config.critical_headroom) {
    s.sla = "critical";
  } else if (headroom < config.degraded_headroom) {
    s.sla = "degraded";
  } else {
    s.sla = "normal";
  }
  if (!catalog.sla_levels().contains(s.sla)) {
    throw ConfigError("catalogue does not declare SLA level '" + s.sla + "'");
  }

  s.evidence = derive_evidence_tokens(x, config);
  s.capabilities = config.capabilities;
  return s;
}

const std::vector<std::string_view>& perturbable_fields() {
  static const std::vector<std::string_view> names = {
      "severity", "confidence", "budgets.cpu", "budgets.mem", "budgets.lat", "budgets.ene"};
  return names;
}

StructuredContext perturb_context(const StructuredContext& s,
                                  const std::map<std::string, double>& delta, double bound) {
  if (!(bound >= 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("perturbation bound must be finite and non-negative");
  }
  StructuredContext out = s;
  for (const auto& [field, offset] : delta) {
    if (!std::isfinite(offset) || std::abs(offset) > bound) {
      throw PerturbationBoundError("offset on '" + field + "' exceeds the perturbation bound");
    }
    if (field == "severity") {
      out.severity = std::clamp(out.severity + offset, 0.0, 1.0);
    } else if (field == "confidence") {
      out.confidence = std::clamp(out.confidence + offset, 0.0, 1.0);
    } else if (field.starts_with("budgets.")) {
      const auto name = std::string_view(field).substr(8);
      bool matched = false;
      for (Resource r : kResources) {
        if (resource_name(r) == name) {
          out.budgets[r] = std::max(0.0, out.budgets[r] + offset);
          matched = true;
        }
      }
      if (!matched) throw std::invalid_argument("unknown context field: " + field);
    } else {
      throw std::invalid_argument("unknown context field: " + field);
    }
  }
  return out;
}

void check_context_invariants(const StructuredContext& s, const Catalog& catalog,
                              std::size_t evidence_cap) {
  if (!catalog.threats().contains(s.threat)) {
    throw TaxonomyError("context threat '" + s.threat + "' is outside the taxonomy");
  }
  if (!(s.severity >= 0.0 && s.severity <= 1.0)) throw Error("context severity outside [0,1]");
  if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) throw Error("context confidence outside [0,1]");
  if (!s.budgets.valid()) throw Error("context budgets must be finite and non-negative");
  if (!catalog.sla_levels().contains(s.sla)) throw Error("context SLA '" + s.sla + "' is undeclared");
  if (s.evidence.size() > evidence_cap) throw Error("context evidence exceeds the cap");
}

}  // namespace aspo
