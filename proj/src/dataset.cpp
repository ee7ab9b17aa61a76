#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "aspo/engine.hpp"
#include "aspo/error.hpp"

namespace aspo {

namespace {

constexpr std::string_view kRequired[] = {
    "packet_rate", "byte_rate", "connection_duration", "tcp_flag_anomaly",
    "dst_port_entropy", "auth_failure_burst", "dns_anomaly", "timeout_irregularity",
    "label_confidence"};

// Columns a flow export may lack; the gateway then reports these values.
const std::map<std::string_view, double>& resource_defaults() {
  static const std::map<std::string_view, double> d = {
      {"cpu_headroom", 0.6}, {"mem_headroom", 0.7}, {"latency_budget", 100.0},
      {"energy_budget", 70.0}, {"device_temp", 41.0}, {"load_proxy", 0.6}};
  return d;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

double parse_number(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects "inf"/"nan" spellings some exporters use; strtod accepts them.
    std::string copy(text);
    char* stop = nullptr;
    v = std::strtod(copy.c_str(), &stop);
    if (copy.empty() || stop != copy.c_str() + copy.size()) {
      throw DatasetError(where + ": not a number: '" + copy + "'");
    }
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<TelemetryVector> load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) throw DatasetError(path.string() + ": empty file");
  const auto header = split(header_line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(std::string(header[i]), i);

  for (auto name : kRequired) {
    if (!column.contains(std::string(name))) {
      throw DatasetError(path.string() + ": missing column " + std::string(name));
    }
  }
  if (!column.contains("threat_label")) throw DatasetError(path.string() + ": missing column threat_label");

  std::vector<std::pair<std::string_view, std::size_t>> numeric;
  for (auto name : telemetry_fields()) {
    if (auto it = column.find(std::string(name)); it != column.end()) numeric.emplace_back(name, it->second);
  }
  const std::size_t label_col = column.at("threat_label");

  std::vector<TelemetryVector> rows;
  std::string line;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    const std::string where = path.string() + ":" + std::to_string(number);
    if (cells.size() != header.size()) {
      throw DatasetError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                         std::to_string(cells.size()));
    }
    TelemetryVector x;
    for (const auto& [name, value] : resource_defaults()) telemetry_field(x, name) = value;
    for (const auto& [name, col] : numeric) {
      telemetry_field(x, name) = parse_number(cells[col], where + " " + std::string(name));
    }
    x.threat_label = std::string(cells[label_col]);
    if (x.threat_label.empty()) throw DatasetError(where + ": empty threat_label");
    rows.push_back(std::move(x));
  }
  return rows;
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<TelemetryVector>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset " + path.string());
  const auto& fields = telemetry_fields();
  for (auto f : fields) out << f << ',';
  out << "threat_label\n";
  for (const auto& x : rows) {
    for (auto f : fields) out << format_number(telemetry_field(x, f)) << ',';
    out << x.threat_label << '\n';
  }
}

namespace {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ClassProfile {
  Range packet_rate, byte_rate, duration, tcp_flag, port_entropy, auth, dns, timeout;
};

const std::map<std::string, ClassProfile>& profiles() {
  static const std::map<std::string, ClassProfile> p = {
      {"benign", {{50, 600}, {2e4, 4e5}, {1, 40}, {0.0, 0.2}, {0.05, 0.3}, {0, 2}, {0.0, 0.2}, {0.0, 0.2}}},
      {"dos", {{2400, 4600}, {1.2e6, 2.6e6}, {2, 30}, {0.45, 0.95}, {0.05, 0.3}, {0, 2}, {0.0, 0.3}, {0.1, 0.5}}},
      {"ddos", {{3000, 6500}, {1.8e6, 3.6e6}, {2, 40}, {0.35, 0.9}, {0.1, 0.45}, {0, 2}, {0.1, 0.5}, {0.2, 0.6}}},
      {"botnet", {{300, 1800}, {2e5, 9e5}, {50, 320}, {0.05, 0.4}, {0.1, 0.5}, {0, 4}, {0.35, 0.85}, {0.3, 0.7}}},
      {"bruteforce", {{100, 900}, {5e4, 4e5}, {10, 120}, {0.05, 0.35}, {0.05, 0.35}, {4, 30}, {0.0, 0.3}, {0.1, 0.45}}},
      {"portscan", {{500, 2600}, {1e5, 6e5}, {0.5, 10}, {0.2, 0.6}, {0.55, 0.98}, {0, 3}, {0.05, 0.4}, {0.35, 0.85}}},
  };
  return p;
}

}  // namespace

std::vector<TelemetryVector> synthesize_dataset(const std::vector<Label>& classes,
                                                std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TelemetryVector> rows;
  rows.reserve(classes.size() * per_class);
  for (const auto& label : classes) {
    auto it = profiles().find(label);
    if (it == profiles().end()) throw DatasetError("no synthetic profile for class " + label);
    const auto& p = it->second;
    auto draw = [&](Range r) { return rng.uniform(r.lo, r.hi); };
    for (std::size_t i = 0; i < per_class; ++i) {
      TelemetryVector x;
      x.packet_rate = draw(p.packet_rate);
      x.byte_rate = draw(p.byte_rate);
      x.connection_duration = draw(p.duration);
      x.tcp_flag_anomaly = draw(p.tcp_flag);
      x.dst_port_entropy = draw(p.port_entropy);
      x.auth_failure_burst = std::floor(draw(p.auth));
      x.dns_anomaly = draw(p.dns);
      x.timeout_irregularity = draw(p.timeout);
      x.cpu_headroom = rng.uniform(0.3, 0.85);
      x.mem_headroom = rng.uniform(0.35, 0.9);
      x.latency_budget = rng.uniform(60.0, 140.0);
      x.energy_budget = rng.uniform(40.0, 110.0);
      x.device_temp = 41.0 + 1.5 * rng.normal();
      x.load_proxy = std::clamp(0.6 + 0.12 * rng.normal(), 0.0, 2.0);
      x.threat_label = label;
      x.label_confidence = rng.uniform(0.75, 0.99);
      rows.push_back(std::move(x));
    }
  }
  return rows;
}

}  // namespace aspo
