#include "aspo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "aspo/resources.hpp"

namespace aspo {

using nlohmann::json;

Interval exact_binomial_ci(std::size_t k, std::size_t n, double level) {
  if (n == 0 || k > n) throw std::invalid_argument("binomial interval needs 0 <= k <= n and n >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0,1)");
  const double alpha = 1.0 - level;
  const auto kd = static_cast<double>(k);
  const auto nd = static_cast<double>(n);
  Interval ci;
  ci.lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, alpha / 2.0);
  ci.hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - alpha / 2.0);
  return ci;
}

namespace {

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

double fisher_exact_two_sided(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  if (k1 > n1 || k2 > n2) throw std::invalid_argument("fisher: counts exceed group sizes");
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("fisher: degenerate margins (empty group)");
  const std::size_t n = n1 + n2;
  const std::size_t successes = k1 + k2;
  // k1 ~ hypergeometric(n, successes, n1)
  const std::size_t lo = successes > n2 ? successes - n2 : 0;
  const std::size_t hi = std::min(successes, n1);
  const double log_total = log_choose(n, successes);
  auto log_p = [&](std::size_t x) {
    return log_choose(n1, x) + log_choose(n2, successes - x) - log_total;
  };
  const double observed = log_p(k1);
  // Relative slack so tables tied with the observed one in exact arithmetic
  // are not lost to rounding.
  const double cutoff = observed + std::log1p(1e-7);
  double p = 0.0;
  for (std::size_t x = lo; x <= hi; ++x) {
    const double lp = log_p(x);
    if (lp <= cutoff) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

RateRatios risk_and_odds_ratio(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  if (n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2) {
    throw std::invalid_argument("ratios need 0 <= k <= n and n >= 1 in both groups");
  }
  RateRatios r;
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  if (k1 > 0) r.risk_ratio = p2 / p1;
  if (k1 > 0 && k1 < n1 && k2 < n2) {
    const double odds1 = static_cast<double>(k1) / static_cast<double>(n1 - k1);
    const double odds2 = static_cast<double>(k2) / static_cast<double>(n2 - k2);
    r.odds_ratio = odds2 / odds1;
  }
  return r;
}

RareEventComparison compare_rates(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  RareEventComparison c;
  c.k1 = k1;
  c.n1 = n1;
  c.k2 = k2;
  c.n2 = n2;
  c.rate1 = static_cast<double>(k1) / static_cast<double>(n1);
  c.rate2 = static_cast<double>(k2) / static_cast<double>(n2);
  c.ci1 = exact_binomial_ci(k1, n1);
  c.ci2 = exact_binomial_ci(k2, n2);
  c.ratios = risk_and_odds_ratio(k1, n1, k2, n2);
  c.fisher_p = fisher_exact_two_sided(k1, n1, k2, n2);
  return c;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const RareEventComparison& c) {
  return json{{"k1", c.k1}, {"n1", c.n1}, {"k2", c.k2}, {"n2", c.n2},
              {"rate1", c.rate1}, {"rate2", c.rate2},
              {"ci1", {c.ci1.lo, c.ci1.hi}}, {"ci2", {c.ci2.lo, c.ci2.hi}},
              {"risk_ratio", optional_number(c.ratios.risk_ratio)},
              {"odds_ratio", optional_number(c.ratios.odds_ratio)},
              {"fisher_p", c.fisher_p}};
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rank(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("spearman: needs at least two points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    const double fa = static_cast<double>(i) / static_cast<double>(x.size());
    const double fb = static_cast<double>(j) / static_cast<double>(y.size());
    d = std::max(d, std::abs(fa - fb));
  }
  // Once one sample is exhausted its ECDF is 1; the gap only shrinks afterwards.
  return d;
}

double percentile(std::span<const double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile must be in [0,100]");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

std::vector<double> percentiles(std::span<const double> samples, std::span<const double> qs) {
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) out.push_back(percentile(samples, q));
  return out;
}

Distribution describe(std::span<const double> samples) {
  Distribution d;
  d.n = samples.size();
  if (samples.empty()) return d;
  d.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(d.n);
  d.p50 = percentile(samples, 50);
  d.p90 = percentile(samples, 90);
  d.p99 = percentile(samples, 99);
  return d;
}

// ---------------------------------------------------------------------------

double RunSummary::approval_rate() const {
  return total == 0 ? 0.0 : static_cast<double>(approved) / static_cast<double>(total);
}

Interval RunSummary::approval_ci() const {
  if (total == 0) return {0.0, 1.0};
  return exact_binomial_ci(approved, total);
}

namespace {

constexpr const char* kRoles[] = {"context", "reasoner", "constraint", "planner", "auditor"};

bool safe_execution(const json& rec, const Catalog& catalog) {
  const auto& members = rec.at("executed_portfolio");
  std::vector<std::size_t> idx;
  for (const auto& m : members) {
    const auto i = catalog.find(m.get<std::string>());
    if (!i) return false;
    idx.push_back(*i);
  }
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (idx[a] == idx[b] || catalog.conflicts(idx[a], idx[b])) return false;
    }
  }
  const auto& budgets = rec.at("budgets");
  for (Resource r : kResources) {
    double used = 0.0;
    for (auto i : idx) used += catalog.pattern(i).cost[r];
    if (used > budgets.at(std::string(resource_name(r))).get<double>()) return false;
  }
  return true;
}

}  // namespace

RunSummary summarize_run(const std::vector<json>& records, const Catalog* catalog) {
  RunSummary s;
  if (catalog) {
    for (const auto& p : catalog->patterns()) {
      s.pattern_selected[p.id] = 0;
      s.pattern_executed[p.id] = 0;
    }
  }
  for (const auto& rec : records) {
    ++s.total;
    const auto threat = rec.value("threat_label", std::string());
    auto& row = s.per_threat[threat];
    ++row.n;

    const auto& gate = rec.at("gate");
    const auto& audit = rec.at("audit");
    const bool approved = rec.at("approved").get<bool>();
    if (approved) {
      ++s.approved;
      ++row.approved;
    }
    if (gate.is_null()) {
      ++s.pipeline_failures;
      const auto& f = rec.at("failure");
      if (!f.is_null()) {
        ++s.failure_kinds[f.at("stage").get<std::string>() + "/" + f.at("kind").get<std::string>()];
      }
    } else if (gate.at("ok").get<bool>()) {
      ++s.gate_accept;
      const bool audit_ok = !audit.is_null() && audit.at("approved").get<bool>();
      if (audit_ok) ++s.accept_approved;
      else ++s.audit_rejected;
    } else {
      ++s.gate_reject;
      if (!audit.is_null() && !audit.at("approved").get<bool>()) ++s.reject_audit_rejected;
      std::set<std::string> seen;
      for (const auto& issue : gate.at("issues")) {
        const auto cat = issue.at("category").get<std::string>();
        if (seen.insert(cat).second) ++s.category_counts[cat];
      }
      if (!gate.at("issues").empty()) {
        ++s.primary_category[gate.at("issues")[0].at("category").get<std::string>()];
      }
    }
    if (rec.at("executed").get<bool>()) ++s.executed;
    if (rec.at("failsafe").get<bool>()) {
      ++s.failsafe;
      ++s.failsafe_reasons[rec.at("failsafe_reason").get<std::string>()];
    }
    if (!rec.at("critical_event").is_null()) ++s.critical_events;
    if (const auto& det = rec.at("deterministic"); !det.is_null()) {
      for (const auto& id : det.at("members")) ++s.pattern_selected[id.get<std::string>()];
    }
    for (const auto& id : rec.at("executed_portfolio")) ++s.pattern_executed[id.get<std::string>()];
    if (catalog && !safe_execution(rec, *catalog)) ++s.unsafe_executions;

    const auto& lat = rec.at("agent_latency");
    for (std::size_t i = 0; i < 5; ++i) s.agent_latency[i].push_back(lat.at(kRoles[i]).get<double>());
    s.latency.push_back(rec.at("dt").get<double>());
    s.energy.push_back(rec.at("energy").get<double>());
    s.power.push_back(rec.at("power").get<double>());
  }
  return s;
}

namespace {

json describe_json(std::span<const double> v) {
  const auto d = describe(v);
  return json{{"n", d.n}, {"mean", d.mean}, {"p50", d.p50}, {"p90", d.p90}, {"p99", d.p99}};
}

double total_mean_latency(const RunSummary& s) {
  double sum = 0.0;
  for (const auto& v : s.agent_latency) sum += describe(v).mean;
  return sum;
}

}  // namespace

json to_json(const RunSummary& s) {
  json agents = json::object();
  const double total_mean = total_mean_latency(s);
  for (std::size_t i = 0; i < 5; ++i) {
    json d = describe_json(s.agent_latency[i]);
    d["share"] = total_mean > 0.0 ? describe(s.agent_latency[i]).mean / total_mean : 0.0;
    agents[kRoles[i]] = d;
  }
  json threats = json::object();
  for (const auto& [threat, row] : s.per_threat) {
    const auto ci = exact_binomial_ci(row.approved, row.n);
    threats[threat] = {{"n", row.n},
                       {"approved", row.approved},
                       {"rate", static_cast<double>(row.approved) / static_cast<double>(row.n)},
                       {"ci", {ci.lo, ci.hi}}};
  }
  const auto ci = s.approval_ci();
  return json{
      {"total", s.total},
      {"gate", {{"accept", s.gate_accept}, {"reject", s.gate_reject},
                {"accept_approved", s.accept_approved},
                {"reject_audit_rejected", s.reject_audit_rejected},
                {"agreement", s.accept_approved + s.reject_audit_rejected ==
                                  s.gate_accept + s.gate_reject}}},
      {"outcomes", {{"approved", s.approved}, {"gate_rejected", s.gate_reject},
                    {"audit_rejected", s.audit_rejected},
                    {"pipeline_failures", s.pipeline_failures}}},
      {"approval", {{"rate", s.approval_rate()}, {"ci", {ci.lo, ci.hi}}}},
      {"executed", s.executed},
      {"failsafe", s.failsafe},
      {"failsafe_reasons", s.failsafe_reasons},
      {"critical_events", s.critical_events},
      {"unsafe_executions", s.unsafe_executions},
      {"failure_categories", s.category_counts},
      {"primary_failure_category", s.primary_category},
      {"pipeline_failure_kinds", s.failure_kinds},
      {"pattern_selected", s.pattern_selected},
      {"pattern_executed", s.pattern_executed},
      {"per_threat", threats},
      {"agent_latency", agents},
      {"latency", describe_json(s.latency)},
      {"energy", describe_json(s.energy)},
      {"power", describe_json(s.power)}};
}

namespace {

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string str() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows_) {
      width.resize(std::max(width.size(), r.size()), 0);
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::ostringstream os;
    auto line = [&] {
      os << '+';
      for (auto w : width) os << std::string(w + 2, '-') << '+';
      os << '\n';
    };
    line();
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      os << '|';
      for (std::size_t i = 0; i < width.size(); ++i) {
        const std::string cell = i < rows_[r].size() ? rows_[r][i] : "";
        os << ' ' << cell << std::string(width[i] - cell.size(), ' ') << " |";
      }
      os << '\n';
      if (r == 0) line();
    }
    line();
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string interval(const Interval& ci) { return "[" + fixed(ci.lo, 4) + ", " + fixed(ci.hi, 4) + "]"; }

std::string count(std::size_t v) { return std::to_string(v); }

}  // namespace

std::string render_text(const RunSummary& s, const std::string& title) {
  std::ostringstream os;
  os << "== " << title << " (" << s.total << " decisions) ==\n\n";

  os << "Gate and audit outcome\n";
  TextTable gate({"Gate outcome", "Count", "Final approved", "Final rejected"});
  gate.add({"Gate Reject", count(s.gate_reject), count(s.gate_reject - s.reject_audit_rejected),
            count(s.reject_audit_rejected)});
  gate.add({"Gate Accept", count(s.gate_accept), count(s.accept_approved), count(s.audit_rejected)});
  gate.add({"Pipeline failure", count(s.pipeline_failures), "0", count(s.pipeline_failures)});
  os << gate.str();
  os << "Final approval: " << s.approved << "/" << s.total << " = " << fixed(s.approval_rate(), 4)
     << ", 95% CI (exact) " << interval(s.approval_ci()) << "\n";
  os << "Executed plans: " << s.executed << ", fail-safe activations: " << s.failsafe
     << ", critical events: " << s.critical_events << "\n";
  if (s.unsafe_executions > 0) os << "UNSAFE executed portfolios: " << s.unsafe_executions << "\n";
  os << '\n';

  if (s.gate_reject > 0) {
    os << "Gate failure categories (primary = first issue raised)\n";
    TextTable cats({"Category", "Primary", "Any"});
    for (const auto& [cat, n] : s.category_counts) {
      auto it = s.primary_category.find(cat);
      cats.add({cat, count(it == s.primary_category.end() ? 0 : it->second), count(n)});
    }
    os << cats.str() << '\n';
  }
  if (!s.failure_kinds.empty()) {
    TextTable fails({"Pipeline failure", "Count"});
    for (const auto& [k, n] : s.failure_kinds) fails.add({k, count(n)});
    os << fails.str() << '\n';
  }

  os << "Pattern selection frequency\n";
  TextTable pats({"Pattern", "Deterministic", "Executed"});
  for (const auto& [id, n] : s.pattern_selected) {
    auto it = s.pattern_executed.find(id);
    pats.add({id, count(n), count(it == s.pattern_executed.end() ? 0 : it->second)});
  }
  os << pats.str() << '\n';

  os << "Approval by threat\n";
  TextTable threats({"Threat", "n", "Approved", "Rate", "95% CI"});
  for (const auto& [threat, row] : s.per_threat) {
    threats.add({threat, count(row.n), count(row.approved),
                 fixed(static_cast<double>(row.approved) / static_cast<double>(row.n), 4),
                 interval(exact_binomial_ci(row.approved, row.n))});
  }
  os << threats.str() << '\n';

  os << "Per-agent latency (s)\n";
  TextTable agents({"Agent", "Mean", "P50", "P90", "P99", "Share"});
  const double total_mean = total_mean_latency(s);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto d = describe(s.agent_latency[i]);
    agents.add({kRoles[i], fixed(d.mean, 3), fixed(d.p50, 3), fixed(d.p90, 3), fixed(d.p99, 3),
                fixed(total_mean > 0 ? d.mean / total_mean : 0.0, 3)});
  }
  os << agents.str() << '\n';

  os << "Latency and energy\n";
  TextTable eff({"Metric", "Mean", "Median", "P90", "P99"});
  const auto lat = describe(s.latency), en = describe(s.energy), pw = describe(s.power);
  eff.add({"Latency (s)", fixed(lat.mean, 3), fixed(lat.p50, 3), fixed(lat.p90, 3), fixed(lat.p99, 3)});
  eff.add({"Energy (J)", fixed(en.mean, 3), fixed(en.p50, 3), fixed(en.p90, 3), fixed(en.p99, 3)});
  eff.add({"Avg power (W)", fixed(pw.mean, 3), fixed(pw.p50, 3), fixed(pw.p90, 3), fixed(pw.p99, 3)});
  os << eff.str();
  return os.str();
}

WorkloadComparison compare_runs(const RunSummary& a, const RunSummary& b) {
  if (a.total == 0 || b.total == 0) throw std::invalid_argument("cannot compare an empty run");
  WorkloadComparison c;
  c.approval = compare_rates(a.approved, a.total, b.approved, b.total);
  std::set<std::string> ids;
  for (const auto& [id, _] : a.pattern_selected) ids.insert(id);
  for (const auto& [id, _] : b.pattern_selected) ids.insert(id);
  std::vector<double> xs, ys;
  for (const auto& id : ids) {
    auto ia = a.pattern_selected.find(id);
    auto ib = b.pattern_selected.find(id);
    xs.push_back(ia == a.pattern_selected.end() ? 0.0 : static_cast<double>(ia->second));
    ys.push_back(ib == b.pattern_selected.end() ? 0.0 : static_cast<double>(ib->second));
  }
  try {
    c.pattern_spearman = spearman_rank(xs, ys);
  } catch (const std::invalid_argument&) {
    c.pattern_spearman.reset();
  }
  c.latency_ks = ks_distance(a.latency, b.latency);
  c.energy_ks = ks_distance(a.energy, b.energy);
  for (std::size_t i = 0; i < 5; ++i) c.agent_ks[i] = ks_distance(a.agent_latency[i], b.agent_latency[i]);
  return c;
}

json to_json(const WorkloadComparison& c) {
  json agents = json::object();
  for (std::size_t i = 0; i < 5; ++i) agents[kRoles[i]] = c.agent_ks[i];
  return json{{"approval", to_json(c.approval)},
              {"pattern_spearman", optional_number(c.pattern_spearman)},
              {"latency_ks", c.latency_ks},
              {"energy_ks", c.energy_ks},
              {"agent_latency_ks", agents}};
}

std::string render_text(const WorkloadComparison& c, const std::string& label_a,
                        const std::string& label_b) {
  std::ostringstream os;
  os << "== Rare-event comparison of final approval ==\n";
  const auto& r = c.approval;
  TextTable t({"Metric", label_a, label_b});
  t.add({"Approved / n", count(r.k1) + "/" + count(r.n1), count(r.k2) + "/" + count(r.n2)});
  t.add({"Rate", fixed(r.rate1, 4), fixed(r.rate2, 4)});
  t.add({"95% CI (exact)", interval(r.ci1), interval(r.ci2)});
  os << t.str();
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 3) : std::string("undefined"); };
  os << "Risk ratio (" << label_b << " / " << label_a << "): " << opt(r.ratios.risk_ratio) << "\n";
  os << "Odds ratio (" << label_b << " / " << label_a << "): " << opt(r.ratios.odds_ratio) << "\n";
  os << "Fisher exact test (two-sided): p = " << fixed(r.fisher_p, 3) << "\n\n";

  os << "Pattern rank stability: Spearman rho = " << opt(c.pattern_spearman) << "\n";
  TextTable ks({"Distribution", "KS distance"});
  ks.add({"Decision latency", fixed(c.latency_ks, 4)});
  ks.add({"Energy", fixed(c.energy_ks, 4)});
  for (std::size_t i = 0; i < 5; ++i) ks.add({std::string(kRoles[i]) + " latency", fixed(c.agent_ks[i], 4)});
  os << ks.str();
  return os.str();
}

}  // namespace aspo
