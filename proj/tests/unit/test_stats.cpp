#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aspo/engine.hpp"
#include "aspo/stats.hpp"
#include "fixtures.hpp"

using namespace aspo;
using nlohmann::json;

namespace {

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// P(X <= k) for X ~ Binomial(n, p), summed term by term.
double binom_cdf(std::size_t k, std::size_t n, double p) {
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return k >= n ? 1.0 : 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    sum += std::exp(log_choose(n, i) + i * std::log(p) + (n - i) * std::log1p(-p));
  }
  return sum;
}

double bisect(double lo, double hi, const std::function<bool(double)>& above) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (above(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Clopper-Pearson bounds by inverting the binomial tails.
Interval bisection_ci(std::size_t k, std::size_t n, double alpha = 0.05) {
  Interval ci;
  ci.lo = k == 0 ? 0.0 : bisect(0.0, 1.0, [&](double p) { return 1.0 - binom_cdf(k - 1, n, p) >= alpha / 2; });
  ci.hi = k == n ? 1.0 : bisect(0.0, 1.0, [&](double p) { return binom_cdf(k, n, p) <= alpha / 2; });
  return ci;
}

// Two-sided Fisher p by enumerating every table with the observed margins.
double fisher_enumeration(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  const std::size_t col = k1 + k2, n = n1 + n2;
  auto prob = [&](std::size_t a) {
    return std::exp(log_choose(n1, a) + log_choose(n2, col - a) - log_choose(n, col));
  };
  const double observed = prob(k1);
  double p = 0.0;
  const std::size_t lo = col > n2 ? col - n2 : 0, hi = std::min(col, n1);
  for (std::size_t a = lo; a <= hi; ++a) {
    const double pa = prob(a);
    if (pa <= observed * (1 + 1e-7)) p += pa;
  }
  return std::min(1.0, p);
}

// Rank of each element as 1 + (#smaller) + (#equal - 1) / 2, then Pearson.
double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Steps through every pooled point and counts sample members at or below it.
double ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  double d = 0.0;
  for (double t : pooled) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double v) { return v <= t; })) / a.size();
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double v) { return v <= t; })) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace

TEST_CASE("exact binomial intervals for the reported approval counts") {
  auto ci = exact_binomial_ci(4, 500);
  CHECK(ci.lo == doctest::Approx(0.0022).epsilon(0.0002 / 0.0022));
  CHECK(ci.hi == doctest::Approx(0.0204).epsilon(0.0002 / 0.0204));
  ci = exact_binomial_ci(5, 1000);
  CHECK(ci.lo == doctest::Approx(0.0016).epsilon(0.0002 / 0.0016));
  CHECK(ci.hi == doctest::Approx(0.0116).epsilon(0.0002 / 0.0116));

  ci = exact_binomial_ci(0, 10);
  CHECK(ci.lo == 0.0);
  CHECK(ci.hi == doctest::Approx(1 - std::pow(0.025, 0.1)));
  ci = exact_binomial_ci(10, 10);
  CHECK(ci.hi == 1.0);

  CHECK_THROWS_AS(exact_binomial_ci(3, 2), std::invalid_argument);
  CHECK_THROWS_AS(exact_binomial_ci(0, 0), std::invalid_argument);
}

TEST_CASE("exact intervals agree with binomial-tail bisection") {
  for (std::size_t n : {1, 5, 17, 60, 500}) {
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 7)) {
      const auto a = exact_binomial_ci(k, n);
      const auto b = bisection_ci(k, n);
      CHECK(a.lo == doctest::Approx(b.lo).epsilon(1e-7));
      CHECK(a.hi == doctest::Approx(b.hi).epsilon(1e-7));
    }
  }
}

TEST_CASE("exact interval coverage at a rare approval rate") {
  Rng rng(2718);
  const double p = 0.008;
  const std::size_t n = 500, reps = 10000;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) k += rng.uniform() < p;
    const auto ci = exact_binomial_ci(k, n);
    covered += ci.lo <= p && p <= ci.hi;
  }
  const double coverage = static_cast<double>(covered) / reps;
  MESSAGE("empirical coverage " << coverage);
  CHECK(coverage >= 0.93);
  CHECK(coverage <= 0.97);
}

TEST_CASE("Fisher exact test") {
  CHECK(fisher_exact_two_sided(4, 500, 5, 1000) == doctest::Approx(0.492).epsilon(0.005 / 0.492));
  CHECK(fisher_exact_two_sided(7, 40, 7, 40) == doctest::Approx(1.0));
  CHECK(fisher_exact_two_sided(0, 10, 0, 10) == 1.0);
  CHECK_THROWS_AS(fisher_exact_two_sided(0, 0, 1, 3), std::invalid_argument);

  for (std::size_t n1 = 1; n1 <= 15; ++n1) {
    for (std::size_t n2 = 1; n2 <= 15; n2 += 2) {
      for (std::size_t k1 = 0; k1 <= n1; ++k1) {
        for (std::size_t k2 = 0; k2 <= n2; k2 += 3) {
          CHECK(fisher_exact_two_sided(k1, n1, k2, n2) ==
                doctest::Approx(fisher_enumeration(k1, n1, k2, n2)).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("risk and odds ratios") {
  auto r = risk_and_odds_ratio(4, 500, 5, 1000);
  REQUIRE(r.risk_ratio);
  REQUIRE(r.odds_ratio);
  CHECK(*r.risk_ratio == doctest::Approx(0.625).epsilon(0.001 / 0.625));
  CHECK(*r.odds_ratio == doctest::Approx(0.623).epsilon(0.001 / 0.623));
  CHECK(*r.odds_ratio == doctest::Approx((5.0 / 995.0) / (4.0 / 496.0)));

  r = risk_and_odds_ratio(10, 100, 20, 200);
  CHECK(*r.risk_ratio == doctest::Approx(1.0));

  r = risk_and_odds_ratio(0, 500, 5, 1000);
  CHECK_FALSE(r.risk_ratio.has_value());
  CHECK_FALSE(r.odds_ratio.has_value());

  const auto cmp = compare_rates(0, 500, 5, 1000);
  const auto j = to_json(cmp);
  CHECK(j["risk_ratio"].is_null());
}

TEST_CASE("Spearman rank correlation") {
  const std::vector<double> c500 = {255, 149, 125, 92, 65, 55, 48, 41, 25, 24};
  const std::vector<double> c1000 = {510, 290, 257, 192, 123, 117, 93, 75, 43, 43};
  const double rho = spearman_rank(c500, c1000);
  MESSAGE("rank correlation of the published pattern counts " << rho);
  // The tie at 43/43 keeps the average-rank statistic just below 1; it rounds to 1.00.
  CHECK(rho == doctest::Approx(1.0).epsilon(0.005));
  CHECK(rho == doctest::Approx(spearman_oracle(c500, c1000)).epsilon(1e-12));

  std::vector<double> rev(c500.rbegin(), c500.rend());
  CHECK(spearman_rank(c500, rev) == doctest::Approx(-1.0));

  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> x(6), y(6);
    for (auto& v : x) v = static_cast<double>(rng.below(5));
    for (auto& v : y) v = static_cast<double>(rng.below(5));
    if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) continue;
    if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) continue;
    CHECK(spearman_rank(x, y) == doctest::Approx(spearman_oracle(x, y)).epsilon(1e-12));
  }

  const std::vector<double> shorter = {1, 2};
  CHECK_THROWS_AS(spearman_rank(c500, shorter), std::invalid_argument);
  const std::vector<double> one = {1};
  CHECK_THROWS_AS(spearman_rank(one, one), std::invalid_argument);
}

TEST_CASE("average ranks") {
  const std::vector<double> v = {3, 1, 3, 2};
  CHECK(average_ranks(v) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("Kolmogorov-Smirnov distance") {
  const std::vector<double> a = {1, 2, 3, 4};
  CHECK(ks_distance(a, a) == 0.0);
  const std::vector<double> far = {10, 11, 12};
  CHECK(ks_distance(a, far) == 1.0);
  const std::vector<double> none;
  CHECK_THROWS_AS(ks_distance(a, none), std::invalid_argument);

  const auto reasoner = LogNormal::from_mean_p90(5.835, 7.615);
  const auto auditor = LogNormal::from_mean_p90(3.153, 4.224);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng ra(seed), rb(seed + 100);
    std::vector<double> xs(150), ys(90);
    for (auto& x : xs) x = reasoner.sample(ra);
    for (auto& y : ys) y = (seed % 2 ? reasoner : auditor).sample(rb);
    CHECK(ks_distance(xs, ys) == doctest::Approx(ks_oracle(xs, ys)).epsilon(1e-12));
  }
  // Ties across samples are handled at the shared value.
  const std::vector<double> t1 = {1, 1, 2, 2}, t2 = {1, 2, 2, 2};
  CHECK(ks_distance(t1, t2) == doctest::Approx(ks_oracle(t1, t2)));
}

TEST_CASE("nearest-rank percentiles") {
  std::vector<double> xs(100);
  std::iota(xs.begin(), xs.end(), 1.0);
  CHECK(percentile(xs, 99) == 99);
  CHECK(percentile(xs, 50) == 50);
  CHECK(percentile(xs, 100) == 100);
  CHECK(percentile(xs, 0) == 1);
  const std::vector<double> one = {4.2};
  for (double q : {0.0, 10.0, 90.0, 100.0}) CHECK(percentile(one, q) == 4.2);

  const auto d = describe(xs);
  CHECK(d.n == 100);
  CHECK(d.mean == doctest::Approx(50.5));
  CHECK(d.p90 == 90);
}

TEST_CASE("calibrated agent latency samples reproduce their P90 targets") {
  const double targets[5][2] = {{4.233, 5.754}, {5.835, 7.615}, {4.293, 5.607}, {4.815, 6.303}, {3.153, 4.224}};
  Rng rng(90);
  for (const auto& t : targets) {
    const auto d = LogNormal::from_mean_p90(t[0], t[1]);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = d.sample(rng);
    CHECK(percentile(xs, 90) == doctest::Approx(t[1]).epsilon(0.05));
  }
}

TEST_CASE("run summaries partition and reconcile against raw traces") {
  const auto& c = testing::default_catalog();
  const auto config = default_engine_config();
  const auto dataset = synthesize_dataset(config.replay_classes, 40, 4);
  auto records_of = [&](AgentBackend& backend) {
    std::vector<json> out;
    for (const auto& t : run_replay(dataset, 10, 20, c, config, backend, 5).traces) {
      out.push_back(json::parse(to_json(t).dump()));
    }
    return out;
  };

  MockBackend mock(c);
  const auto plain = summarize_run(records_of(mock), &c);
  CHECK(plain.total == 200);
  CHECK(plain.gate_accept + plain.gate_reject + plain.pipeline_failures == plain.total);
  CHECK(plain.unsafe_executions == 0);
  CHECK(plain.pattern_selected.size() == c.size());
  CHECK(render_text(plain, "mock").find("Gate Accept") != std::string::npos);

  FaultBackend tamper(std::make_shared<MockBackend>(c), parse_fault_spec("set_tamper@0.5"), c);
  const auto records = records_of(tamper);
  const auto s = summarize_run(records, &c);
  CHECK(s.gate_reject > 0);

  std::map<std::string, std::size_t> category, primary;
  std::size_t rejects = 0;
  for (const auto& rec : records) {
    if (rec["gate"].is_null() || rec["gate"]["ok"].get<bool>()) continue;
    ++rejects;
    std::set<std::string> seen;
    for (const auto& i : rec["gate"]["issues"]) seen.insert(i["category"].get<std::string>());
    for (const auto& cat : seen) ++category[cat];
    ++primary[rec["gate"]["issues"][0]["category"].get<std::string>()];
  }
  CHECK(s.gate_reject == rejects);
  CHECK(s.category_counts == category);
  CHECK(s.primary_category == primary);
  std::size_t primary_total = 0;
  for (const auto& [k, v] : s.primary_category) primary_total += v;
  CHECK(primary_total + s.audit_rejected + s.pipeline_failures + s.approved == s.total);
}

TEST_CASE("a log with zero approvals still reports a valid interval") {
  const auto& c = testing::default_catalog();
  const auto config = default_engine_config();
  FaultBackend swap(std::make_shared<MockBackend>(c), parse_fault_spec("out_of_catalog"), c);
  std::vector<json> records;
  const auto dataset = synthesize_dataset(config.replay_classes, 4, 4);
  for (const auto& t : run_replay(dataset, 2, 5, c, config, swap, 5).traces) {
    records.push_back(json::parse(to_json(t).dump()));
  }
  const auto s = summarize_run(records, &c);
  CHECK(s.approved == 0);
  CHECK(s.approval_rate() == 0.0);
  const auto ci = s.approval_ci();
  CHECK(ci.lo == 0.0);
  CHECK(ci.hi > 0.0);
  CHECK(ci.hi < 1.0);
}

TEST_CASE("workload comparison") {
  RunSummary a, b;
  a.total = 500;
  a.approved = 4;
  b.total = 1000;
  b.approved = 5;
  const std::vector<std::pair<const char*, std::pair<int, int>>> counts = {
      {"P01", {24, 43}}, {"P02", {92, 192}}, {"P03", {55, 117}}, {"P04", {255, 510}}, {"P05", {125, 257}},
      {"P06", {48, 93}}, {"P07", {41, 75}},  {"P08", {25, 43}},  {"P09", {65, 123}}, {"P10", {149, 290}}};
  for (const auto& [id, n] : counts) {
    a.pattern_selected[id] = static_cast<std::size_t>(n.first);
    b.pattern_selected[id] = static_cast<std::size_t>(n.second);
  }
  a.latency = a.energy = {1, 2, 3};
  b.latency = b.energy = {1, 2, 3};
  for (auto& v : a.agent_latency) v = {1, 2};
  for (auto& v : b.agent_latency) v = {1, 2};
  const auto cmp = compare_runs(a, b);
  CHECK(cmp.approval.fisher_p == doctest::Approx(0.492).epsilon(0.01));
  CHECK(*cmp.approval.ratios.risk_ratio == doctest::Approx(0.625));
  REQUIRE(cmp.pattern_spearman.has_value());
  CHECK(*cmp.pattern_spearman > 0.99);
  CHECK(cmp.latency_ks == 0.0);
  const auto text = render_text(cmp, "500-run", "1000-run");
  CHECK(text.find("Fisher exact test (two-sided)") != std::string::npos);
}
