#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "imb/io.hpp"
#include "imb/simulator.hpp"
#include "test_util.hpp"

using namespace imb;

namespace {

CampaignConfig small_config() {
  CampaignConfig cfg;
  cfg.horizon_days = 1;
  cfg.warmup_days = 3;
  cfg.fleet = {{12, 50.0, 3.0}};
  cfg.window = 4;
  cfg.scenario_space = 200;
  cfg.reduced_scenarios = 4;
  cfg.predictor.window = 4;
  cfg.predictor.training_days = 2;
  cfg.predictor.grid.c = {10.0};
  cfg.predictor.grid.gamma_times_features = {0.1};
  cfg.predictor.grid.epsilon_frac = {0.01};
  cfg.grouping.mcmc.iterations = 4000;
  cfg.seed = 11;
  return cfg;
}

void check_trace_identities(const Campaign& c, const SimulationTrace& tr, const BatterySpec& b) {
  REQUIRE(tr.rows.size() == c.data().periods());
  double cum = 0.0, energy = 0.0;
  double prev_soc = tr.soc_start;
  const auto agg = b.aggregated();
  for (const auto& r : tr.rows) {
    CHECK(r.im == doctest::Approx(r.sp - r.dm - r.p).epsilon(1e-12));
    CHECK(r.ic == doctest::Approx(imbalance_cost(r.im, c.data().tariff)));
    cum += r.ic;
    CHECK(r.cum_ic == doctest::Approx(cum));
    CHECK(r.soc >= agg.soc_min_kwh() - 1e-6);
    CHECK(r.soc <= agg.soc_max_kwh() + 1e-6);
    CHECK(r.soc == doctest::Approx(prev_soc + agg.soc_delta(r.p)));
    energy += agg.soc_delta(r.p);
    prev_soc = r.soc;
  }
  CHECK(tr.total_cost == doctest::Approx(cum));
  CHECK(tr.rows.back().soc - tr.soc_start == doctest::Approx(energy).epsilon(1e-9).scale(1.0));
}

double sample_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

}  // namespace

TEST_CASE("synthetic fleet") {
  const auto a = generate_synthetic_fleet({{10, 50.0, 2.0}, {10, 50.0, 10.0}}, 14, 5);
  REQUIRE(a.size() == 20);
  for (const auto& s : a) {
    CHECK(s.size() == 34u * 48);
    for (double v : s.values()) CHECK(v >= 0.0);
  }
  double band1 = 0.0, band2 = INFINITY;
  for (int i = 0; i < 10; ++i) band1 = std::max(band1, compute_mdsd(a[i]));
  for (int i = 10; i < 20; ++i) band2 = std::min(band2, compute_mdsd(a[i]));
  CHECK(band1 < band2);

  const auto quiet = generate_synthetic_fleet({{3, 40.0, 0.0}}, 7, 5);
  for (const auto& s : quiet) CHECK(compute_mdsd(s) == doctest::Approx(0.0).epsilon(1e-9));

  const auto b = generate_synthetic_fleet({{10, 50.0, 2.0}, {10, 50.0, 10.0}}, 14, 5);
  const auto c = generate_synthetic_fleet({{10, 50.0, 2.0}, {10, 50.0, 10.0}}, 14, 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].values() == b[i].values());
    CHECK(a[i].customer_id() == b[i].customer_id());
  }
  CHECK(a[0].values() != c[0].values());
  CHECK_THROWS_AS(generate_synthetic_fleet({{2, -1.0, 0.0}}, 1, 1), ValidationError);
}

TEST_CASE("contract model") {
  std::vector<double> dm(1000);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(50.0, 150.0);
  for (auto& v : dm) v = u(rng);
  CHECK(make_contract(dm, 0.0, 1) == dm);
  dm[7] = 0.0;
  const auto sp = make_contract(dm, 0.1, 1);
  CHECK(sp[7] == 0.0);
  std::vector<double> rel;
  for (std::size_t i = 0; i < dm.size(); ++i)
    if (dm[i] > 0.0) rel.push_back((sp[i] - dm[i]) / dm[i]);
  CHECK(sample_std(rel) == doctest::Approx(0.1).epsilon(0.2));
  CHECK(make_contract(dm, 0.1, 1) == sp);
  CHECK_THROWS_AS(make_contract(dm, -0.1, 1), ValidationError);
}

TEST_CASE("campaign setup") {
  Campaign c(small_config());
  const auto& d = c.data();
  CHECK(d.groups.size() == 1);
  CHECK(d.group.size() == 12);
  CHECK(d.sim_start == 3u * 48);
  CHECK(d.periods() == 48u);
  double peak = 0.0;
  for (std::size_t t = d.sim_start; t < d.sim_end; ++t) peak = std::max(peak, d.supply[t]);
  CHECK(d.tariff.threshold_kwh == doctest::Approx(0.03 * peak));
  const auto b = c.default_battery();
  CHECK(b.capacity_kwh == doctest::Approx(d.group.capacity_bound * 320.0 / 445.0));
  CHECK(b.power_charge_kw == doctest::Approx(2.0 * b.capacity_kwh));
  CHECK(b.eta_charge * b.eta_discharge == doctest::Approx(0.95));
  const auto caps = c.sweep_capacities();
  REQUIRE(caps.size() == 5);
  CHECK(caps[0] == 0.0);
  CHECK(caps[3] == doctest::Approx(d.group.capacity_bound));
}

TEST_CASE("config validation") {
  auto bad = small_config();
  bad.predictor.window = 3;
  CHECK_THROWS_AS(Campaign{bad}, ValidationError);
  bad = small_config();
  bad.reduced_scenarios = 500;
  CHECK_THROWS_AS(Campaign{bad}, ValidationError);
  bad = small_config();
  bad.group_index = 4;
  CHECK_THROWS_WITH_AS(Campaign{bad}, doctest::Contains("group_index"), ValidationError);
  bad = small_config();
  bad.sweep_capacities_kwh = {10.0, 5.0};
  CHECK_THROWS_AS(Campaign{bad}, ValidationError);
  const auto fleet = generate_synthetic_fleet({{2, 10.0, 1.0}}, 0, 1, 2);
  CHECK_THROWS_WITH_AS(Campaign(small_config(), fleet), doctest::Contains("shorter"), ValidationError);
}

TEST_CASE("closed-loop traces") {
  Campaign c(small_config());
  const auto b = c.default_battery();
  const auto nb = c.run_no_battery();
  const auto ss = c.run_sswcd(b);
  const auto det = c.run_deterministic(b);
  check_trace_identities(c, ss, b);
  check_trace_identities(c, det, b);
  check_trace_identities(c, nb, c.battery(0.0));
  CHECK(ss.soc_start == doctest::Approx(0.5 * b.capacity_kwh));
  CHECK(ss.total_cost <= nb.total_cost);
  CHECK(ss.rows.front().pred.has_value());

  double basic = 0.0;
  for (const auto& r : nb.rows) {
    CHECK(r.p == 0.0);
    basic += imbalance_cost(r.sp - r.dm, c.data().tariff);
  }
  CHECK(nb.total_cost == doctest::Approx(basic));

  SUBCASE("a battery without power is the no-battery baseline") {
    auto idle = b;
    idle.power_charge_kw = idle.power_discharge_kw = 0.0;
    const auto tr = c.run_sswcd(idle);
    for (std::size_t i = 0; i < tr.rows.size(); ++i) {
      CHECK(tr.rows[i].p == 0.0);
      CHECK(tr.rows[i].im == nb.rows[i].im);
    }
    CHECK(tr.total_cost == nb.total_cost);
  }
  SUBCASE("same seed gives identical traces") {
    Campaign again(small_config());
    const auto ss2 = again.run_sswcd(again.default_battery());
    testutil::TempDir dir;
    write_trace_csv(dir.path() / "a.csv", ss);
    write_trace_csv(dir.path() / "b.csv", ss2);
    CHECK(read_file(dir.path() / "a.csv") == read_file(dir.path() / "b.csv"));
  }
}

TEST_CASE("one scenario is the deterministic mode") {
  auto cfg = small_config();
  cfg.reduced_scenarios = 1;
  Campaign c(cfg);
  const auto b = c.default_battery();
  const auto ss = c.run_sswcd(b);
  const auto det = c.run_deterministic(b);
  REQUIRE(ss.rows.size() == det.rows.size());
  for (std::size_t i = 0; i < ss.rows.size(); ++i) CHECK(ss.rows[i].p == det.rows[i].p);
  CHECK(ss.total_cost == det.total_cost);
}

TEST_CASE("exact contract costs nothing without a battery") {
  auto cfg = small_config();
  cfg.contract_error_frac = 0.0;
  Campaign c(cfg);
  const auto nb = c.run_no_battery();
  CHECK(nb.total_cost == 0.0);
  CHECK_FALSE(nb.rows.front().pred.has_value());
}

TEST_CASE("noiseless world keeps imbalance small") {
  // With c1 = 0 the scheduler only minimizes expected |imbalance|, so any
  // remaining imbalance comes from forecast error.
  auto cfg = small_config();
  cfg.fleet = {{12, 50.0, 0.0}};
  cfg.contract_error_frac = 0.0;
  cfg.c1 = 0.0;
  cfg.battery_capacity_kwh = 400.0;
  Campaign c(cfg);
  const auto tr = c.run_sswcd(c.default_battery());
  double demand = 0.0;
  for (const auto& r : tr.rows) demand += r.dm;
  CHECK(tr.total_abs_imbalance <= 0.01 * demand);
  CHECK(c.track().mape_pct < 1.0);
}

TEST_CASE("capacity sweep and output files") {
  Campaign c(small_config());
  const double bound = c.data().group.capacity_bound;
  const auto pts = c.capacity_sweep({0.0, 0.5 * bound, bound});
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].pct_of_basic == doctest::Approx(100.0));
  CHECK(pts[0].capacity_kwh == 0.0);
  CHECK(pts[2].pct_of_basic <= 100.0);
  CHECK_THROWS_AS(c.capacity_sweep({5.0, 1.0}), ValidationError);

  testutil::TempDir dir;
  write_sweep_csv(dir.path() / "sweep.csv", {{0.0, 1.0, 100.0}, {80.0, 0.5, 42.5}});
  CHECK(read_file(dir.path() / "sweep.csv") == "capacity_kwh,pct_of_basic\n0,100\n80,42.5\n");

  SimulationTrace tr;
  tr.mode = "sswcd";
  tr.total_cost = 25.0;
  tr.rows.push_back({7, 10.0, 12.0, 11.5, -1.0, 3.0, -1.0, 15.0, 15.0});
  tr.rows.push_back({8, 10.0, 9.0, std::nullopt, 0.5, 3.5, 0.5, 10.0, 25.0});
  write_trace_csv(dir.path() / "trace.csv", tr);
  CHECK(read_file(dir.path() / "trace.csv") ==
        "period,sp,dm,pred,p,soc,im,ic,cum_ic\n7,10,12,11.5,-1,3,-1,15,15\n8,10,9,,0.5,3.5,0.5,10,25\n");
  write_summary_json(dir.path() / "summary.json", tr, 100.0);
  const auto j = read_file(dir.path() / "summary.json");
  CHECK(j.find("\"reduction_pct\": 75.0") != std::string::npos);
  CHECK(j.find("\"basic_cost\": 100.0") != std::string::npos);
  CHECK(j.find("\"runtime_s\"") != std::string::npos);
}

TEST_CASE("solver failure reports the period and the problem") {
  auto cfg = small_config();
  cfg.node_limit = 0;
  Campaign c(cfg);
  try {
    c.run_sswcd(c.default_battery());
    FAIL("expected a solver failure");
  } catch (const CampaignError& e) {
    CHECK(e.period() == c.data().sim_start);
    CHECK(e.lp_text().find("Subject To") != std::string::npos);
    CHECK(std::string(e.what()).find("period 144") != std::string::npos);
  }
}
