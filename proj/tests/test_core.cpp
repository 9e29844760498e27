#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "imb/core.hpp"
#include "test_util.hpp"

using namespace imb;

namespace {

DemandSeries daily(std::vector<std::vector<double>> days, int n) {
  std::vector<double> v;
  for (const auto& d : days) {
    REQUIRE(static_cast<int>(d.size()) == n);
    v.insert(v.end(), d.begin(), d.end());
  }
  return DemandSeries("c", parse_timestamp("2013-01-01T00:00"), 1440 / n, v);
}

// Two-pass reference: textbook mean, then mean squared deviation.
double reference_std(const std::vector<double>& xs) {
  long double m = 0;
  for (double x : xs) m += x;
  m /= xs.size();
  long double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return static_cast<double>(std::sqrt(s / xs.size()));
}

}  // namespace

TEST_CASE("dsd: population std of two points") {
  const auto s = daily({{1.0, 5.0}, {3.0, 5.0}}, 2);
  CHECK(compute_dsd(s, 0) == doctest::Approx(1.0));
  CHECK(compute_dsd(s, 1) == doctest::Approx(0.0));
}

TEST_CASE("dsd: constant series has zero deviation everywhere") {
  const DemandSeries s("c", parse_timestamp("2013-01-01T00:00"), 30, std::vector<double>(48 * 5, 12.5));
  for (int p = 0; p < 48; ++p) CHECK(compute_dsd(s, p) == 0.0);
  CHECK(compute_mdsd(s) == 0.0);
}

TEST_CASE("dsd: gaussian sample matches an independent std") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(100.0, 5.0);
  std::vector<double> v(31 * 48, 50.0);
  std::vector<double> column;
  for (int d = 0; d < 31; ++d) {
    v[d * 48 + 17] = g(rng);
    column.push_back(v[d * 48 + 17]);
  }
  const DemandSeries s("c", parse_timestamp("2013-01-01T00:00"), 30, v);
  const double got = compute_dsd(s, 17);
  CHECK(got >= 3.5);
  CHECK(got <= 6.5);
  CHECK(got == doctest::Approx(reference_std(column)).epsilon(1e-12));
}

TEST_CASE("dsd: rejects partial days and empty series") {
  const DemandSeries partial("c", parse_timestamp("2013-01-01T00:00"), 30, std::vector<double>(50, 1.0));
  CHECK_THROWS_AS(compute_dsd(partial, 0), ValidationError);
  CHECK_THROWS_AS(compute_mdsd(partial), ValidationError);
  const DemandSeries empty("c", parse_timestamp("2013-01-01T00:00"), 30, {});
  CHECK_THROWS_AS(compute_mdsd(empty), ValidationError);
}

TEST_CASE("mdsd: single noisy period dominates") {
  // Period 5 alternates 6 and 14 (std 4); everything else constant.
  std::vector<std::vector<double>> days;
  for (int d = 0; d < 6; ++d) {
    std::vector<double> day(48, 20.0);
    day[5] = d % 2 ? 14.0 : 6.0;
    days.push_back(day);
  }
  const auto s = daily(days, 48);
  double brute = 0.0;
  for (int p = 0; p < 48; ++p) {
    std::vector<double> col;
    for (const auto& day : days) col.push_back(day[p]);
    brute = std::max(brute, reference_std(col));
  }
  CHECK(brute == doctest::Approx(4.0));
  CHECK(compute_mdsd(s) == doctest::Approx(brute));
}

TEST_CASE("mdsd: single day gives zero") {
  std::vector<double> v(48);
  for (int i = 0; i < 48; ++i) v[i] = i;
  const DemandSeries s("c", parse_timestamp("2013-01-01T00:00"), 30, v);
  CHECK(compute_mdsd(s) == 0.0);
}

TEST_CASE("mdsd: bounds every period and is invariant to day order") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int days = 2 + trial % 7;
    std::vector<std::vector<double>> rows(days, std::vector<double>(48));
    for (auto& r : rows)
      for (auto& x : r) x = u(rng);
    const auto s = daily(rows, 48);
    const double m = compute_mdsd(s);
    bool hit = false;
    for (int p = 0; p < 48; ++p) {
      CHECK(m >= compute_dsd(s, p));
      hit = hit || m == compute_dsd(s, p);
    }
    CHECK(hit);
    std::shuffle(rows.begin(), rows.end(), rng);
    CHECK(compute_mdsd(daily(rows, 48)) == doctest::Approx(m).epsilon(1e-12));
  }
}

TEST_CASE("tariff: reference evaluator values") {
  ImbalanceTariff t;
  t.threshold_kwh = 50.0;
  CHECK(imbalance_cost(0.0, t) == 0.0);
  CHECK(imbalance_cost(-100.0, t) == doctest::Approx(3035.0));
  CHECK(imbalance_cost(100.0, t) == doctest::Approx(-524.0));
  CHECK(imbalance_cost(-20.0, t) == doctest::Approx(300.0));
  CHECK(imbalance_cost(20.0, t) == doctest::Approx(-209.6));
  CHECK(imbalance_cost(5000.0, t) == doctest::Approx(-524.0));
}

TEST_CASE("tariff: convex with ordered slopes on random triples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-400.0, 400.0);
  ImbalanceTariff t;
  t.threshold_kwh = 93.0;
  for (int k = 0; k < 2000; ++k) {
    double v[3] = {u(rng), u(rng), u(rng)};
    std::sort(v, v + 3);
    if (v[2] - v[0] < 1e-9) continue;
    const double lam = (v[1] - v[0]) / (v[2] - v[0]);
    const double chord = (1 - lam) * imbalance_cost(v[0], t) + lam * imbalance_cost(v[2], t);
    CHECK(imbalance_cost(v[1], t) <= chord + 1e-9);
  }
  // Slopes per segment, evaluated away from the kinks.
  const double h = 1e-3;
  auto slope = [&](double at) { return (imbalance_cost(at + h, t) - imbalance_cost(at - h, t)) / (2 * h); };
  CHECK(slope(-200) == doctest::Approx(-45.7));
  CHECK(slope(-40) == doctest::Approx(-15.0));
  CHECK(slope(40) == doctest::Approx(-10.48));
  CHECK(slope(200) == doctest::Approx(0.0));
}

TEST_CASE("tariff: validation") {
  ImbalanceTariff t;
  CHECK_NOTHROW(t.validate());
  t.prices = {10.0, 20.0, 5.0, 0.0};
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t.prices = {10.0, 5.0, 1.0};
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t.prices = {10.0, 5.0};
  CHECK_NOTHROW(t.validate());
  CHECK(imbalance_cost(-3.0, t) == doctest::Approx(30.0));
  CHECK(imbalance_cost(3.0, t) == doctest::Approx(-15.0));
  t.threshold_kwh = 0.0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("tariff: six segments keep threshold-wide inner bands") {
  ImbalanceTariff t;
  t.threshold_kwh = 10.0;
  t.prices = {50.0, 30.0, 20.0, 8.0, 4.0, 0.0};
  t.validate();
  // Shortage of 25: 10 at 20, 10 at 30, 5 at 50.
  CHECK(imbalance_cost(-25.0, t) == doctest::Approx(200.0 + 300.0 + 250.0));
  CHECK(imbalance_cost(25.0, t) == doctest::Approx(-(80.0 + 40.0)));
}

TEST_CASE("battery: aggregation and validation") {
  BatterySpec b{6.4, 12.8, 12.8, 0.01, 0.96, 0.97, 0.98, 50};
  CHECK_NOTHROW(b.validate());
  const auto agg = b.aggregated();
  CHECK(agg.capacity_kwh == doctest::Approx(320.0));
  CHECK(agg.power_charge_kw == doctest::Approx(640.0));
  CHECK(agg.unit_count == 1);
  CHECK(agg.soc_max_kwh() == doctest::Approx(307.2));
  CHECK(b.soc_delta(10.0) == doctest::Approx(9.7));
  CHECK(b.soc_delta(-9.8) == doctest::Approx(-10.0));
  b.eta_charge = 1.5;
  CHECK_THROWS_AS(b.validate(), ValidationError);
}

TEST_CASE("dac vector sorts ascending and keeps ties stable") {
  DacVector v({{"a", 3.0}, {"b", 1.0}, {"c", 3.0}, {"d", 0.5}});
  REQUIRE(v.size() == 4);
  CHECK(v.entries()[0].first == "d");
  CHECK(v.entries()[1].first == "b");
  CHECK(v.entries()[2].first == "a");
  CHECK(v.entries()[3].first == "c");
  CHECK_THROWS_AS(DacVector({{"x", -1.0}}), ValidationError);
}

TEST_CASE("calendar helpers") {
  const DemandSeries s("c", parse_timestamp("2013-01-01T00:00:00"), 30, std::vector<double>(96, 1.0));
  CHECK(s.day_of_week(0) == 1);   // 2013-01-01 was a Tuesday
  CHECK(s.day_of_week(48) == 2);
  CHECK(s.period_of_day(49) == 1);
  CHECK(format_timestamp(s.time_of(47)) == "2013-01-01T23:30:00");
  CHECK_THROWS_AS(parse_timestamp("2013-02-30T00:00"), ValidationError);
}

TEST_CASE("csv: well-formed two customers over two days") {
  testutil::TempDir dir;
  std::string text = "timestamp,customer_id,kwh\n";
  for (int i = 0; i < 96; ++i) {
    const auto ts = format_timestamp(parse_timestamp("2013-01-01T00:00") + std::chrono::minutes(30 * i));
    text += ts + ",A," + std::to_string(i * 0.5) + "\n";
    text += ts + ",B,2\n";
  }
  const auto path = dir.write("d.csv", text);
  const auto fleet = load_demand_csv(path);
  REQUIRE(fleet.size() == 2);
  CHECK(fleet[0].customer_id() == "A");
  CHECK(fleet[0].size() == 96);
  CHECK(fleet[1].size() == 96);
  CHECK(fleet[0].granularity_minutes() == 30);
  CHECK(fleet[0].values()[10] == doctest::Approx(5.0));

  const auto out = dir.path() / "round.csv";
  write_demand_csv(out, fleet);
  const auto again = load_demand_csv(out);
  REQUIRE(again.size() == 2);
  CHECK(again[0].values() == fleet[0].values());
  CHECK(again[1].values() == fleet[1].values());
}

TEST_CASE("csv: missing half-hour row names the gap") {
  testutil::TempDir dir;
  const auto path = dir.write("gap.csv",
                              "timestamp,customer_id,kwh\n"
                              "2013-01-01T00:00,A,1\n"
                              "2013-01-01T00:30,A,1\n"
                              "2013-01-01T01:30,A,1\n");
  try {
    load_demand_csv(path);
    FAIL("expected a gap error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("gap") != std::string::npos);
    CHECK(msg.find("2013-01-01T01:00:00") != std::string::npos);
    CHECK(msg.find(":4:") != std::string::npos);
  }
}

TEST_CASE("csv: negative kwh and malformed rows are rejected with line numbers") {
  testutil::TempDir dir;
  const auto neg = dir.write("neg.csv", "timestamp,customer_id,kwh\n2013-01-01T00:00,A,-1\n");
  CHECK_THROWS_WITH_AS(load_demand_csv(neg), doctest::Contains(":2:"), ValidationError);
  const auto bad = dir.write("bad.csv", "timestamp,customer_id,kwh\n2013-01-01T00:00,A\n");
  CHECK_THROWS_WITH_AS(load_demand_csv(bad), doctest::Contains(":2:"), ValidationError);
  const auto hdr = dir.write("hdr.csv", "time,id,value\n");
  CHECK_THROWS_AS(load_demand_csv(hdr), ValidationError);
  CHECK_THROWS_AS(load_demand_csv(dir.path() / "missing.csv"), ValidationError);
}

TEST_CASE("holiday file") {
  testutil::TempDir dir;
  const auto path = dir.write("h.txt", "# national holidays\n2013-01-01\n\n2013-01-14\n");
  const auto h = load_holidays(path);
  CHECK(h.size() == 2);
  CHECK(h.count(parse_date("2013-01-14")) == 1);
  const auto bad = dir.write("hb.txt", "2013-13-01\n");
  CHECK_THROWS_AS(load_holidays(bad), ValidationError);
}
