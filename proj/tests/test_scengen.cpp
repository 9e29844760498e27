#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "imb/error.hpp"
#include "imb/scengen.hpp"
#include "test_util.hpp"

using namespace imb;

TEST_CASE("error statistics") {
  ErrorStats st(2, 7.0);
  st.update(0, 1.0, 0.0);
  CHECK(st.stddev(0) == 7.0);
  st.update(0, -1.0, 0.0);
  CHECK(st.mean(0) == doctest::Approx(0.0));
  CHECK(st.stddev(0) == doctest::Approx(1.0));
  CHECK(st.count(1) == 0);
  CHECK(st.stddev(1) == 7.0);
  CHECK_THROWS_AS(st.update(2, 0.0, 0.0), ValidationError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 10.0);
  ErrorStats big(1, 0.0);
  std::vector<double> errs;
  for (int i = 0; i < 1000; ++i) {
    errs.push_back(n(rng));
    big.update(0, errs.back(), 0.0);
  }
  CHECK(big.stddev(0) == doctest::Approx(10.0).epsilon(0.1));
  // Two-pass oracle.
  double mean = 0.0;
  for (double e : errs) mean += e;
  mean /= errs.size();
  double ss = 0.0;
  for (double e : errs) ss += (e - mean) * (e - mean);
  CHECK(big.mean(0) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(big.stddev(0) == doctest::Approx(std::sqrt(ss / errs.size())).epsilon(1e-12));
}

TEST_CASE("variability of first differences") {
  const std::vector<double> d{1.0, 3.0, 2.0, 4.0};
  const auto v = VariabilityStats::from_history(d);
  // differences 2, -1, 2
  CHECK(v.mean == doctest::Approx(1.0));
  CHECK(v.stddev == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("covariance construction") {
  auto c = build_covariance(2.0, 1.0);
  CHECK(c.diag == 4.0);
  CHECK(c.off == 1.0);
  CHECK_FALSE(c.clamped);
  c = build_covariance(1.0, 2.0);
  CHECK(c.off == doctest::Approx(0.999));
  CHECK(c.clamped);
  c = build_covariance(3.0, 0.0);
  CHECK(c.off == 0.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const auto k = build_covariance(u(rng), u(rng));
    CHECK(k.diag * k.diag - k.off * k.off >= 0.0);
  }
}

TEST_CASE("sampling") {
  ErrorStats zero(3, 0.0);
  for (int l = 0; l < 3; ++l) {
    zero.update(l, 2.0 + l, 0.0);
    zero.update(l, 2.0 + l, 0.0);
  }
  const auto flat = sample_space(zero, {}, 50, 3, 9);
  for (int s = 0; s < 50; ++s)
    for (int l = 0; l < 3; ++l) CHECK(flat.at(s, l) == doctest::Approx(2.0 + l));

  ErrorStats st(1, 50.0);
  const auto sp = sample_space(st, VariabilityStats{0.0, 10.0}, 5000, 1, 42);
  double mean = 0.0;
  for (double v : sp.values) mean += v;
  mean /= sp.values.size();
  CHECK(std::abs(mean) <= 3.0 * 50.0 / std::sqrt(5000.0));

  const auto again = sample_space(st, VariabilityStats{0.0, 10.0}, 5000, 1, 42);
  CHECK(again.values == sp.values);
  const auto other = sample_space(st, VariabilityStats{0.0, 10.0}, 5000, 1, 43);
  CHECK(other.values != sp.values);

  const auto clamped = sample_space(st, VariabilityStats{0.0, 80.0}, 10, 1, 1);
  CHECK(clamped.clamped_lags == 1);
}

TEST_CASE("reduction by squared distance") {
  PerturbationSpace sp;
  sp.scenarios = 4;
  sp.lags = 1;
  sp.values = {std::sqrt(3.0), 1.0, 2.0, std::sqrt(2.0)};  // SSD 3, 1, 4, 2
  SUBCASE("quantile ranks") {
    const auto r = reduce(sp, {10.0}, 2);
    REQUIRE(r.size() == 2);
    // ranks 1 and 3 (0-based) are SSD 2 and 4; the first becomes the baseline
    CHECK(r.perturbations[0][0] == 0.0);
    CHECK(r.perturbations[1][0] == 2.0);
    CHECK(r.probabilities[0] == 0.5);
  }
  SUBCASE("keep everything") {
    const auto r = reduce(sp, {10.0}, 4);
    CHECK(r.size() == 4);
    CHECK(r.perturbations[0][0] == 0.0);
    CHECK(r.perturbations[3][0] == 2.0);
  }
  SUBCASE("single scenario is the baseline") {
    const auto r = reduce(sp, {10.0}, 1);
    REQUIRE(r.size() == 1);
    CHECK(r.perturbations[0][0] == 0.0);
    CHECK(r.demand(0, 0) == 10.0);
  }
  CHECK_THROWS_AS(reduce(sp, {10.0}, 5), ValidationError);
  CHECK_THROWS_AS(reduce(sp, {10.0, 1.0}, 2), ValidationError);
}

TEST_CASE("reduced sets keep the tail and stay non-negative") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ErrorStats st(8, 30.0);
    const auto sp = sample_space(st, VariabilityStats{0.0, 10.0}, 5000, 8, seed);
    std::vector<double> ssd(sp.scenarios, 0.0);
    for (int s = 0; s < sp.scenarios; ++s)
      for (int l = 0; l < sp.lags; ++l) ssd[s] += sp.at(s, l) * sp.at(s, l);
    auto sorted = ssd;
    std::sort(sorted.begin(), sorted.end());
    const double p90 = sorted[static_cast<std::size_t>(0.9 * (sorted.size() - 1))];

    const std::vector<double> baseline(8, 20.0);
    for (int target : {15, 57}) {
      const auto r = reduce(sp, baseline, target);
      double max_ssd = 0.0, prob = 0.0;
      for (std::size_t s = 0; s < r.size(); ++s) {
        double v = 0.0;
        for (double d : r.perturbations[s]) v += d * d;
        max_ssd = std::max(max_ssd, v);
        prob += r.probabilities[s];
        for (std::size_t l = 0; l < r.lags(); ++l) CHECK(r.demand(s, l) >= 0.0);
      }
      CHECK(max_ssd >= p90);
      CHECK(prob == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("scenario dump") {
  testutil::TempDir dir;
  const auto r = baseline_only({1.0, 2.0});
  write_scenario_csv(dir.path() / "s.csv", r);
  std::ifstream in(dir.path() / "s.csv");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text == "scenario_id,lag,perturbation_kwh\n0,0,0\n0,1,0\n");
}
