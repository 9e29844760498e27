#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <sstream>

#include "cli.hpp"
#include "imb/config.hpp"
#include "imb/io.hpp"
#include "imb/lp_format.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace imb;
using testutil::TempDir;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// A tiny campaign that runs in well under a second.
std::vector<std::string> small_campaign() {
  return {"--set", "horizon_days=1",      "--set", "warmup_days=3",       "--set", "svr.training_days=2",
          "--set", "fleet.clusters=12:50:3", "--set", "window=4",         "--set", "scenarios.space=200",
          "--set", "scenarios.reduced=4", "--set", "svr.c=10",            "--set", "svr.gamma=0.1",
          "--set", "svr.epsilon=0.01",    "--set", "mcmc.iterations=4000", "--set", "seed=11"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults render and re-parse to the same text") {
    RunConfig c;
    const std::string text = render_config(c);
    RunConfig d;
    apply_config_text(d, text, "rendered");
    CHECK(render_config(d) == text);
    CHECK(count_lines(text) == config_keys().size());
  }
  SUBCASE("comments, blanks and whitespace") {
    RunConfig c;
    apply_config_text(c, "# campaign\n\n  seed = 42   # trailing\nhorizon_days=3\r\nwindow = 6\n", "cfg");
    CHECK(c.campaign.seed == 42);
    CHECK(c.campaign.horizon_days == 3);
    CHECK(c.campaign.window == 6);
    CHECK(c.campaign.predictor.window == 6);
  }
  SUBCASE("lists and clusters") {
    RunConfig c;
    apply_config_text(c, "tariff.prices = 50, 20, 5, -1\nfleet.clusters = 10:30:2, 5:80:9\n", "cfg");
    CHECK(c.campaign.prices == std::vector<double>{50, 20, 5, -1});
    REQUIRE(c.campaign.fleet.size() == 2);
    CHECK(c.campaign.fleet[1].count == 5);
    CHECK(c.campaign.fleet[1].noise_dsd_kwh == 9.0);
  }
  SUBCASE("battery capacity auto") {
    RunConfig c;
    apply_override(c, "battery.capacity_kwh=120");
    CHECK(c.campaign.battery_capacity_kwh == 120.0);
    apply_override(c, "battery.capacity_kwh=auto");
    CHECK(c.campaign.battery_capacity_kwh < 0.0);
  }
  SUBCASE("errors name the line and key") {
    RunConfig c;
    auto message = [&](const std::string& text) {
      try {
        apply_config_text(c, text, "run.cfg");
      } catch (const ValidationError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("seed = 1\nnope = 3\n").find("run.cfg line 2: unknown key 'nope'") != std::string::npos);
    CHECK(message("window = 0\n").find("line 1: window:") != std::string::npos);
    CHECK(message("weights.c0 = -1\n").find("weights.c0") != std::string::npos);
    CHECK(message("battery.soc_max_frac = 1.5\n").find("battery.soc_max_frac") != std::string::npos);
    CHECK(message("svr.c = 1,,2\n").find("svr.c") != std::string::npos);
    CHECK(message("seed 4\n").find("expected key = value") != std::string::npos);
    CHECK(message("horizon_days = 2.5\n").find("not an integer") != std::string::npos);
    CHECK(message("fleet.clusters = 10:30\n").find("count:scale_kwh:noise_kwh") != std::string::npos);
    CHECK(message("sweep.capacities_kwh = 10, 5\n").find("ascending") != std::string::npos);
  }
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitInvalid);
  CHECK(cli({"frobnicate"}).code == kExitInvalid);
  CHECK(cli({"simulate", "--mode", "fast"}).code == kExitInvalid);
  CHECK(cli({"--help"}).code == kExitOk);
  const Run r = cli({"datagen", "--set", "no.such.key=1"});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("no.such.key") != std::string::npos);
}

TEST_CASE("datagen") {
  TempDir tmp;
  const auto dir = tmp.path() / "a";
  const Run r = cli({"datagen", "--out", dir.string(), "--set", "fleet.clusters=20:40:4", "--set",
                     "horizon_days=14", "--set", "warmup_days=20", "--seed", "5"});
  REQUIRE(r.code == kExitOk);
  const std::string text = read_file(dir / "demand.csv");
  CHECK(count_lines(text) == 1 + 20 * 34 * 48);

  SUBCASE("round trip matches the campaign fleet") {
    RunConfig c;
    apply_override(c, "fleet.clusters=20:40:4");
    c.campaign.seed = 5;
    const auto expected = campaign_fleet(c.campaign);
    const auto loaded = load_demand_csv(dir / "demand.csv");
    REQUIRE(loaded.size() == expected.size());
    for (std::size_t k = 0; k < loaded.size(); ++k) {
      CHECK(loaded[k].customer_id() == expected[k].customer_id());
      CHECK(loaded[k].values() == expected[k].values());
    }
  }
  SUBCASE("same seed gives identical bytes") {
    const auto dir2 = tmp.path() / "b";
    REQUIRE(cli({"datagen", "--out", dir2.string(), "--set", "fleet.clusters=20:40:4", "--seed", "5"}).code ==
            kExitOk);
    CHECK(read_file(dir2 / "demand.csv") == text);
  }
  SUBCASE("invalid cluster spec") {
    CHECK(cli({"datagen", "--out", dir.string(), "--set", "fleet.clusters=0:40:4"}).code == kExitInvalid);
    CHECK(cli({"datagen", "--out", dir.string(), "--set", "fleet.clusters=3:-1:4"}).code == kExitInvalid);
  }
}

TEST_CASE("form-groups") {
  TempDir tmp;
  SUBCASE("two planted clusters give two groups") {
    const auto data = tmp.path() / "data";
    REQUIRE(cli({"datagen", "--out", data.string(), "--set", "fleet.clusters=8:30:1,8:80:12", "--set",
                 "horizon_days=1", "--set", "warmup_days=6", "--set", "svr.training_days=5"})
                .code == kExitOk);
    const auto out = tmp.path() / "groups";
    const Run r = cli({"form-groups", (data / "demand.csv").string(), "--out", out.string(), "--set",
                       "mcmc.iterations=20000", "--set", "grouping.min_group_size=4"});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(read_file(out / "groups.json"));
    REQUIRE(j.size() == 2);
    CHECK(j[0]["start"] == 1);
    CHECK(j[0]["end"] == 8);
    CHECK(j[1]["end"] == 16);
    CHECK(std::filesystem::exists(out / "posterior_1_16.csv"));
    CHECK(count_lines(read_file(out / "dac.csv")) == 17);
    CHECK(r.out.find("2 groups from 16 customers") != std::string::npos);
  }
  SUBCASE("a single customer is one group") {
    std::string csv = "timestamp,customer_id,kwh\n";
    for (int p = 0; p < 96; ++p) {
      char ts[32];
      std::snprintf(ts, sizeof ts, "2013-01-%02dT%02d:%02d:00", 1 + p / 48, (p % 48) / 2, (p % 2) * 30);
      csv += std::string(ts) + ",solo," + std::to_string(1.0 + p % 5) + "\n";
    }
    const auto file = tmp.write("one.csv", csv);
    const Run r = cli({"form-groups", file.string(), "--out", (tmp.path() / "o").string()});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(read_file(tmp.path() / "o" / "groups.json"));
    REQUIRE(j.size() == 1);
    CHECK(j[0]["customer_ids"][0] == "solo");
  }
  SUBCASE("missing file") {
    const Run r = cli({"form-groups", (tmp.path() / "absent.csv").string(), "--out", tmp.path().string()});
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("absent.csv") != std::string::npos);
  }
}

TEST_CASE("simulate") {
  TempDir tmp;
  const auto base = small_campaign();

  SUBCASE("exact contract costs nothing") {
    const auto dir = tmp.path() / "z";
    const Run r = cli(concat({"simulate", "--mode", "nobattery", "--out", dir.string(), "--set",
                              "contract.error_frac=0"},
                             base));
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(read_file(dir / "summary_nobattery.json"));
    CHECK(j["total_cost"] == 0.0);
    CHECK(j["mode"] == "nobattery");
  }
  SUBCASE("sweep writes one row per capacity") {
    const auto dir = tmp.path() / "s";
    const Run r = cli(concat({"simulate", "--mode", "sweep", "--out", dir.string(), "--set",
                              "sweep.capacities_kwh=0,80,160,320"},
                             base));
    REQUIRE(r.code == kExitOk);
    const std::string csv = read_file(dir / "sweep.csv");
    CHECK(count_lines(csv) == 5);
    CHECK(csv.rfind("capacity_kwh,pct_of_basic\n0,100\n80,", 0) == 0);
  }
  SUBCASE("scheduled modes write traces, summaries and forecast errors") {
    const auto dir = tmp.path() / "m";
    for (const char* mode : {"sswcd", "deterministic"}) {
      const Run r = cli(concat({"simulate", "--mode", mode, "--out", dir.string()}, base));
      REQUIRE(r.code == kExitOk);
      CHECK(r.out.rfind(std::string(mode) + ": total_cost ", 0) == 0);
      const auto j = nlohmann::json::parse(read_file(dir / ("summary_" + std::string(mode) + ".json")));
      const double basic = j["basic_cost"];
      const double total = j["total_cost"];
      CHECK(double(j["reduction_pct"]) == doctest::Approx(100.0 * (basic - total) / basic));
      CHECK(count_lines(read_file(dir / ("trace_" + std::string(mode) + ".csv"))) == 1 + 48);
    }
    CHECK(read_file(dir / "forecast_errors.csv").rfind("period,lag,actual,predicted,error\n", 0) == 0);
  }
  SUBCASE("identical inputs give identical outputs") {
    const auto a = tmp.path() / "a";
    const auto b = tmp.path() / "b";
    REQUIRE(cli(concat({"simulate", "--out", a.string()}, base)).code == kExitOk);
    REQUIRE(cli(concat({"simulate", "--out", b.string()}, base)).code == kExitOk);
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
      const auto name = entry.path().filename();
      if (name.extension() == ".json") {
        auto ja = nlohmann::json::parse(read_file(a / name));
        auto jb = nlohmann::json::parse(read_file(b / name));
        ja.erase("runtime_s");
        jb.erase("runtime_s");
        CHECK(ja == jb);
      } else {
        CHECK_MESSAGE(read_file(a / name) == read_file(b / name), name.string());
      }
    }
  }
  SUBCASE("config file with overrides and seed flag") {
    const auto cfg = tmp.write("run.cfg", "seed = 3\ncontract.error_frac = 0\n");
    const auto dir = tmp.path() / "c";
    const Run r = cli(concat({"simulate", "--mode", "nobattery", "--config", cfg.string(), "--seed", "11", "--out",
                              dir.string()},
                             base));
    REQUIRE(r.code == kExitOk);
    CHECK(nlohmann::json::parse(read_file(dir / "summary_nobattery.json"))["total_cost"] == 0.0);
  }
  SUBCASE("solver failure exits 3 and dumps the window") {
    const auto dir = tmp.path() / "f";
    const Run r = cli(concat({"simulate", "--out", dir.string(), "--set", "solver.node_limit=1"}, base));
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("failed_window.lp") != std::string::npos);
    const std::string lp = read_file(dir / "failed_window.lp");
    CHECK(lp.find("Subject To") != std::string::npos);
    CHECK_NOTHROW(milp::parse_lp(lp));
  }
}

TEST_CASE("solve") {
  TempDir tmp;
  SUBCASE("knapsack matches brute force") {
    const std::vector<double> value{12, 7, 11, 8, 9, 6, 14, 5, 10, 4};
    const std::vector<double> weight{4, 2, 6, 3, 5, 1, 7, 2, 5, 3};
    const std::string lp = oracle::knapsack_lp(value, weight, 17);
    const double best = oracle::knapsack_enumerate(value, weight, 17);

    const Run r = cli({"solve", tmp.write("knap.lp", lp).string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.rfind("status: optimal\nobjective: ", 0) == 0);
    const double objective = std::stod(r.out.substr(r.out.find("objective: ") + 11));
    CHECK(objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(r.out.find("x0 = ") != std::string::npos);
  }
  SUBCASE("infeasible problem exits cleanly") {
    const Run r = cli({"solve", tmp.write("inf.lp", "Minimize\n obj: x\nSubject To\n c1: x >= 2\nBounds\n x <= 1\nEnd\n")
                                    .string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "status: infeasible\n");
  }
  SUBCASE("empty or malformed files") {
    CHECK(cli({"solve", tmp.write("empty.lp", "").string()}).code == kExitInvalid);
    const Run r = cli({"solve", tmp.write("bad.lp", "Minimize\n obj: x +\nSubject To\nEnd\n").string()});
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("LP line") != std::string::npos);
  }
}
