#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>

#include "imb/config.hpp"
#include "imb/io.hpp"
#include "imb/lp_format.hpp"

namespace imb {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("--config", o.config, "key = value configuration file");
  cmd.add_option("--out", o.out, "output directory")->capture_default_str();
  cmd.add_option("--seed", o.seed, "master seed, overrides the configuration");
  cmd.add_option("--set", o.sets, "key=value override, repeatable")->allow_extra_args(false);
}

// Configuration file, then --set overrides in order, then --seed.
RunConfig resolve(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  for (const auto& s : o.sets) apply_override(c, s);
  if (o.seed) c.campaign.seed = *o.seed;
  c.campaign.validate();
  return c;
}

fs::path out_dir(const CommonOptions& o) {
  fs::path dir = o.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void cmd_form_groups(const CommonOptions& o, const std::string& demand_csv, std::ostream& out) {
  const RunConfig config = resolve(o);
  const auto fleet = load_demand_csv(demand_csv);
  if (fleet.empty()) throw ValidationError(demand_csv + ": no customers");
  std::vector<std::pair<std::string, double>> entries;
  for (const auto& s : fleet) entries.emplace_back(s.customer_id(), compute_mdsd(s));
  const DacVector dac(std::move(entries));

  std::vector<SplitRecord> records;
  const auto groups = form_groups(dac, config.campaign.grouping, config.campaign.seed, &records);

  const fs::path dir = out_dir(o);
  write_groups_json(dir / "groups.json", groups);
  for (const auto& r : records)
    write_posterior_csv(dir / ("posterior_" + std::to_string(r.start) + "_" + std::to_string(r.end) + ".csv"),
                        r.samples);
  std::string csv = "rank,customer_id,mdsd_kwh\n";
  for (std::size_t i = 0; i < dac.size(); ++i)
    csv += std::to_string(i + 1) + "," + dac.entries()[i].first + "," + format_double(dac.entries()[i].second) + "\n";
  write_file_atomic(dir / "dac.csv", csv);

  out << groups.size() << " groups from " << dac.size() << " customers\n";
  for (std::size_t g = 0; g < groups.size(); ++g)
    out << "  G" << g + 1 << ": customers " << groups[g].start << "-" << groups[g].end
        << ", expected DAC " << fixed(groups[g].expected_dac, 3) << " kWh\n";
}

Campaign make_campaign(const RunConfig& config) {
  if (config.demand_csv.empty()) return Campaign(config.campaign);
  std::set<Date> holidays;
  if (!config.holidays.empty()) holidays = load_holidays(config.holidays);
  return Campaign(config.campaign, load_demand_csv(config.demand_csv), std::move(holidays));
}

void report(std::ostream& out, const SimulationTrace& t, double basic) {
  const double reduction = basic != 0.0 ? 100.0 * (basic - t.total_cost) / basic : 0.0;
  out << t.mode << ": total_cost " << fixed(t.total_cost) << " JPY, basic_cost " << fixed(basic)
      << " JPY, reduction " << fixed(reduction) << "%, capacity " << fixed(t.capacity_kwh) << " kWh, runtime "
      << fixed(t.runtime_s) << " s\n";
}

void cmd_simulate(const CommonOptions& o, const std::string& mode, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve(o);
  const fs::path dir = out_dir(o);
  Campaign campaign = make_campaign(config);
  try {
    const SimulationTrace basic = campaign.run_no_battery();
    write_trace_csv(dir / "trace_nobattery.csv", basic);
    if (mode == "nobattery") {
      write_summary_json(dir / "summary_nobattery.json", basic, basic.total_cost);
      report(out, basic, basic.total_cost);
      return;
    }
    if (mode == "sweep") {
      const auto points = campaign.capacity_sweep(campaign.sweep_capacities());
      write_sweep_csv(dir / "sweep.csv", points);
      out << "sweep over " << points.size() << " capacities, basic_cost " << fixed(basic.total_cost) << " JPY\n";
      for (const auto& p : points)
        out << "  " << fixed(p.capacity_kwh) << " kWh: " << fixed(p.pct_of_basic) << "% of basic\n";
    } else {
      const BatterySpec battery = campaign.default_battery();
      const SimulationTrace t =
          mode == "sswcd" ? campaign.run_sswcd(battery) : campaign.run_deterministic(battery);
      write_trace_csv(dir / ("trace_" + mode + ".csv"), t);
      write_summary_json(dir / ("summary_" + mode + ".json"), t, basic.total_cost);
      report(out, t, basic.total_cost);
    }
    const ForecastTrack& track = campaign.track();
    write_error_log(dir / "forecast_errors.csv", track.errors);
    for (const auto& w : track.warnings) err << "warning: " << w << "\n";
    out << "forecast MAPE " << fixed(track.mape_pct) << "%\n";
  } catch (const CampaignError& e) {
    const fs::path dump = dir / "failed_window.lp";
    write_file_atomic(dump, e.lp_text());
    throw SolverError(std::string(e.what()) + " (window problem written to " + dump.string() + ")");
  }
}

void cmd_datagen(const CommonOptions& o, std::ostream& out) {
  const RunConfig config = resolve(o);
  const auto fleet = campaign_fleet(config.campaign);
  const fs::path dir = out_dir(o);
  write_demand_csv(dir / "demand.csv", fleet);
  out << "wrote " << fleet.size() << " customers x " << config.campaign.warmup_days + config.campaign.horizon_days
      << " days to " << (dir / "demand.csv").string() << "\n";
}

void cmd_solve(const CommonOptions& o, const std::string& problem_file, std::ostream& out) {
  const RunConfig config = resolve(o);
  const milp::LpFile file = milp::parse_lp(read_file(problem_file));
  milp::MilpOptions options;
  options.node_limit = config.campaign.node_limit;
  const milp::MilpSolution sol = milp::solve_milp(file.problem, options);
  out << "status: " << milp::to_string(sol.status) << "\n";
  const bool has_point = sol.status == milp::Status::Optimal || sol.has_incumbent;
  if (!has_point) return;
  out << "objective: " << format_double(file.maximize ? -sol.objective : sol.objective) << "\n";
  const auto& lp = file.problem.lp;
  for (int j = 0; j < lp.num_vars(); ++j) {
    const std::string& name = lp.name(j);
    out << (name.empty() ? "x" + std::to_string(j) : name) << " = " << format_double(sol.x[j]) << "\n";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Balancing group formation and stochastic battery scheduling", "imbsched"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string input;
  std::string mode = "sswcd";

  auto* form = app.add_subcommand("form-groups", "form balancing groups from a demand CSV");
  add_common(*form, common);
  form->add_option("demand_csv", input, "timestamp,customer_id,kwh file")->required();

  auto* sim = app.add_subcommand("simulate", "run a closed-loop campaign");
  add_common(*sim, common);
  sim->add_option("--mode", mode, "sswcd, deterministic, nobattery or sweep")
      ->check(CLI::IsMember({"sswcd", "deterministic", "nobattery", "sweep"}))
      ->capture_default_str();

  auto* gen = app.add_subcommand("datagen", "write a synthetic demand CSV");
  add_common(*gen, common);

  auto* solve = app.add_subcommand("solve", "solve an LP-format MILP");
  add_common(*solve, common);
  solve->add_option("problem", input, "LP text file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (form->parsed()) cmd_form_groups(common, input, out);
    else if (sim->parsed()) cmd_simulate(common, mode, out, err);
    else if (gen->parsed()) cmd_datagen(common, out);
    else cmd_solve(common, input, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace imb
