#include "imb/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <functional>
#include <sstream>

#include "imb/io.hpp"

namespace imb {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto at = s.find(sep);
    out.push_back(trim(s.substr(0, at)));
    if (at == std::string_view::npos) return out;
    s.remove_prefix(at + 1);
  }
}

struct Range {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    if (lo_open ? !(v > lo) : !(v >= lo)) return false;
    if (hi_open ? !(v < hi) : !(v <= hi)) return false;
    return true;
  }
  std::string describe() const {
    std::ostringstream os;
    os << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
    return os.str();
  }
};

const Range kNonNegative{0.0};
const Range kPositive{0.0, std::numeric_limits<double>::infinity(), true};
const Range kFraction{0.0, 1.0};

double parse_number(std::string_view text, const Range& range) {
  text = trim(text);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    throw ValidationError("'" + std::string(text) + "' is not a number");
  if (!range.contains(v)) throw ValidationError(std::string(text) + " is outside " + range.describe());
  return v;
}

long long parse_integer(std::string_view text, long long lo, long long hi) {
  text = trim(text);
  long long v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size())
    throw ValidationError("'" + std::string(text) + "' is not an integer");
  if (v < lo || v > hi)
    throw ValidationError(std::string(text) + " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

std::uint64_t parse_seed(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size())
    throw ValidationError("'" + std::string(text) + "' is not a non-negative integer");
  return v;
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ValidationError("'" + std::string(text) + "' is not a boolean");
}

std::vector<double> parse_list(std::string_view text, const Range& range, bool allow_empty = false) {
  std::vector<double> out;
  if (trim(text).empty()) {
    if (allow_empty) return out;
    throw ValidationError("list is empty");
  }
  for (auto item : split(text, ',')) out.push_back(parse_number(item, range));
  return out;
}

std::string render_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::vector<ClusterSpec> parse_clusters(std::string_view text) {
  std::vector<ClusterSpec> out;
  for (auto item : split(text, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 3) throw ValidationError("cluster '" + std::string(item) + "' must be count:scale_kwh:noise_kwh");
    out.push_back({static_cast<int>(parse_integer(f[0], 1, 100000)), parse_number(f[1], kNonNegative),
                   parse_number(f[2], kNonNegative)});
  }
  return out;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
std::string num(T v) {
  if constexpr (std::is_floating_point_v<T>)
    return format_double(v);
  else
    return std::to_string(v);
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    auto integer = [&t](const char* key, auto member, long long lo, long long hi) {
      t.push_back({key, [=](RunConfig& c, std::string_view v) { member(c) = static_cast<int>(parse_integer(v, lo, hi)); },
                   [=](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }});
    };
    auto number = [&t](const char* key, auto member, Range r) {
      t.push_back({key, [=](RunConfig& c, std::string_view v) { member(c) = parse_number(v, r); },
                   [=](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }});
    };
    auto list = [&t](const char* key, auto member, Range r) {
      t.push_back({key, [=](RunConfig& c, std::string_view v) { member(c) = parse_list(v, r); },
                   [=](const RunConfig& c) { return render_list(member(const_cast<RunConfig&>(c))); }});
    };

    t.push_back({"seed", [](RunConfig& c, std::string_view v) { c.campaign.seed = parse_seed(v); },
                 [](const RunConfig& c) { return std::to_string(c.campaign.seed); }});
    integer("horizon_days", [](RunConfig& c) -> int& { return c.campaign.horizon_days; }, 1, 3650);
    integer("warmup_days", [](RunConfig& c) -> int& { return c.campaign.warmup_days; }, 1, 3650);
    t.push_back({"fleet.clusters", [](RunConfig& c, std::string_view v) { c.campaign.fleet = parse_clusters(v); },
                 [](const RunConfig& c) {
                   std::string out;
                   for (const auto& k : c.campaign.fleet)
                     out += (out.empty() ? "" : ",") + std::to_string(k.count) + ":" + format_double(k.base_scale_kwh) +
                            ":" + format_double(k.noise_dsd_kwh);
                   return out;
                 }});
    t.push_back({"fleet.csv", [](RunConfig& c, std::string_view v) { c.demand_csv = std::string(trim(v)); },
                 [](const RunConfig& c) { return c.demand_csv.string(); }});
    t.push_back({"holidays", [](RunConfig& c, std::string_view v) { c.holidays = std::string(trim(v)); },
                 [](const RunConfig& c) { return c.holidays.string(); }});
    integer("group.index", [](RunConfig& c) -> int& { return c.campaign.group_index; }, 0, 1000000);
    number("grouping.beta", [](RunConfig& c) -> double& { return c.campaign.grouping.beta; }, kPositive);
    number("grouping.threshold", [](RunConfig& c) -> double& { return c.campaign.grouping.threshold; }, kPositive);
    integer("grouping.min_group_size", [](RunConfig& c) -> int& { return c.campaign.grouping.min_group_size; }, 1,
            1000000);
    integer("mcmc.iterations", [](RunConfig& c) -> int& { return c.campaign.grouping.mcmc.iterations; }, 1,
            100000000);
    number("mcmc.burn_in_frac", [](RunConfig& c) -> double& { return c.campaign.grouping.mcmc.burn_in_frac; },
           Range{0.0, 1.0, false, true});
    number("mcmc.log_step", [](RunConfig& c) -> double& { return c.campaign.grouping.mcmc.log_step; }, kPositive);
    t.push_back({"window",
                 [](RunConfig& c, std::string_view v) {
                   c.campaign.window = static_cast<int>(parse_integer(v, 1, 48));
                   c.campaign.predictor.window = c.campaign.window;
                 },
                 [](const RunConfig& c) { return std::to_string(c.campaign.window); }});
    integer("scenarios.space", [](RunConfig& c) -> int& { return c.campaign.scenario_space; }, 1, 10000000);
    integer("scenarios.reduced", [](RunConfig& c) -> int& { return c.campaign.reduced_scenarios; }, 1, 100000);
    number("contract.error_frac", [](RunConfig& c) -> double& { return c.campaign.contract_error_frac; },
           kNonNegative);
    number("tariff.threshold_frac", [](RunConfig& c) -> double& { return c.campaign.threshold_frac; }, kPositive);
    list("tariff.prices", [](RunConfig& c) -> std::vector<double>& { return c.campaign.prices; }, Range{});
    number("tariff.big_m", [](RunConfig& c) -> double& { return c.campaign.big_m; }, kPositive);
    number("weights.c0", [](RunConfig& c) -> double& { return c.campaign.c0; }, kNonNegative);
    number("weights.c1", [](RunConfig& c) -> double& { return c.campaign.c1; }, kNonNegative);
    t.push_back({"battery.capacity_kwh",
                 [](RunConfig& c, std::string_view v) {
                   c.campaign.battery_capacity_kwh = trim(v) == "auto" ? -1.0 : parse_number(v, kNonNegative);
                 },
                 [](const RunConfig& c) {
                   return c.campaign.battery_capacity_kwh < 0.0 ? std::string("auto")
                                                                : format_double(c.campaign.battery_capacity_kwh);
                 }});
    number("battery.bound_frac", [](RunConfig& c) -> double& { return c.campaign.battery_bound_frac; }, kNonNegative);
    number("battery.power_ratio", [](RunConfig& c) -> double& { return c.campaign.power_ratio; }, kNonNegative);
    number("battery.soc_min_frac", [](RunConfig& c) -> double& { return c.campaign.soc_min_frac; }, kFraction);
    number("battery.soc_max_frac", [](RunConfig& c) -> double& { return c.campaign.soc_max_frac; }, kFraction);
    number("battery.round_trip_efficiency", [](RunConfig& c) -> double& { return c.campaign.round_trip_efficiency; },
           Range{0.0, 1.0, true, false});
    number("battery.initial_soc_frac", [](RunConfig& c) -> double& { return c.campaign.initial_soc_frac; },
           kFraction);
    t.push_back({"sweep.capacities_kwh",
                 [](RunConfig& c, std::string_view v) {
                   c.campaign.sweep_capacities_kwh =
                       trim(v) == "auto" ? std::vector<double>{} : parse_list(v, kNonNegative);
                   if (!std::is_sorted(c.campaign.sweep_capacities_kwh.begin(), c.campaign.sweep_capacities_kwh.end()))
                     throw ValidationError("capacities must be ascending");
                 },
                 [](const RunConfig& c) {
                   return c.campaign.sweep_capacities_kwh.empty() ? std::string("auto")
                                                                  : render_list(c.campaign.sweep_capacities_kwh);
                 }});
    integer("svr.np", [](RunConfig& c) -> int& { return c.campaign.predictor.np; }, 1, 10000);
    integer("svr.training_days", [](RunConfig& c) -> int& { return c.campaign.predictor.training_days; }, 1, 3650);
    integer("svr.cv_folds", [](RunConfig& c) -> int& { return c.campaign.predictor.cv_folds; }, 2, 100);
    list("svr.c", [](RunConfig& c) -> std::vector<double>& { return c.campaign.predictor.grid.c; }, kPositive);
    list("svr.gamma", [](RunConfig& c) -> std::vector<double>& { return c.campaign.predictor.grid.gamma_times_features; },
         kPositive);
    list("svr.epsilon", [](RunConfig& c) -> std::vector<double>& { return c.campaign.predictor.grid.epsilon_frac; },
         kNonNegative);
    t.push_back({"svr.regrid_on_retrain",
                 [](RunConfig& c, std::string_view v) { c.campaign.predictor.regrid_on_retrain = parse_bool(v); },
                 [](const RunConfig& c) { return std::string(c.campaign.predictor.regrid_on_retrain ? "true" : "false"); }});
    number("svr.tolerance", [](RunConfig& c) -> double& { return c.campaign.predictor.solver.tolerance; }, kPositive);
    integer("svr.max_iterations", [](RunConfig& c) -> int& { return c.campaign.predictor.solver.max_iterations; }, 1,
            1000000000);
    t.push_back({"solver.node_limit",
                 [](RunConfig& c, std::string_view v) {
                   c.campaign.node_limit = static_cast<std::size_t>(parse_integer(v, 1, 1000000000));
                 },
                 [](const RunConfig& c) { return std::to_string(c.campaign.node_limit); }});
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value, const std::string& where) {
  key = trim(key);
  for (const auto& e : entries()) {
    if (key != e.key) continue;
    try {
      e.set(config, value);
    } catch (const ValidationError& err) {
      throw ValidationError(where + ": " + std::string(key) + ": " + err.what());
    }
    return;
  }
  throw ValidationError(where + ": unknown key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + " line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + ": expected key = value");
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1), where);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  apply_config_text(c, read_file(path), path.string());
  return c;
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ValidationError("--set " + std::string(assignment) + ": expected key=value");
  apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1), "--set");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.emplace_back(e.key);
  return out;
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += std::string(e.key) + " = " + e.get(config) + "\n";
  return out;
}

}  // namespace imb
