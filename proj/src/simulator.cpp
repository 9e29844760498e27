#include "imb/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <random>
#include <sstream>

#include "imb/io.hpp"
#include "imb/seed.hpp"

namespace imb {

namespace {

enum SeedLabel : std::uint64_t { kFleet = 1, kContract = 2, kGroups = 3, kPredictor = 4, kScenarios = 5 };

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Double-peak residential shape with its maximum near 1.
double daily_shape(double hour) {
  auto bump = [](double h, double centre, double width) {
    const double d = (h - centre) / width;
    return std::exp(-0.5 * d * d);
  };
  return 0.3 + 0.4 * bump(hour, 7.5, 1.0) + 0.7 * bump(hour, 19.5, 1.5);
}

// Midday dip applied on weekends.
double weekend_shape(double hour) {
  const double d = (hour - 12.0) / 4.0;
  return std::exp(-0.5 * d * d);
}

}  // namespace

std::vector<DemandSeries> generate_synthetic_fleet(const std::vector<ClusterSpec>& clusters, int horizon_days,
                                                   std::uint64_t seed, int warmup_days) {
  if (horizon_days < 0 || warmup_days < 0 || horizon_days + warmup_days < 1)
    throw ValidationError("fleet must cover at least one day");
  for (const auto& c : clusters)
    if (c.count < 0 || !(c.base_scale_kwh >= 0.0) || !(c.noise_dsd_kwh >= 0.0) || !std::isfinite(c.base_scale_kwh) ||
        !std::isfinite(c.noise_dsd_kwh))
      throw ValidationError("cluster spec needs count >= 0, scale >= 0 and noise >= 0");

  const Timestamp start = parse_timestamp(kDefaultFleetStart);
  const int n = 48;
  const int days = horizon_days + warmup_days;
  std::vector<DemandSeries> fleet;
  int customer = 0;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    for (int m = 0; m < clusters[k].count; ++m, ++customer) {
      std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(customer)}));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> jitter(0.9, 1.1);
      const double scale = clusters[k].base_scale_kwh * jitter(rng);
      const double noise = clusters[k].noise_dsd_kwh * jitter(rng);
      std::vector<double> values;
      values.reserve(static_cast<std::size_t>(days) * n);
      for (int d = 0; d < days; ++d) {
        const auto day = std::chrono::floor<std::chrono::days>(start) + std::chrono::days(d);
        const int dow = static_cast<int>(std::chrono::weekday(day).iso_encoding()) - 1;
        for (int p = 0; p < n; ++p) {
          const double hour = (p + 0.5) * 24.0 / n;
          double v = scale * daily_shape(hour);
          if (dow >= 5) v -= 0.5 * noise * weekend_shape(hour);
          v += noise * normal(rng);
          values.push_back(std::max(0.0, v));
        }
      }
      char id[32];
      std::snprintf(id, sizeof id, "c%03d", customer);
      fleet.emplace_back(id, start, 30, std::move(values));
    }
  }
  return fleet;
}

std::vector<double> make_contract(std::span<const double> actual, double error_frac, std::uint64_t seed) {
  if (!(error_frac >= 0.0) || !std::isfinite(error_frac)) throw ValidationError("contract error fraction must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sp(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = normal(rng);
    sp[i] = std::max(0.0, actual[i] + error_frac * actual[i] * e);
  }
  return sp;
}

void CampaignConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
  };
  require(horizon_days >= 1, "horizon_days must be >= 1");
  require(warmup_days >= 1, "warmup_days must be >= 1");
  require(window >= 1 && window <= 48, "window must be in [1, periods per day]");
  require(scenario_space >= 1, "scenario_space must be >= 1");
  require(reduced_scenarios >= 1 && reduced_scenarios <= scenario_space,
          "reduced_scenarios must be in [1, scenario_space]");
  require(contract_error_frac >= 0.0 && std::isfinite(contract_error_frac), "contract_error_frac must be >= 0");
  require(threshold_frac > 0.0 && std::isfinite(threshold_frac), "threshold_frac must be > 0");
  require(c0 >= 0.0 && c1 >= 0.0 && std::isfinite(c0) && std::isfinite(c1), "c0 and c1 must be >= 0");
  require(std::isfinite(battery_capacity_kwh), "battery_capacity_kwh must be finite");
  require(battery_bound_frac >= 0.0 && std::isfinite(battery_bound_frac), "battery_bound_frac must be >= 0");
  require(power_ratio >= 0.0 && std::isfinite(power_ratio), "power_ratio must be >= 0");
  require(round_trip_efficiency > 0.0 && round_trip_efficiency <= 1.0, "round_trip_efficiency must be in (0, 1]");
  require(initial_soc_frac >= soc_min_frac && initial_soc_frac <= soc_max_frac,
          "initial_soc_frac must lie within the SOC limits");
  require(group_index >= 0, "group_index must be >= 0");
  require(!fleet.empty(), "fleet needs at least one cluster");
  for (const auto& c : fleet)
    require(c.count >= 0 && c.base_scale_kwh >= 0.0 && c.noise_dsd_kwh >= 0.0, "invalid cluster spec");
  for (double c : sweep_capacities_kwh) require(c >= 0.0 && std::isfinite(c), "sweep capacities must be >= 0");
  require(std::is_sorted(sweep_capacities_kwh.begin(), sweep_capacities_kwh.end()),
          "sweep capacities must be ascending");
  require(predictor.window == window, "predictor window must equal the scheduling window");
  require(predictor.training_days <= warmup_days, "training_days must not exceed warmup_days");
  ImbalanceTariff t;
  t.prices = prices;
  t.big_m = big_m;
  t.validate();
  BatterySpec b;
  b.soc_min_frac = soc_min_frac;
  b.soc_max_frac = soc_max_frac;
  b.validate();
  grouping.validate();
  predictor.validate();
}

std::vector<DemandSeries> campaign_fleet(const CampaignConfig& config) {
  return generate_synthetic_fleet(config.fleet, config.horizon_days, derive_seed(config.seed, {kFleet}),
                                  config.warmup_days);
}

Campaign::Campaign(CampaignConfig config) : Campaign(config, campaign_fleet(config)) {}

Campaign::Campaign(CampaignConfig config, const std::vector<DemandSeries>& fleet, std::set<Date> holidays)
    : config_(std::move(config)), holidays_(std::move(holidays)) {
  config_.validate();
  if (fleet.empty()) throw ValidationError("fleet is empty");
  const int n = fleet.front().periods_per_day();
  if (n != 48) throw ValidationError("campaigns run at 30-minute granularity");
  const std::size_t warm = static_cast<std::size_t>(config_.warmup_days) * n;
  const std::size_t total = warm + static_cast<std::size_t>(config_.horizon_days) * n;
  for (const auto& s : fleet)
    if (s.size() < total)
      throw ValidationError("series " + s.customer_id() + " is shorter than warm-up plus horizon");

  // Groups are formed from the warm-up days.
  std::vector<std::pair<std::string, double>> dac;
  for (const auto& s : fleet) {
    std::vector<double> head(s.values().begin(), s.values().begin() + static_cast<std::ptrdiff_t>(warm));
    DemandSeries w(s.customer_id(), s.start(), s.granularity_minutes(), std::move(head));
    dac.emplace_back(s.customer_id(), compute_mdsd(w));
  }
  data_.groups = form_groups(DacVector(std::move(dac)), config_.grouping, derive_seed(config_.seed, {kGroups}));
  if (config_.group_index >= static_cast<int>(data_.groups.size()))
    throw ValidationError("group_index " + std::to_string(config_.group_index) + " but only " +
                          std::to_string(data_.groups.size()) + " groups were formed");
  data_.group = data_.groups[config_.group_index];

  std::vector<DemandSeries> members;
  for (const auto& id : data_.group.customer_ids) {
    const auto it = std::find_if(fleet.begin(), fleet.end(), [&](const DemandSeries& s) { return s.customer_id() == id; });
    std::vector<double> v(it->values().begin(), it->values().begin() + static_cast<std::ptrdiff_t>(total));
    members.emplace_back(it->customer_id(), it->start(), it->granularity_minutes(), std::move(v));
  }
  data_.demand = aggregate(members, "group" + std::to_string(config_.group_index + 1));
  data_.sim_start = warm;
  data_.sim_end = total;
  data_.supply = make_contract(data_.demand.values(), config_.contract_error_frac, derive_seed(config_.seed, {kContract}));

  double peak = 0.0;
  for (std::size_t t = data_.sim_start; t < data_.sim_end; ++t) peak = std::max(peak, data_.supply[t]);
  data_.tariff.prices = config_.prices;
  data_.tariff.big_m = config_.big_m;
  data_.tariff.threshold_kwh = std::max(config_.threshold_frac * peak, 1e-6);
  data_.tariff.validate();
}

BatterySpec Campaign::battery(double capacity_kwh) const {
  if (!(capacity_kwh >= 0.0) || !std::isfinite(capacity_kwh)) throw ValidationError("capacity must be >= 0");
  BatterySpec b;
  b.capacity_kwh = capacity_kwh;
  b.power_charge_kw = config_.power_ratio * capacity_kwh;
  b.power_discharge_kw = config_.power_ratio * capacity_kwh;
  b.soc_min_frac = config_.soc_min_frac;
  b.soc_max_frac = config_.soc_max_frac;
  b.eta_charge = std::sqrt(config_.round_trip_efficiency);
  b.eta_discharge = std::sqrt(config_.round_trip_efficiency);
  return b;
}

BatterySpec Campaign::default_battery() const {
  if (config_.battery_capacity_kwh >= 0.0) return battery(config_.battery_capacity_kwh);
  return battery(config_.battery_bound_frac * data_.group.capacity_bound);
}

std::vector<double> Campaign::sweep_capacities() const {
  if (!config_.sweep_capacities_kwh.empty()) return config_.sweep_capacities_kwh;
  std::vector<double> out;
  for (double f : {0.0, 0.25, 0.5, 1.0, 2.0}) out.push_back(f * data_.group.capacity_bound);
  return out;
}

const ForecastTrack& Campaign::track() {
  if (track_) return *track_;
  const auto t0 = std::chrono::steady_clock::now();
  auto tr = std::make_unique<ForecastTrack>();
  const auto& series = data_.demand;
  const auto& dm = series.values();
  const int n = series.periods_per_day();
  const int w = config_.window;
  const std::uint64_t pseed = derive_seed(config_.seed, {kPredictor});

  Predictor predictor(config_.predictor, holidays_);
  ErrorStats errors(w, 0.0);
  VariabilityStats variability;
  const std::size_t th = static_cast<std::size_t>(config_.predictor.training_days) * n;
  auto refresh_stats = [&](std::size_t t) {
    const std::size_t from = t >= th ? t - th : 0;
    variability = VariabilityStats::from_history(std::span<const double>(dm).subspan(from, t - from));
    double recent = 0.0;
    for (std::size_t i = t - n; i < t; ++i) recent += dm[i];
    errors.set_sigma_floor(0.05 * recent / n);
  };

  double ape = 0.0;
  std::size_t ape_count = 0;
  for (std::size_t t = data_.sim_start; t < data_.sim_end; ++t) {
    if (t == data_.sim_start) {
      predictor.train(series, t, pseed);
      refresh_stats(t);
    } else if (t % n == 0) {
      predictor.retrain_rolling(series, t, pseed);
      refresh_stats(t);
    }
    auto window = predictor.predict_window(series, t);
    const auto space = sample_space(errors, variability, config_.scenario_space, w,
                                    derive_seed(config_.seed, {kScenarios, t}));
    tr->clamped_lags += space.clamped_lags;
    tr->scenarios.push_back(reduce(space, window, config_.reduced_scenarios));
    tr->windows.push_back(std::move(window));

    // Demand at t is now observed: score every earlier forecast of it.
    const std::size_t k = t - data_.sim_start;
    for (int l = 0; l < w && static_cast<std::size_t>(l) <= k; ++l) {
      const double predicted = tr->windows[k - l][l];
      errors.update(l, dm[t], predicted);
      tr->errors.push_back(ForecastError{t, l, dm[t], predicted});
      if (dm[t] > 0.0) {
        ape += std::abs(dm[t] - predicted) / dm[t];
        ++ape_count;
      }
    }
  }
  tr->warnings = predictor.warnings();
  if (tr->clamped_lags > 0)
    tr->warnings.push_back("scenario covariance clamped for " + std::to_string(tr->clamped_lags) + " lag draws");
  tr->mape_pct = ape_count ? 100.0 * ape / ape_count : 0.0;
  tr->runtime_s = elapsed(t0);
  track_ = std::move(tr);
  return *track_;
}

SimulationTrace Campaign::run_no_battery() {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationTrace out;
  out.mode = "nobattery";
  double cum = 0.0;
  for (std::size_t t = data_.sim_start; t < data_.sim_end; ++t) {
    TraceRow r;
    r.period = t;
    r.sp = data_.supply[t];
    r.dm = data_.demand.values()[t];
    if (track_) r.pred = track_->windows[t - data_.sim_start][0];
    r.im = r.sp - r.dm;
    r.ic = imbalance_cost(r.im, data_.tariff);
    cum += r.ic;
    r.cum_ic = cum;
    out.total_abs_imbalance += std::abs(r.im);
    out.rows.push_back(r);
  }
  out.total_cost = cum;
  out.runtime_s = elapsed(t0);
  return out;
}

SimulationTrace Campaign::run_sswcd(const BatterySpec& battery) { return run_scheduled(battery, true, "sswcd"); }

SimulationTrace Campaign::run_deterministic(const BatterySpec& battery) {
  return run_scheduled(battery, false, "deterministic");
}

SimulationTrace Campaign::run_scheduled(const BatterySpec& spec, bool stochastic, std::string mode) {
  const auto& tr = track();
  const auto t0 = std::chrono::steady_clock::now();
  const BatterySpec battery = spec.aggregated();
  battery.validate();
  SimulationTrace out;
  out.mode = std::move(mode);
  out.capacity_kwh = battery.capacity_kwh;
  const double lo = battery.soc_min_kwh(), hi = battery.soc_max_kwh();
  double soc = config_.initial_soc_frac * battery.capacity_kwh;
  out.soc_start = soc;
  const bool idle = battery.capacity_kwh <= 0.0 ||
                    (battery.power_charge_kw <= 0.0 && battery.power_discharge_kw <= 0.0);

  double cum = 0.0;
  const auto& dm = data_.demand.values();
  for (std::size_t t = data_.sim_start; t < data_.sim_end; ++t) {
    const std::size_t k = t - data_.sim_start;
    const std::size_t w = std::min<std::size_t>(config_.window, data_.sim_end - t);
    double p = 0.0;
    if (!idle) {
      WindowInput in;
      in.supply.assign(data_.supply.begin() + t, data_.supply.begin() + t + w);
      const auto& full = stochastic ? tr.scenarios[k] : baseline_only(tr.windows[k]);
      in.scenarios.baseline.assign(full.baseline.begin(), full.baseline.begin() + w);
      in.scenarios.probabilities = full.probabilities;
      for (const auto& d : full.perturbations) in.scenarios.perturbations.emplace_back(d.begin(), d.begin() + w);
      in.battery = battery;
      in.soc_now = soc;
      in.tariff = data_.tariff;
      in.c0 = config_.c0;
      in.c1 = config_.c1;
      SolveOptions so;
      so.node_limit = config_.node_limit;
      try {
        auto decision = solve_window(in, so);
        p = decision.p_first;
        out.nodes += decision.solution.nodes;
      } catch (const WindowSolveError& e) {
        throw CampaignError(std::string(e.what()) + " at period " + std::to_string(t), t, e.lp_text());
      }
    }
    // Land exactly on the SOC limit if rounding pushed the dispatch past it.
    if (soc + battery.soc_delta(p) > hi) p = (hi - soc) / battery.eta_charge;
    if (soc + battery.soc_delta(p) < lo) p = (lo - soc) * battery.eta_discharge;
    soc += battery.soc_delta(p);

    TraceRow r;
    r.period = t;
    r.sp = data_.supply[t];
    r.dm = dm[t];
    r.pred = tr.windows[k][0];
    r.p = p;
    r.soc = soc;
    r.im = r.sp - r.dm - p;
    r.ic = imbalance_cost(r.im, data_.tariff);
    cum += r.ic;
    r.cum_ic = cum;
    out.total_abs_imbalance += std::abs(r.im);
    out.rows.push_back(r);
  }
  out.total_cost = cum;
  out.runtime_s = elapsed(t0);
  return out;
}

std::vector<SweepPoint> Campaign::capacity_sweep(const std::vector<double>& capacities) {
  if (!std::is_sorted(capacities.begin(), capacities.end()))
    throw ValidationError("sweep capacities must be ascending");
  track();
  const double basic = run_no_battery().total_cost;
  std::vector<SweepPoint> out(capacities.size());
  std::vector<std::exception_ptr> failures(capacities.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < capacities.size(); ++i) {
    try {
      const auto trace = run_scheduled(battery(capacities[i]), true, "sswcd");
      out[i] = SweepPoint{capacities[i], trace.total_cost, basic != 0.0 ? 100.0 * trace.total_cost / basic : 100.0};
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const SimulationTrace& trace) {
  std::ostringstream os;
  os << "period,sp,dm,pred,p,soc,im,ic,cum_ic\n";
  for (const auto& r : trace.rows) {
    os << r.period << ',' << format_double(r.sp) << ',' << format_double(r.dm) << ','
       << (r.pred ? format_double(*r.pred) : std::string()) << ',' << format_double(r.p) << ','
       << format_double(r.soc) << ',' << format_double(r.im) << ',' << format_double(r.ic) << ','
       << format_double(r.cum_ic) << '\n';
  }
  write_file_atomic(path, os.str());
}

void write_summary_json(const std::filesystem::path& path, const SimulationTrace& trace, double basic_cost) {
  nlohmann::json j;
  j["mode"] = trace.mode;
  j["total_cost"] = trace.total_cost;
  j["basic_cost"] = basic_cost;
  j["reduction_pct"] = basic_cost != 0.0 ? 100.0 * (basic_cost - trace.total_cost) / basic_cost : 0.0;
  j["runtime_s"] = trace.runtime_s;
  write_file_atomic(path, j.dump(2) + "\n");
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "capacity_kwh,pct_of_basic\n";
  for (const auto& p : points) os << format_double(p.capacity_kwh) << ',' << format_double(p.pct_of_basic) << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace imb
