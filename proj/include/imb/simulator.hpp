#pragma once
// Closed-loop campaigns: a synthetic building fleet, a noisy day-ahead
// contract, and the predict -> scenarios -> optimize -> apply loop for the
// stochastic scheduler and its baselines.
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imb/core.hpp"
#include "imb/groupform.hpp"
#include "imb/predictor.hpp"
#include "imb/scengen.hpp"
#include "imb/scheduler.hpp"

namespace imb {

struct ClusterSpec {
  int count = 0;
  double base_scale_kwh = 0.0;  // peak of the daily profile
  double noise_dsd_kwh = 0.0;   // per-period noise std
};

inline constexpr const char* kDefaultFleetStart = "2013-01-01T00:00:00";

// One series per customer covering warmup_days + horizon_days at 30 minutes.
std::vector<DemandSeries> generate_synthetic_fleet(const std::vector<ClusterSpec>& clusters, int horizon_days,
                                                   std::uint64_t seed, int warmup_days = 20);

// Sp_i = max(0, Dm_i + e_i) with e_i ~ N(0, error_frac * Dm_i).
std::vector<double> make_contract(std::span<const double> actual, double error_frac, std::uint64_t seed);

struct CampaignConfig {
  int horizon_days = 14;
  int warmup_days = 20;
  std::vector<ClusterSpec> fleet{{57, 50.0, 5.1}};  // about 3% aggregate period noise
  GroupingParams grouping;
  int group_index = 0;  // formed groups are ordered by ascending DAC
  int window = 8;
  int scenario_space = 5000;
  int reduced_scenarios = 15;
  double contract_error_frac = 0.10;
  double threshold_frac = 0.03;  // of the largest contracted supply
  std::vector<double> prices{45.7, 15.0, 10.48, 0.0};
  double big_m = 1e7;
  double c0 = 0.1;
  double c1 = 1.0;
  // Negative: battery_bound_frac times the group's capacity bound.
  double battery_capacity_kwh = -1.0;
  double battery_bound_frac = 320.0 / 445.0;
  double power_ratio = 2.0;
  double soc_min_frac = 0.01;
  double soc_max_frac = 0.96;
  double round_trip_efficiency = 0.95;
  double initial_soc_frac = 0.5;
  // Empty: {0, 25, 50, 100, 200}% of the group's capacity bound.
  std::vector<double> sweep_capacities_kwh;
  PredictorConfig predictor;
  std::size_t node_limit = 100'000;
  std::uint64_t seed = 1;

  void validate() const;
};

// The simulated group: aggregated demand over warm-up and horizon, the
// contract, and the tariff derived from it.
struct CampaignData {
  DemandSeries demand;
  std::vector<double> supply;
  std::size_t sim_start = 0;
  std::size_t sim_end = 0;
  ImbalanceTariff tariff;
  std::vector<Group> groups;
  Group group;
  std::size_t periods() const { return sim_end - sim_start; }
};

// Predictions and reduced scenario sets for every simulated period. They
// depend only on the demand history, so all modes and sweep points share one.
struct ForecastTrack {
  std::vector<std::vector<double>> windows;
  std::vector<ScenarioSet> scenarios;
  std::vector<ForecastError> errors;
  std::vector<std::string> warnings;
  int clamped_lags = 0;
  double mape_pct = 0.0;
  double runtime_s = 0.0;
};

struct TraceRow {
  std::size_t period = 0;  // index into the campaign's demand series
  double sp = 0.0;
  double dm = 0.0;
  std::optional<double> pred;
  double p = 0.0;
  double soc = 0.0;  // after applying p
  double im = 0.0;
  double ic = 0.0;
  double cum_ic = 0.0;
};

struct SimulationTrace {
  std::string mode;
  double capacity_kwh = 0.0;
  double soc_start = 0.0;
  std::vector<TraceRow> rows;
  double total_cost = 0.0;
  double total_abs_imbalance = 0.0;
  double runtime_s = 0.0;
  std::size_t nodes = 0;
};

struct SweepPoint {
  double capacity_kwh = 0.0;
  double total_cost = 0.0;
  double pct_of_basic = 0.0;
};

// The synthetic fleet a campaign with this configuration simulates.
std::vector<DemandSeries> campaign_fleet(const CampaignConfig& config);

class CampaignError : public SolverError {
 public:
  CampaignError(const std::string& what, std::size_t period, std::string lp_text)
      : SolverError(what), period_(period), lp_text_(std::move(lp_text)) {}
  std::size_t period() const { return period_; }
  const std::string& lp_text() const { return lp_text_; }

 private:
  std::size_t period_;
  std::string lp_text_;
};

class Campaign {
 public:
  // Generates the fleet from the configured clusters and seed.
  explicit Campaign(CampaignConfig config);
  // Uses a given fleet; it must cover warmup_days + horizon_days.
  Campaign(CampaignConfig config, const std::vector<DemandSeries>& fleet, std::set<Date> holidays = {});

  const CampaignConfig& config() const { return config_; }
  const CampaignData& data() const { return data_; }
  // Built on first use.
  const ForecastTrack& track();
  bool has_track() const { return track_ != nullptr; }

  BatterySpec battery(double capacity_kwh) const;
  BatterySpec default_battery() const;
  std::vector<double> sweep_capacities() const;

  SimulationTrace run_sswcd(const BatterySpec& battery);
  SimulationTrace run_deterministic(const BatterySpec& battery);
  SimulationTrace run_no_battery();
  // Capacities ascending; each point runs run_sswcd at power_ratio x capacity.
  std::vector<SweepPoint> capacity_sweep(const std::vector<double>& capacities);

 private:
  SimulationTrace run_scheduled(const BatterySpec& battery, bool stochastic, std::string mode);

  CampaignConfig config_;
  std::set<Date> holidays_;
  CampaignData data_;
  std::unique_ptr<ForecastTrack> track_;
};

// `period,sp,dm,pred,p,soc,im,ic,cum_ic`
void write_trace_csv(const std::filesystem::path& path, const SimulationTrace& trace);
// {total_cost, basic_cost, reduction_pct, runtime_s}
void write_summary_json(const std::filesystem::path& path, const SimulationTrace& trace, double basic_cost);
// `capacity_kwh,pct_of_basic`
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points);

}  // namespace imb
