#pragma once

// Shared domain types: demand series and calendar, imbalance tariff,
// battery specification, and the demand-deviation statistics used to
// rank customers for group formation.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "imb/error.hpp"

namespace imb {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

// Parses "YYYY-MM-DDTHH:MM[:SS]" (a space is accepted instead of 'T').
// Timestamps are treated as naive local time.
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp ts);
Date parse_date(const std::string& text);
std::string format_date(Date d);

// Energy per period for one customer, starting at `start`.
class DemandSeries {
 public:
  DemandSeries() = default;
  DemandSeries(std::string customer_id, Timestamp start, int granularity_minutes,
               std::vector<double> values);

  const std::string& customer_id() const { return customer_id_; }
  Timestamp start() const { return start_; }
  int granularity_minutes() const { return granularity_minutes_; }
  int periods_per_day() const { return 1440 / granularity_minutes_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  // Whole days covered; partial trailing days are not counted.
  std::size_t day_count() const { return values_.size() / periods_per_day(); }
  bool whole_days() const { return values_.size() % periods_per_day() == 0; }

  double at(std::size_t day, int period) const {
    return values_[day * periods_per_day() + period];
  }

  Timestamp time_of(std::size_t index) const;
  // Period of day in [0, N).
  int period_of_day(std::size_t index) const;
  // 0 = Monday ... 6 = Sunday.
  int day_of_week(std::size_t index) const;
  Date date_of(std::size_t index) const;

 private:
  std::string customer_id_;
  Timestamp start_{};
  int granularity_minutes_ = 30;
  std::vector<double> values_;
};

// Element-wise sum of series sharing start and granularity.
DemandSeries aggregate(const std::vector<DemandSeries>& members, std::string id);

// Piecewise-linear convex imbalance tariff. Prices are ordered from the
// outermost shortage segment to the outermost surplus segment; the first
// half prices shortage (buying), the second half surplus (selling). Inner
// segments are `threshold_kwh` wide and the outermost segment on each side
// extends to `big_m`.
struct ImbalanceTariff {
  double threshold_kwh = 50.0;
  std::vector<double> prices{45.7, 15.0, 10.48, 0.0};
  double big_m = 1e7;

  std::size_t segment_count() const { return prices.size(); }
  std::size_t half() const { return prices.size() / 2; }
  // Width of segment k (0-based) on its own side of zero.
  double segment_width(std::size_t k) const;
  // Throws ValidationError unless the cost curve is convex and well formed.
  void validate() const;
};

// Imbalance cost in JPY for im = supply - demand - dispatch. Positive for
// shortage (buying), negative for surplus revenue.
double imbalance_cost(double im_kwh, const ImbalanceTariff& tariff);

struct BatterySpec {
  double capacity_kwh = 0.0;
  double power_charge_kw = 0.0;
  double power_discharge_kw = 0.0;
  double soc_min_frac = 0.01;
  double soc_max_frac = 0.96;
  double eta_charge = 1.0;
  double eta_discharge = 1.0;
  int unit_count = 1;

  double soc_min_kwh() const { return soc_min_frac * capacity_kwh * unit_count; }
  double soc_max_kwh() const { return soc_max_frac * capacity_kwh * unit_count; }

  void validate() const;
  // Folds unit_count synchronously operated units into one equivalent unit.
  BatterySpec aggregated() const;
  // SOC change for a signed per-period dispatch (+ charge, - discharge).
  double soc_delta(double dispatch_kwh) const {
    return dispatch_kwh >= 0.0 ? eta_charge * dispatch_kwh : dispatch_kwh / eta_discharge;
  }
};

// Customers sorted ascending by demand aggregation criterion.
class DacVector {
 public:
  DacVector() = default;
  // Sorts by value; equal values keep input order.
  explicit DacVector(std::vector<std::pair<std::string, double>> entries);

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  std::vector<double> values() const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

// Population standard deviation over days of the demand at one period.
double compute_dsd(const DemandSeries& series, int period);
// Maximum of compute_dsd over all periods of the day.
double compute_mdsd(const DemandSeries& series);

// Reads `timestamp,customer_id,kwh` rows, one series per customer.
std::vector<DemandSeries> load_demand_csv(const std::filesystem::path& path);
void write_demand_csv(const std::filesystem::path& path, const std::vector<DemandSeries>& fleet);
// One ISO date per line; blank lines and '#' comments are skipped.
std::set<Date> load_holidays(const std::filesystem::path& path);

}  // namespace imb
