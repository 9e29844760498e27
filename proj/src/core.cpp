#include "imb/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "imb/io.hpp"
#include "imb/kernels.hpp"

namespace imb {

namespace {

int parse_int(std::string_view s, std::string_view what, const std::string& full) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError("bad " + std::string(what) + " in '" + full + "'");
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

Date parse_date(const std::string& text) {
  const std::string_view s = trim(text);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw ValidationError("bad date '" + text + "'");
  const std::chrono::year_month_day ymd{
      std::chrono::year{parse_int(s.substr(0, 4), "year", text)},
      std::chrono::month{static_cast<unsigned>(parse_int(s.substr(5, 2), "month", text))},
      std::chrono::day{static_cast<unsigned>(parse_int(s.substr(8, 2), "day", text))}};
  if (!ymd.ok()) throw ValidationError("invalid date '" + text + "'");
  return Date{ymd};
}

Timestamp parse_timestamp(const std::string& text) {
  const std::string_view s = trim(text);
  if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw ValidationError("bad timestamp '" + text + "'");
  const Date d = parse_date(std::string(s.substr(0, 10)));
  const int hh = parse_int(s.substr(11, 2), "hour", text);
  const int mm = parse_int(s.substr(14, 2), "minute", text);
  int ss = 0;
  if (s.size() > 16) {
    if (s.size() != 19 || s[16] != ':') throw ValidationError("bad timestamp '" + text + "'");
    ss = parse_int(s.substr(17, 2), "second", text);
  }
  if (hh > 23 || mm > 59 || ss > 59) throw ValidationError("bad time of day in '" + text + "'");
  return Timestamp{d} + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp ts) {
  const auto day = std::chrono::floor<std::chrono::days>(ts);
  const std::chrono::hh_mm_ss tod{ts - day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()));
  return format_date(day) + buf;
}

DemandSeries::DemandSeries(std::string customer_id, Timestamp start, int granularity_minutes,
                           std::vector<double> values)
    : customer_id_(std::move(customer_id)),
      start_(start),
      granularity_minutes_(granularity_minutes),
      values_(std::move(values)) {
  if (granularity_minutes_ <= 0 || 1440 % granularity_minutes_ != 0)
    throw ValidationError("granularity must divide a day, got " + std::to_string(granularity_minutes_));
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]) || values_[i] < 0.0)
      throw ValidationError("customer " + customer_id_ + ": value at index " + std::to_string(i) +
                            " is negative or not finite");
}

Timestamp DemandSeries::time_of(std::size_t index) const {
  return start_ + std::chrono::minutes{static_cast<long>(index) * granularity_minutes_};
}

int DemandSeries::period_of_day(std::size_t index) const {
  const auto ts = time_of(index);
  const auto since_midnight = ts - std::chrono::floor<std::chrono::days>(ts);
  return static_cast<int>(std::chrono::duration_cast<std::chrono::minutes>(since_midnight).count() /
                          granularity_minutes_);
}

int DemandSeries::day_of_week(std::size_t index) const {
  return static_cast<int>(std::chrono::weekday{date_of(index)}.iso_encoding()) - 1;
}

Date DemandSeries::date_of(std::size_t index) const {
  return std::chrono::floor<std::chrono::days>(time_of(index));
}

DemandSeries aggregate(const std::vector<DemandSeries>& members, std::string id) {
  if (members.empty()) throw ValidationError("cannot aggregate an empty group");
  const auto& first = members.front();
  std::vector<double> sum(first.size(), 0.0);
  for (const auto& m : members) {
    if (m.size() != first.size() || m.start() != first.start() ||
        m.granularity_minutes() != first.granularity_minutes())
      throw ValidationError("series " + m.customer_id() + " is not aligned with " + first.customer_id());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m.values()[i];
  }
  return DemandSeries(std::move(id), first.start(), first.granularity_minutes(), std::move(sum));
}

double ImbalanceTariff::segment_width(std::size_t k) const {
  const std::size_t h = half();
  const std::size_t depth = k < h ? h - 1 - k : k - h;
  if (depth + 1 < h) return threshold_kwh;
  return big_m - static_cast<double>(h - 1) * threshold_kwh;
}

void ImbalanceTariff::validate() const {
  if (prices.size() < 2 || prices.size() % 2 != 0)
    throw ValidationError("tariff needs an even number (>= 2) of price segments, got " +
                          std::to_string(prices.size()));
  if (!(threshold_kwh > 0.0) || !std::isfinite(threshold_kwh))
    throw ValidationError("tariff threshold must be positive");
  if (!(static_cast<double>(half() - 1) * threshold_kwh < big_m) || !(threshold_kwh < big_m))
    throw ValidationError("tariff big_m must exceed the threshold span");
  for (std::size_t k = 0; k < prices.size(); ++k) {
    if (!std::isfinite(prices[k])) throw ValidationError("tariff price is not finite");
    if (k > 0 && prices[k] > prices[k - 1])
      throw ValidationError("tariff prices must be non-increasing for a convex cost curve");
  }
}

double imbalance_cost(double im_kwh, const ImbalanceTariff& tariff) {
  const std::size_t h = tariff.half();
  double remaining = std::abs(im_kwh);
  double cost = 0.0;
  if (im_kwh < 0.0) {
    for (std::size_t d = 0; d < h && remaining > 0.0; ++d) {
      const std::size_t k = h - 1 - d;
      const double take = d + 1 == h ? remaining : std::min(remaining, tariff.segment_width(k));
      cost += tariff.prices[k] * take;
      remaining -= take;
    }
  } else {
    for (std::size_t d = 0; d < h && remaining > 0.0; ++d) {
      const std::size_t k = h + d;
      const double take = d + 1 == h ? remaining : std::min(remaining, tariff.segment_width(k));
      cost -= tariff.prices[k] * take;
      remaining -= take;
    }
  }
  return cost;
}

void BatterySpec::validate() const {
  auto bad = [](const std::string& m) { throw ValidationError("battery: " + m); };
  if (!(capacity_kwh >= 0.0) || !std::isfinite(capacity_kwh)) bad("capacity must be >= 0");
  if (!(power_charge_kw >= 0.0) || !(power_discharge_kw >= 0.0)) bad("power ratings must be >= 0");
  if (!(soc_min_frac >= 0.0 && soc_min_frac < soc_max_frac && soc_max_frac <= 1.0))
    bad("need 0 <= soc_min_frac < soc_max_frac <= 1");
  if (!(eta_charge > 0.0 && eta_charge <= 1.0) || !(eta_discharge > 0.0 && eta_discharge <= 1.0))
    bad("efficiencies must lie in (0, 1]");
  if (unit_count < 1) bad("unit_count must be >= 1");
}

BatterySpec BatterySpec::aggregated() const {
  BatterySpec out = *this;
  out.capacity_kwh = capacity_kwh * unit_count;
  out.power_charge_kw = power_charge_kw * unit_count;
  out.power_discharge_kw = power_discharge_kw * unit_count;
  out.unit_count = 1;
  return out;
}

DacVector::DacVector(std::vector<std::pair<std::string, double>> entries) : entries_(std::move(entries)) {
  for (const auto& [id, v] : entries_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("DAC of " + id + " must be finite and >= 0");
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
}

std::vector<double> DacVector::values() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

namespace {
void require_whole_days(const DemandSeries& s) {
  if (s.size() == 0) throw ValidationError("customer " + s.customer_id() + ": empty series");
  if (!s.whole_days())
    throw ValidationError("customer " + s.customer_id() + ": series does not span whole days (" +
                          std::to_string(s.size()) + " periods)");
}
}  // namespace

double compute_dsd(const DemandSeries& series, int period) {
  require_whole_days(series);
  const int n = series.periods_per_day();
  if (period < 0 || period >= n) throw ValidationError("period out of range: " + std::to_string(period));
  const std::size_t days = series.day_count();
  double mean = 0.0;
  for (std::size_t d = 0; d < days; ++d) mean += series.at(d, period);
  mean /= static_cast<double>(days);
  double ss = 0.0;
  for (std::size_t d = 0; d < days; ++d) ss += (series.at(d, period) - mean) * (series.at(d, period) - mean);
  return std::sqrt(ss / static_cast<double>(days));
}

double compute_mdsd(const DemandSeries& series) {
  require_whole_days(series);
  const auto stds = kernels::omp::period_stddev(series.values(), static_cast<std::size_t>(series.periods_per_day()));
  return *std::max_element(stds.begin(), stds.end());
}

std::vector<DemandSeries> load_demand_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open demand file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": missing header row");
  ++lineno;
  {
    const auto cols = split(line, ',');
    if (cols.size() != 3 || cols[0] != "timestamp" || cols[1] != "customer_id" || cols[2] != "kwh")
      throw ValidationError(path.string() + ":1: header must be 'timestamp,customer_id,kwh'");
  }
  struct Acc {
    std::vector<Timestamp> times;
    std::vector<double> values;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto cols = split(line, ',');
    if (cols.size() != 3) throw ValidationError(where + "expected 3 fields");
    Timestamp ts;
    try {
      ts = parse_timestamp(std::string(cols[0]));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    const std::string id(cols[1]);
    if (id.empty()) throw ValidationError(where + "empty customer_id");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), v);
    if (ec != std::errc{} || ptr != cols[2].data() + cols[2].size())
      throw ValidationError(where + "bad kwh value '" + std::string(cols[2]) + "'");
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(where + "kwh must be finite and >= 0");
    auto [it, inserted] = acc.try_emplace(id);
    if (inserted) order.push_back(id);
    auto& a = it->second;
    if (!a.times.empty() && ts <= a.times.back())
      throw ValidationError(where + "timestamps for " + id + " are not increasing");
    if (a.times.size() >= 2) {
      const auto step = a.times[1] - a.times[0];
      const auto diff = ts - a.times.back();
      if (diff != step) {
        if (diff > step && diff % step == std::chrono::seconds{0})
          throw ValidationError(where + "gap in " + id + ": missing " + format_timestamp(a.times.back() + step));
        throw ValidationError(where + "non-uniform granularity for " + id);
      }
    }
    a.times.push_back(ts);
    a.values.push_back(v);
  }
  std::vector<DemandSeries> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& a = acc[id];
    int gran = 30;
    if (a.times.size() >= 2) {
      const auto step = std::chrono::duration_cast<std::chrono::minutes>(a.times[1] - a.times[0]).count();
      if (step <= 0 || 1440 % step != 0)
        throw ValidationError(path.string() + ": granularity of " + id + " does not divide a day");
      gran = static_cast<int>(step);
    }
    out.emplace_back(id, a.times.front(), gran, std::move(a.values));
  }
  return out;
}

void write_demand_csv(const std::filesystem::path& path, const std::vector<DemandSeries>& fleet) {
  std::string text = "timestamp,customer_id,kwh\n";
  std::size_t len = 0;
  for (const auto& s : fleet) len = std::max(len, s.size());
  // Period-major so that rows read like a meter dump.
  for (std::size_t i = 0; i < len; ++i) {
    for (const auto& s : fleet) {
      if (i >= s.size()) continue;
      text += format_timestamp(s.time_of(i));
      text += ',';
      text += s.customer_id();
      text += ',';
      text += format_double(s.values()[i]);
      text += '\n';
    }
  }
  write_file_atomic(path, text);
}

std::set<Date> load_holidays(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open holiday file " + path.string());
  std::set<Date> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      out.insert(parse_date(std::string(t)));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace imb
