#include "imb/scengen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "imb/error.hpp"
#include "imb/io.hpp"

namespace imb {

ErrorStats::ErrorStats(int lags, double sigma_floor) : tracks_(lags), sigma_floor_(sigma_floor) {
  if (lags < 1) throw ValidationError("error statistics need at least one lag");
  if (!(sigma_floor >= 0.0)) throw ValidationError("sigma floor must be >= 0");
}

void ErrorStats::update(int lag, double actual, double predicted) {
  if (lag < 0 || lag >= lags()) throw ValidationError("lag " + std::to_string(lag) + " out of range");
  auto& t = tracks_[lag];
  const double e = actual - predicted;
  ++t.n;
  const double d = e - t.mean;
  t.mean += d / static_cast<double>(t.n);
  t.m2 += d * (e - t.mean);
}

double ErrorStats::mean(int lag) const { return tracks_.at(lag).mean; }

double ErrorStats::stddev(int lag) const {
  const auto& t = tracks_.at(lag);
  if (t.n < 2) return sigma_floor_;
  return std::sqrt(std::max(0.0, t.m2 / static_cast<double>(t.n)));
}

VariabilityStats VariabilityStats::from_history(std::span<const double> demand) {
  VariabilityStats v;
  if (demand.size() < 2) return v;
  const std::size_t n = demand.size() - 1;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = demand[i + 1] - demand[i];
    const double d = x - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (x - mean);
  }
  v.mean = mean;
  v.stddev = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
  return v;
}

Covariance2 build_covariance(double sigma_error, double sigma_variability) {
  if (!(sigma_error >= 0.0) || !(sigma_variability >= 0.0)) throw ValidationError("standard deviations must be >= 0");
  Covariance2 c;
  c.diag = sigma_error * sigma_error;
  c.off = sigma_variability * sigma_variability;
  if (c.off > c.diag) {
    c.off = 0.999 * c.diag;
    c.clamped = true;
  }
  return c;
}

PerturbationSpace sample_space(const ErrorStats& errors, const VariabilityStats& variability, int n_space,
                               int lags, std::uint64_t seed) {
  if (n_space < 1) throw ValidationError("scenario space must be non-empty");
  if (lags < 1 || lags > errors.lags()) throw ValidationError("error statistics do not cover the window");
  PerturbationSpace out;
  out.scenarios = n_space;
  out.lags = lags;
  out.values.resize(static_cast<std::size_t>(n_space) * lags);

  struct Factor {
    double mu_error, mu_var, l11, l21, l22;
  };
  std::vector<Factor> factors(lags);
  for (int l = 0; l < lags; ++l) {
    const auto cov = build_covariance(errors.stddev(l), variability.stddev);
    if (cov.clamped) ++out.clamped_lags;
    const double l11 = std::sqrt(cov.diag);
    const double l21 = l11 > 0.0 ? cov.off / l11 : 0.0;
    const double rest = cov.diag - l21 * l21;
    if (rest < -1e-12 * std::max(1.0, cov.diag)) throw SolverError("covariance is not positive semidefinite");
    factors[l] = {errors.mean(l), variability.mean, l11, l21, std::sqrt(std::max(0.0, rest))};
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < n_space; ++s) {
    for (int l = 0; l < lags; ++l) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      const auto& f = factors[l];
      const double error = f.mu_error + f.l11 * z1;
      [[maybe_unused]] const double var = f.mu_var + f.l21 * z1 + f.l22 * z2;
      out.values[static_cast<std::size_t>(s) * lags + l] = error;
    }
  }
  return out;
}

double ScenarioSet::demand(std::size_t s, std::size_t l) const {
  return std::max(0.0, baseline[l] + perturbations[s][l]);
}

ScenarioSet baseline_only(std::vector<double> baseline) {
  ScenarioSet set;
  set.perturbations.assign(1, std::vector<double>(baseline.size(), 0.0));
  set.baseline = std::move(baseline);
  set.probabilities = {1.0};
  return set;
}

ScenarioSet reduce(const PerturbationSpace& space, std::vector<double> baseline, int target) {
  const int n = space.scenarios;
  if (target < 1 || target > n) throw ValidationError("reduced scenario count must be in [1, space size]");
  if (static_cast<int>(baseline.size()) != space.lags) throw ValidationError("baseline length differs from the space");

  std::vector<double> ssd(n, 0.0);
  for (int s = 0; s < n; ++s)
    for (int l = 0; l < space.lags; ++l) ssd[s] += space.at(s, l) * space.at(s, l);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ssd[a] < ssd[b]; });

  std::vector<char> used(n, 0);
  std::vector<int> ranks;
  ranks.reserve(target);
  for (int j = 0; j < target; ++j) {
    int r = static_cast<int>(std::floor((j + 0.5) * n / target));
    r = std::min(r, n - 1);
    while (r < n && used[r]) ++r;
    if (r == n) {
      r = n - 1;
      while (used[r]) --r;
    }
    used[r] = 1;
    ranks.push_back(r);
  }
  std::sort(ranks.begin(), ranks.end());

  ScenarioSet set;
  for (int r : ranks) {
    const int s = order[r];
    set.perturbations.emplace_back(space.values.begin() + static_cast<std::ptrdiff_t>(s) * space.lags,
                                   space.values.begin() + static_cast<std::ptrdiff_t>(s + 1) * space.lags);
  }
  std::fill(set.perturbations.front().begin(), set.perturbations.front().end(), 0.0);
  set.baseline = std::move(baseline);
  set.probabilities.assign(set.perturbations.size(), 1.0 / static_cast<double>(set.perturbations.size()));
  return set;
}

void write_scenario_csv(const std::filesystem::path& path, const ScenarioSet& set) {
  std::string out = "scenario_id,lag,perturbation_kwh\n";
  for (std::size_t s = 0; s < set.size(); ++s)
    for (std::size_t l = 0; l < set.lags(); ++l)
      out += std::to_string(s) + "," + std::to_string(l) + "," + format_double(set.perturbations[s][l]) + "\n";
  write_file_atomic(path, out);
}

}  // namespace imb
