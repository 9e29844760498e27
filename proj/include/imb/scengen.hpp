#pragma once

// Scenario generation: per-lag forecast error statistics, demand
// variability statistics, a bivariate Gaussian scenario space and its
// reduction to a small equiprobable scenario set.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace imb {

// Running mean and population std of forecast errors, one track per lag.
class ErrorStats {
 public:
  ErrorStats() = default;
  ErrorStats(int lags, double sigma_floor);

  // error = actual - predicted
  void update(int lag, double actual, double predicted);

  int lags() const { return static_cast<int>(tracks_.size()); }
  std::size_t count(int lag) const { return tracks_.at(lag).n; }
  double mean(int lag) const;
  // Reports the prior floor until two errors have been seen.
  double stddev(int lag) const;
  double sigma_floor() const { return sigma_floor_; }
  void set_sigma_floor(double floor) { sigma_floor_ = floor; }

 private:
  struct Track {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Track> tracks_;
  double sigma_floor_ = 0.0;
};

// Mean and population std of first differences of a demand history.
struct VariabilityStats {
  double mean = 0.0;
  double stddev = 0.0;

  static VariabilityStats from_history(std::span<const double> demand);
};

// Symmetric 2x2 covariance [[diag, off], [off, diag]].
struct Covariance2 {
  double diag = 0.0;
  double off = 0.0;
  // Set when the off-diagonal had to be shrunk to keep the matrix PSD.
  bool clamped = false;
};

Covariance2 build_covariance(double sigma_error, double sigma_variability);

// n_space x lags perturbations, row-major.
struct PerturbationSpace {
  int scenarios = 0;
  int lags = 0;
  std::vector<double> values;
  double at(int s, int l) const { return values[static_cast<std::size_t>(s) * lags + l]; }
  // Scenarios whose covariance needed clamping, counted once per lag.
  int clamped_lags = 0;
};

PerturbationSpace sample_space(const ErrorStats& errors, const VariabilityStats& variability, int n_space,
                               int lags, std::uint64_t seed);

struct ScenarioSet {
  std::vector<double> baseline;
  std::vector<std::vector<double>> perturbations;
  std::vector<double> probabilities;

  std::size_t size() const { return perturbations.size(); }
  std::size_t lags() const { return baseline.size(); }
  // Perturbed demand, clamped at zero.
  double demand(std::size_t s, std::size_t l) const;
};

// The single unperturbed scenario.
ScenarioSet baseline_only(std::vector<double> baseline);

// Keeps `target` scenarios stratified by squared distance from the
// baseline; the closest kept scenario is replaced by the baseline itself.
ScenarioSet reduce(const PerturbationSpace& space, std::vector<double> baseline, int target);

// `scenario_id,lag,perturbation_kwh`
void write_scenario_csv(const std::filesystem::path& path, const ScenarioSet& set);

}  // namespace imb
