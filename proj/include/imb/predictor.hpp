#pragma once

// Short-term demand forecasting: one epsilon-SVR with an RBF kernel per
// look-ahead lag, trained on a rolling window of lagged demands plus
// calendar features.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "imb/core.hpp"

namespace imb {

// Row-major feature matrix with one target per row.
struct TrainingSet {
  std::vector<double> features;
  std::vector<double> targets;
  std::size_t cols = 0;
  std::size_t rows() const { return targets.size(); }
  const double* row(std::size_t r) const { return features.data() + r * cols; }
};

// Feature vector for target period `target` from the demands ending at
// `last` (inclusive): demand[last], demand[last-1], ... (np values), then
// holiday/weekend flag, sin and cos of the time of day, day of week / 6.
std::vector<double> feature_row(const DemandSeries& series, std::size_t last, std::size_t target, int np,
                                const std::set<Date>& holidays);

// Rows for targets end-th .. end-1 (0-based indices into the series).
// Throws ValidationError naming the required length if history is short.
TrainingSet build_training_set(const DemandSeries& history, std::size_t end, int lag, int np, std::size_t th,
                               const std::set<Date>& holidays = {});

struct SvrHyper {
  double c = 10.0;
  double gamma = 0.02;    // on standardized features
  double epsilon = 0.01;  // in units of the target standard deviation
};

struct SvrModel {
  int lag = 0;
  SvrHyper hyper;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;
  std::size_t cols = 0;
  std::vector<double> support;  // standardized support vectors, row-major
  std::vector<double> coef;     // dual coefficient differences, each in [-C, C]
  double bias = 0.0;
  int iterations = 0;
  bool converged = true;

  std::size_t support_count() const { return coef.size(); }
  double predict(std::span<const double> raw_features) const;
};

struct SvrGrid {
  std::vector<double> c{1.0, 10.0, 100.0};
  std::vector<double> gamma_times_features{0.01, 0.1, 1.0};  // gamma = value / feature count
  std::vector<double> epsilon_frac{0.005, 0.01, 0.02};       // of the target std
  std::size_t size() const { return c.size() * gamma_times_features.size() * epsilon_frac.size(); }
};

struct SvrSolverParams {
  double tolerance = 1e-3;
  int max_iterations = 100'000;
};

// Fits one model with fixed hyper-parameters.
SvrModel fit_svr(const TrainingSet& data, const SvrHyper& hyper, const SvrSolverParams& solver = {});

struct GridResult {
  SvrHyper best;
  double best_mae = 0.0;
  std::vector<std::pair<SvrHyper, double>> scores;  // mean CV MAE per grid point
};

// Cross-validates every grid point on contiguous folds and refits the best
// on all rows. The fold split is deterministic; `seed` is accepted for
// interface stability and currently unused by contiguous folds.
SvrModel train_svr(const TrainingSet& data, const SvrGrid& grid, int cv_folds, std::uint64_t seed,
                   GridResult* report = nullptr, const SvrSolverParams& solver = {});

struct PredictorConfig {
  int window = 8;
  int np = 48;
  int training_days = 20;
  int cv_folds = 3;
  SvrGrid grid;
  // Re-run the grid search on every rolling retrain instead of reusing the
  // hyper-parameters chosen at the initial training.
  bool regrid_on_retrain = false;
  SvrSolverParams solver;
  void validate() const;
};

class Predictor {
 public:
  explicit Predictor(PredictorConfig config, std::set<Date> holidays = {});

  // Trains all lags on the training window ending just before index `end`.
  void train(const DemandSeries& series, std::size_t end, std::uint64_t seed);
  // Day-boundary retrain. Returns false (models kept, warning recorded)
  // when fewer than training_days whole days precede `end`.
  bool retrain_rolling(const DemandSeries& series, std::size_t end, std::uint64_t seed);

  bool trained() const { return !models_.empty(); }
  // Forecasts periods t .. t+w-1 from demands before t; clamped at zero.
  std::vector<double> predict_window(const DemandSeries& series, std::size_t t) const;

  const std::vector<SvrModel>& models() const { return models_; }
  const PredictorConfig& config() const { return config_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  // Index of the first target row used by the last training.
  std::size_t training_start() const { return training_start_; }

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  PredictorConfig config_;
  std::set<Date> holidays_;
  std::vector<SvrModel> models_;
  std::vector<SvrHyper> chosen_;
  std::vector<std::string> warnings_;
  std::size_t training_start_ = 0;
};

struct ForecastError {
  std::size_t period = 0;
  int lag = 0;
  double actual = 0.0;
  double predicted = 0.0;
};

// `period,lag,actual,predicted,error`
void write_error_log(const std::filesystem::path& path, const std::vector<ForecastError>& rows);

}  // namespace imb
