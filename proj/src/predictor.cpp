#include "imb/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <json.hpp>
#include <numbers>

#include "imb/io.hpp"
#include "imb/kernels.hpp"

namespace imb {

std::vector<double> feature_row(const DemandSeries& series, std::size_t last, std::size_t target, int np,
                                const std::set<Date>& holidays) {
  std::vector<double> f;
  f.reserve(np + 4);
  for (int k = 0; k < np; ++k) f.push_back(series.values()[last - k]);
  const int dow = series.day_of_week(target);
  const bool off = dow >= 5 || holidays.contains(series.date_of(target));
  const double phase = 2.0 * std::numbers::pi * series.period_of_day(target) / series.periods_per_day();
  f.push_back(off ? 1.0 : 0.0);
  f.push_back(std::sin(phase));
  f.push_back(std::cos(phase));
  f.push_back(dow / 6.0);
  return f;
}

TrainingSet build_training_set(const DemandSeries& history, std::size_t end, int lag, int np, std::size_t th,
                               const std::set<Date>& holidays) {
  if (np < 1 || lag < 0 || th < 1) throw ValidationError("training set needs np >= 1, lag >= 0, th >= 1");
  const std::size_t need = th + static_cast<std::size_t>(lag) + static_cast<std::size_t>(np);
  if (end > history.size() || end < need)
    throw ValidationError("training set needs " + std::to_string(need) + " periods of history before index " +
                          std::to_string(end) + ", have " + std::to_string(std::min(end, history.size())));
  TrainingSet ts;
  ts.cols = static_cast<std::size_t>(np) + 4;
  for (std::size_t i = end - 1; i + 1 > end - th; --i) {
    const auto f = feature_row(history, i - lag - 1, i, np, holidays);
    ts.features.insert(ts.features.end(), f.begin(), f.end());
    ts.targets.push_back(history.values()[i]);
    if (i == 0) break;
  }
  return ts;
}

namespace {

struct Standardized {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> fmean, fscale;
  double ymean = 0.0, yscale = 1.0;
};

double scale_of(double ss, std::size_t n) {
  const double s = std::sqrt(ss / static_cast<double>(n));
  return s > 1e-12 ? s : 1.0;
}

Standardized standardize(const TrainingSet& d) {
  Standardized s;
  const std::size_t n = d.rows(), m = d.cols;
  s.fmean.assign(m, 0.0);
  s.fscale.assign(m, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) s.fmean[c] += d.row(r)[c];
  for (auto& v : s.fmean) v /= static_cast<double>(n);
  std::vector<double> ss(m, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) ss[c] += (d.row(r)[c] - s.fmean[c]) * (d.row(r)[c] - s.fmean[c]);
  for (std::size_t c = 0; c < m; ++c) s.fscale[c] = scale_of(ss[c], n);
  s.x.resize(n * m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) s.x[r * m + c] = (d.row(r)[c] - s.fmean[c]) / s.fscale[c];

  for (double t : d.targets) s.ymean += t;
  s.ymean /= static_cast<double>(n);
  double yss = 0.0;
  for (double t : d.targets) yss += (t - s.ymean) * (t - s.ymean);
  s.yscale = scale_of(yss, n);
  for (double t : d.targets) s.y.push_back((t - s.ymean) / s.yscale);
  return s;
}

struct DualSolution {
  std::vector<double> beta;
  double bias = 0.0;
  int iterations = 0;
  bool converged = true;
};

// Epsilon-SVR dual over 2l variables with second-order working-set
// selection. Variable t < l carries sign +1 and t + l sign -1; both refer
// to row t of the dense l x l kernel matrix K.
// A start point beta0 (|beta0| <= C, summing to 0) warm-starts the solver.
DualSolution solve_dual(const double* K, std::size_t l, std::span<const double> y, double C, double eps,
                        const SvrSolverParams& params, std::span<const double> beta0 = {}) {
  const std::size_t n = 2 * l;
  std::vector<double> a(n, 0.0), G(n), diag(l);
  std::vector<double> kb(l, 0.0);
  if (!beta0.empty()) {
    for (std::size_t t = 0; t < l; ++t) {
      a[t] = std::max(beta0[t], 0.0);
      a[t + l] = std::max(-beta0[t], 0.0);
    }
    for (std::size_t r = 0; r < l; ++r)
      if (beta0[r] != 0.0)
        for (std::size_t t = 0; t < l; ++t) kb[t] += K[r * l + t] * beta0[r];
  }
  for (std::size_t t = 0; t < l; ++t) {
    G[t] = eps - y[t] + kb[t];
    G[t + l] = eps + y[t] - kb[t];
    diag[t] = K[t * l + t];
  }
  const double* ap = a.data();
  const double* Gp = G.data();
  const double* am = a.data() + l;
  const double* Gm = G.data() + l;

  DualSolution out;
  int iter = 0;
  for (; iter < params.max_iterations; ++iter) {
    double gmax = -INFINITY;
    std::size_t i = n;
    for (std::size_t t = 0; t < l; ++t)
      if (ap[t] < C && -Gp[t] >= gmax) {
        gmax = -Gp[t];
        i = t;
      }
    for (std::size_t t = 0; t < l; ++t)
      if (am[t] > 0.0 && Gm[t] >= gmax) {
        gmax = Gm[t];
        i = t + l;
      }
    if (i == n) break;
    const std::size_t ri = i < l ? i : i - l;
    const double* Ki = K + ri * l;
    const double kii = diag[ri];
    double gmax2 = -INFINITY, best = INFINITY;
    std::size_t j = n;
    auto consider = [&](std::size_t t, std::size_t idx, double v) {
      gmax2 = std::max(gmax2, v);
      const double b = gmax + v;
      if (b > 0.0) {
        double quad = kii + diag[t] - 2.0 * Ki[t];
        if (quad <= 0.0) quad = 1e-12;
        const double obj = -(b * b) / quad;
        if (obj <= best) {
          best = obj;
          j = idx;
        }
      }
    };
    for (std::size_t t = 0; t < l; ++t)
      if (ap[t] > 0.0) consider(t, t, Gp[t]);
    for (std::size_t t = 0; t < l; ++t)
      if (am[t] < C) consider(t, t + l, -Gm[t]);
    if (gmax + gmax2 < params.tolerance || j == n) break;

    const std::size_t rj = j < l ? j : j - l;
    const double si = i < l ? 1.0 : -1.0, sj = j < l ? 1.0 : -1.0;
    const double Qij = si * sj * Ki[rj];
    const double Qii = kii, Qjj = diag[rj];
    const double ai = a[i], aj = a[j];
    if (si != sj) {
      double quad = Qii + Qjj + 2.0 * Qij;
      if (quad <= 0.0) quad = 1e-12;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = C - diff;
        }
      } else if (a[j] > C) {
        a[j] = C;
        a[i] = C + diff;
      }
    } else {
      double quad = Qii + Qjj - 2.0 * Qij;
      if (quad <= 0.0) quad = 1e-12;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = sum - C;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > C) {
        if (a[j] > C) {
          a[j] = C;
          a[i] = sum - C;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }
    const double di = (a[i] - ai) * si, dj = (a[j] - aj) * sj;
    const double* Kj = K + rj * l;
    double* gp = G.data();
    double* gm = G.data() + l;
    for (std::size_t t = 0; t < l; ++t) {
      const double g = Ki[t] * di + Kj[t] * dj;
      gp[t] += g;
      gm[t] -= g;
    }
  }
  out.iterations = iter;
  out.converged = iter < params.max_iterations;

  double ub = INFINITY, lb = -INFINITY, sum_free = 0.0;
  int nfree = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const bool plus = t < l;
    const double yg = plus ? G[t] : -G[t];
    if (a[t] >= C) {
      if (!plus) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (plus) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++nfree;
      sum_free += yg;
    }
  }
  const double rho = nfree > 0 ? sum_free / nfree : (ub + lb) / 2.0;
  out.bias = -rho;
  out.beta.resize(l);
  for (std::size_t t = 0; t < l; ++t) out.beta[t] = a[t] - a[t + l];
  return out;
}

bool constant_targets(const Standardized& s) {
  for (double v : s.y)
    if (v != 0.0) return false;
  return true;
}

SvrModel assemble(const Standardized& s, std::size_t cols, const SvrHyper& h, const DualSolution& d) {
  SvrModel m;
  m.hyper = h;
  m.cols = cols;
  m.feature_mean = s.fmean;
  m.feature_scale = s.fscale;
  m.target_mean = s.ymean;
  m.target_scale = s.yscale;
  m.bias = d.bias;
  m.iterations = d.iterations;
  m.converged = d.converged;
  for (std::size_t r = 0; r < d.beta.size(); ++r) {
    if (d.beta[r] == 0.0) continue;
    m.coef.push_back(d.beta[r]);
    m.support.insert(m.support.end(), s.x.begin() + r * cols, s.x.begin() + (r + 1) * cols);
  }
  return m;
}

void check_hyper(const SvrHyper& h) {
  if (!(h.c > 0.0) || !(h.gamma > 0.0) || !(h.epsilon >= 0.0)) throw ValidationError("SVR needs C > 0, gamma > 0, epsilon >= 0");
}

}  // namespace

double SvrModel::predict(std::span<const double> raw) const {
  if (raw.size() != cols) throw ValidationError("feature vector has " + std::to_string(raw.size()) + " entries, model expects " + std::to_string(cols));
  std::vector<double> z(cols);
  for (std::size_t c = 0; c < cols; ++c) z[c] = (raw[c] - feature_mean[c]) / feature_scale[c];
  double f = bias;
  for (std::size_t k = 0; k < coef.size(); ++k)
    f += coef[k] * std::exp(-hyper.gamma * kernels::squared_distance(support.data() + k * cols, z.data(), cols));
  return target_mean + target_scale * f;
}

SvrModel fit_svr(const TrainingSet& data, const SvrHyper& hyper, const SvrSolverParams& solver) {
  check_hyper(hyper);
  if (data.rows() == 0) throw ValidationError("cannot fit an SVR on zero rows");
  const auto s = standardize(data);
  if (constant_targets(s)) return assemble(s, data.cols, hyper, DualSolution{{}, 0.0, 0, true});
  const auto K = kernels::omp::rbf_gram({s.x, data.rows(), data.cols}, hyper.gamma);
  return assemble(s, data.cols, hyper, solve_dual(K.data(), data.rows(), s.y, hyper.c, hyper.epsilon, solver));
}

SvrModel train_svr(const TrainingSet& data, const SvrGrid& grid, int cv_folds, std::uint64_t /*seed*/,
                   GridResult* report, const SvrSolverParams& solver) {
  if (grid.size() == 0) throw ValidationError("SVR grid is empty");
  if (cv_folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  const std::size_t n = data.rows();
  if (n < static_cast<std::size_t>(2 * cv_folds))
    throw ValidationError("SVR training needs at least " + std::to_string(2 * cv_folds) + " rows");
  const auto s = standardize(data);
  const double fc = static_cast<double>(data.cols);

  GridResult res;
  if (grid.size() == 1 || constant_targets(s)) {
    res.best = {grid.c.front(), grid.gamma_times_features.front() / fc, grid.epsilon_frac.front()};
  } else {
    res.best_mae = INFINITY;
    // Solves along ascending C warm-start from the previous grid point,
    // whose solution stays inside the larger box.
    std::vector<std::size_t> c_order(grid.c.size());
    std::iota(c_order.begin(), c_order.end(), 0);
    std::stable_sort(c_order.begin(), c_order.end(), [&](std::size_t a, std::size_t b) { return grid.c[a] < grid.c[b]; });
    const std::size_t ne = grid.epsilon_frac.size();
    for (double gtf : grid.gamma_times_features) {
      const double gamma = gtf / fc;
      const auto K = kernels::omp::rbf_gram({s.x, n, data.cols}, gamma);
      std::vector<double> abs_err(grid.c.size() * ne, 0.0);
      for (int f = 0; f < cv_folds; ++f) {
        const std::size_t lo = f * n / cv_folds, hi = (f + 1) * n / cv_folds;
        std::vector<std::size_t> train;
        for (std::size_t r = 0; r < n; ++r)
          if (r < lo || r >= hi) train.push_back(r);
        const std::size_t l = train.size();
        std::vector<double> Kt(l * l), yt(l);
        for (std::size_t a = 0; a < l; ++a) {
          yt[a] = s.y[train[a]];
          for (std::size_t b = 0; b < l; ++b) Kt[a * l + b] = K[train[a] * n + train[b]];
        }
        std::vector<double> beta;
        for (std::size_t ci : c_order) {
          for (std::size_t ei = 0; ei < ne; ++ei) {
            auto d = solve_dual(Kt.data(), l, yt, grid.c[ci], grid.epsilon_frac[ei], solver, beta);
            for (std::size_t v = lo; v < hi; ++v) {
              double pred = d.bias;
              for (std::size_t a = 0; a < l; ++a)
                if (d.beta[a] != 0.0) pred += d.beta[a] * K[v * n + train[a]];
              abs_err[ci * ne + ei] += std::abs(pred - s.y[v]) * s.yscale;
            }
            beta = std::move(d.beta);
          }
        }
      }
      for (std::size_t ci = 0; ci < grid.c.size(); ++ci) {
        for (std::size_t ei = 0; ei < ne; ++ei) {
          const double mae = abs_err[ci * ne + ei] / static_cast<double>(n);
          const SvrHyper h{grid.c[ci], gamma, grid.epsilon_frac[ei]};
          res.scores.emplace_back(h, mae);
          if (mae < res.best_mae) {
            res.best_mae = mae;
            res.best = h;
          }
        }
      }
    }
  }
  if (report) *report = res;
  return fit_svr(data, res.best, solver);
}

void PredictorConfig::validate() const {
  if (window < 1) throw ValidationError("window must be >= 1");
  if (np < 1) throw ValidationError("np must be >= 1");
  if (training_days < 1) throw ValidationError("training_days must be >= 1");
  if (cv_folds < 2) throw ValidationError("cv_folds must be >= 2");
  if (grid.size() == 0) throw ValidationError("SVR grid is empty");
}

Predictor::Predictor(PredictorConfig config, std::set<Date> holidays)
    : config_(std::move(config)), holidays_(std::move(holidays)) {
  config_.validate();
}

void Predictor::train(const DemandSeries& series, std::size_t end, std::uint64_t seed) {
  const std::size_t th = static_cast<std::size_t>(config_.training_days) * series.periods_per_day();
  if (end < th) throw ValidationError("training needs " + std::to_string(th) + " periods before index " + std::to_string(end));
  const bool grid = chosen_.empty() || config_.regrid_on_retrain;
  std::vector<SvrModel> models;
  std::vector<SvrHyper> chosen;
  for (int lag = 0; lag < config_.window; ++lag) {
    // Rows whose lagged features would reach before the series start are dropped.
    const std::size_t reach = static_cast<std::size_t>(config_.np + lag);
    const std::size_t rows = std::min(th, end > reach ? end - reach : 0);
    const auto data = build_training_set(series, end, lag, config_.np, rows, holidays_);
    SvrModel m = grid ? train_svr(data, config_.grid, config_.cv_folds, seed + lag, nullptr, config_.solver)
                      : fit_svr(data, chosen_[lag], config_.solver);
    m.lag = lag;
    if (!m.converged)
      warnings_.push_back("lag " + std::to_string(lag) + " SVR stopped at the iteration limit");
    chosen.push_back(m.hyper);
    models.push_back(std::move(m));
  }
  models_ = std::move(models);
  chosen_ = std::move(chosen);
  training_start_ = end - th;
}

bool Predictor::retrain_rolling(const DemandSeries& series, std::size_t end, std::uint64_t seed) {
  const std::size_t th = static_cast<std::size_t>(config_.training_days) * series.periods_per_day();
  if (end < th) {
    warnings_.push_back("only " + std::to_string(end / series.periods_per_day()) + " days of history at index " +
                        std::to_string(end) + "; keeping previous models");
    return false;
  }
  train(series, end, seed);
  return true;
}

std::vector<double> Predictor::predict_window(const DemandSeries& series, std::size_t t) const {
  if (static_cast<int>(models_.size()) < config_.window) throw ValidationError("predictor has no model for some lags");
  if (t < static_cast<std::size_t>(config_.np)) throw ValidationError("prediction needs " + std::to_string(config_.np) + " past periods");
  std::vector<double> out;
  for (int l = 0; l < config_.window; ++l) {
    const auto f = feature_row(series, t - 1, t + l, config_.np, holidays_);
    out.push_back(std::max(0.0, models_[l].predict(f)));
  }
  return out;
}

namespace {

nlohmann::json to_json(const SvrModel& m) {
  return {{"lag", m.lag},
          {"c", m.hyper.c},
          {"gamma", m.hyper.gamma},
          {"epsilon", m.hyper.epsilon},
          {"feature_mean", m.feature_mean},
          {"feature_scale", m.feature_scale},
          {"target_mean", m.target_mean},
          {"target_scale", m.target_scale},
          {"cols", m.cols},
          {"support", m.support},
          {"coef", m.coef},
          {"bias", m.bias}};
}

SvrModel from_json(const nlohmann::json& j) {
  SvrModel m;
  m.lag = j.at("lag").get<int>();
  m.hyper = {j.at("c").get<double>(), j.at("gamma").get<double>(), j.at("epsilon").get<double>()};
  m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
  m.target_mean = j.at("target_mean").get<double>();
  m.target_scale = j.at("target_scale").get<double>();
  m.cols = j.at("cols").get<std::size_t>();
  m.support = j.at("support").get<std::vector<double>>();
  m.coef = j.at("coef").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  if (m.feature_mean.size() != m.cols || m.feature_scale.size() != m.cols || m.support.size() != m.coef.size() * m.cols)
    throw ValidationError("model file has inconsistent dimensions");
  return m;
}

}  // namespace

void Predictor::save(const std::filesystem::path& path) const {
  nlohmann::json j = {{"training_start", training_start_}, {"models", nlohmann::json::array()}};
  for (const auto& m : models_) j["models"].push_back(to_json(m));
  write_file_atomic(path, j.dump() + "\n");
}

void Predictor::load(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    std::vector<SvrModel> models;
    for (const auto& mj : j.at("models")) models.push_back(from_json(mj));
    if (static_cast<int>(models.size()) != config_.window) throw ValidationError("model file holds " + std::to_string(models.size()) + " lags, window is " + std::to_string(config_.window));
    models_ = std::move(models);
    chosen_.clear();
    for (const auto& m : models_) chosen_.push_back(m.hyper);
    training_start_ = j.at("training_start").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_error_log(const std::filesystem::path& path, const std::vector<ForecastError>& rows) {
  std::string out = "period,lag,actual,predicted,error\n";
  for (const auto& r : rows)
    out += std::to_string(r.period) + "," + std::to_string(r.lag) + "," + format_double(r.actual) + "," +
           format_double(r.predicted) + "," + format_double(r.actual - r.predicted) + "\n";
  write_file_atomic(path, out);
}

}  // namespace imb
