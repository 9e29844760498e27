#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace imb::milp::detail {

namespace {
constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-14;
constexpr std::size_t kRefactorEvery = 100;
constexpr std::size_t kStallLimit = 300;
}  // namespace

Simplex::Simplex(const LinearProgram& lp) : n_(lp.num_vars()), m_(lp.num_constraints()) {
  const auto& rows = lp.constraints();
  row_scale_.assign(m_, 1.0);
  std::vector<int> count(n_ + 1, 0);
  for (int i = 0; i < m_; ++i) {
    double big = 0.0;
    for (const auto& t : rows[i].terms) {
      big = std::max(big, std::abs(t.coef));
      ++count[t.var + 1];
    }
    if (big > 0.0) row_scale_[i] = 1.0 / big;
  }
  col_start_.assign(n_ + 1, 0);
  for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + count[j + 1];
  row_idx_.resize(col_start_[n_]);
  val_.resize(col_start_[n_]);
  std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
  for (int i = 0; i < m_; ++i)
    for (const auto& t : rows[i].terms) {
      const int at = fill[t.var]++;
      row_idx_[at] = i;
      val_[at] = t.coef * row_scale_[i];
    }

  const int total = n_ + m_;
  cost_.assign(total, 0.0);
  lo_.assign(total, 0.0);
  hi_.assign(total, 0.0);
  for (int j = 0; j < n_; ++j) {
    cost_[j] = lp.cost()[j];
    lo_[j] = lp.lower()[j];
    hi_[j] = lp.upper()[j];
  }
  for (int i = 0; i < m_; ++i) {
    const double b = rows[i].rhs * row_scale_[i];
    switch (rows[i].relation) {
      case Relation::LessEqual: lo_[n_ + i] = -kInf; hi_[n_ + i] = b; break;
      case Relation::GreaterEqual: lo_[n_ + i] = b; hi_[n_ + i] = kInf; break;
      case Relation::Equal: lo_[n_ + i] = b; hi_[n_ + i] = b; break;
    }
  }
  state_.assign(total, kAtLower);
  pos_.assign(total, -1);
  head_.assign(m_, -1);
  x_.assign(total, 0.0);
  y_.assign(m_, 0.0);
}

void Simplex::set_bounds(int var, double lower, double upper) {
  lo_[var] = lower;
  hi_[var] = upper;
}

double Simplex::feas_tol(double bound) const { return kPrimalTol * std::max(1.0, std::abs(bound)); }

// Amount by which x_j lies outside its bounds (0 if feasible within tolerance).
double Simplex::infeasibility(int j) const {
  if (x_[j] < lo_[j] - feas_tol(lo_[j])) return lo_[j] - x_[j];
  if (x_[j] > hi_[j] + feas_tol(hi_[j])) return x_[j] - hi_[j];
  return 0.0;
}

void Simplex::place_nonbasic(int j) {
  const bool flo = std::isfinite(lo_[j]);
  const bool fhi = std::isfinite(hi_[j]);
  auto& s = state_[j];
  if (s == kAtLower && !flo) s = fhi ? kAtUpper : kFreeZero;
  if (s == kAtUpper && !fhi) s = flo ? kAtLower : kFreeZero;
  if (s == kFreeZero && (flo || fhi)) s = flo ? kAtLower : kAtUpper;
  if (flo && fhi && lo_[j] == hi_[j]) s = kAtLower;
  x_[j] = s == kAtLower ? lo_[j] : s == kAtUpper ? hi_[j] : 0.0;
}

void Simplex::slack_basis() {
  for (int j = 0; j < n_; ++j) {
    pos_[j] = -1;
    const bool flo = std::isfinite(lo_[j]);
    const bool fhi = std::isfinite(hi_[j]);
    if (flo && fhi)
      state_[j] = std::abs(lo_[j]) <= std::abs(hi_[j]) ? kAtLower : kAtUpper;
    else
      state_[j] = flo ? kAtLower : fhi ? kAtUpper : kFreeZero;
    place_nonbasic(j);
  }
  for (int i = 0; i < m_; ++i) {
    state_[n_ + i] = kBasic;
    head_[i] = n_ + i;
    pos_[n_ + i] = i;
  }
}

// Triangular crash: free and one-sided structurals, then boxed ones on
// equality rows, replace slacks wherever the pivot row is untouched by the
// columns already chosen. The result is nonsingular by construction.
void Simplex::crash_basis() {
  slack_basis();
  std::vector<int> rows_of(m_, 0);
  std::vector<char> touched(m_, 0);
  std::vector<int> order;
  auto rank = [&](int j) {
    const bool flo = std::isfinite(lo_[j]), fhi = std::isfinite(hi_[j]);
    return flo && fhi ? 2 : flo || fhi ? 1 : 0;
  };
  for (int j = 0; j < n_; ++j)
    if (lo_[j] < hi_[j] && col_start_[j + 1] > col_start_[j]) order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb;
    return col_start_[a + 1] - col_start_[a] < col_start_[b + 1] - col_start_[b];
  });
  for (int j : order) {
    const bool boxed = rank(j) == 2;
    double big = 0.0;
    for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) big = std::max(big, std::abs(val_[p]));
    int row = -1;
    double best = 0.0;
    bool best_eq = false;
    for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) {
      const int i = row_idx_[p];
      if (touched[i] || std::abs(val_[p]) < 0.1 * big) continue;
      const bool eq = lo_[n_ + i] == hi_[n_ + i];
      if (boxed && !eq) continue;
      if (row < 0 || (eq && !best_eq) || (eq == best_eq && std::abs(val_[p]) > best)) {
        row = i;
        best = std::abs(val_[p]);
        best_eq = eq;
      }
    }
    if (row < 0) continue;
    for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) touched[row_idx_[p]] = 1;
    const int slack = n_ + row;
    const int k = pos_[slack];
    state_[slack] = kAtLower;
    pos_[slack] = -1;
    place_nonbasic(slack);
    state_[j] = kBasic;
    head_[k] = j;
    pos_[j] = k;
  }
}

void Simplex::install_basis(const Basis* warm) {
  const int total = n_ + m_;
  if (warm && static_cast<int>(warm->state.size()) == total &&
      std::count(warm->state.begin(), warm->state.end(), kBasic) == m_) {
    int k = 0;
    for (int j = 0; j < total; ++j) {
      state_[j] = warm->state[j];
      if (state_[j] == kBasic) {
        head_[k] = j;
        pos_[j] = k++;
      } else {
        pos_[j] = -1;
        place_nonbasic(j);
      }
    }
    return;
  }
  crash_basis();
}

bool Simplex::refactor() {
  etas_.clear();
  eta_nnz_ = 0;
  if (m_ == 0) return true;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m_) * 2);
  for (int k = 0; k < m_; ++k) {
    const int j = head_[k];
    if (j >= n_) {
      trip.emplace_back(j - n_, k, -1.0);
    } else {
      for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) trip.emplace_back(row_idx_[p], k, val_[p]);
    }
  }
  Eigen::SparseMatrix<double> b(m_, m_);
  b.setFromTriplets(trip.begin(), trip.end());
  b.makeCompressed();
  lu_.compute(b);
  return lu_.info() == Eigen::Success;
}

void Simplex::ftran(std::vector<double>& v) const {
  if (m_ == 0) return;
  Eigen::Map<Eigen::VectorXd> mv(v.data(), m_);
  Eigen::VectorXd z = lu_.solve(mv);
  mv = z;
  for (const auto& e : etas_) {
    const double zr = v[e.pos] / e.pivot;
    v[e.pos] = zr;
    if (zr != 0.0)
      for (std::size_t q = 0; q < e.idx.size(); ++q) v[e.idx[q]] -= e.val[q] * zr;
  }
}

void Simplex::btran(std::vector<double>& v) const {
  if (m_ == 0) return;
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = v[it->pos];
    for (std::size_t q = 0; q < it->idx.size(); ++q) s -= it->val[q] * v[it->idx[q]];
    v[it->pos] = s / it->pivot;
  }
  Eigen::Map<Eigen::VectorXd> mv(v.data(), m_);
  Eigen::VectorXd z = lu_.transpose().solve(mv);
  mv = z;
}

void Simplex::load_column(int j, std::vector<double>& dense) const {
  std::fill(dense.begin(), dense.end(), 0.0);
  if (j >= n_) {
    dense[j - n_] = -1.0;
    return;
  }
  for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) dense[row_idx_[p]] = val_[p];
}

double Simplex::dot_column(int j, const std::vector<double>& y) const {
  if (j >= n_) return -y[j - n_];
  double s = 0.0;
  for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) s += val_[p] * y[row_idx_[p]];
  return s;
}

void Simplex::compute_basics() {
  std::vector<double> rhs(m_, 0.0);
  for (int j = 0; j < n_; ++j) {
    if (state_[j] == kBasic || x_[j] == 0.0) continue;
    for (int p = col_start_[j]; p < col_start_[j + 1]; ++p) rhs[row_idx_[p]] -= val_[p] * x_[j];
  }
  for (int i = 0; i < m_; ++i)
    if (state_[n_ + i] != kBasic) rhs[i] += x_[n_ + i];
  ftran(rhs);
  for (int k = 0; k < m_; ++k) x_[head_[k]] = rhs[k];
}

LpResult Simplex::solve(const Basis* warm, std::size_t max_iterations) {
  LpResult result;
  const int total = n_ + m_;
  for (int j = 0; j < total; ++j)
    if (lo_[j] > hi_[j] + feas_tol(hi_[j])) return result;  // empty box: infeasible

  install_basis(warm);
  int singular_resets = 0;
  auto fresh_factor = [&]() {
    while (!refactor()) {
      if (++singular_resets > 3)
        throw SolverError("simplex: basis matrix singular after " + std::to_string(singular_resets) +
                          " resets (smallest pivot below machine precision)");
      slack_basis();
    }
    compute_basics();
  };
  fresh_factor();

  std::vector<double> cb(m_);
  std::vector<double> alpha(m_);
  bool bland = false;
  bool last_phase1 = true;
  double best_progress = kInf;
  std::size_t since_progress = 0;
  int verify_rounds = 0;

  for (std::size_t iter = 0;; ++iter) {
    if (iter >= max_iterations) throw SolverError("simplex: iteration limit reached");
    if (etas_.size() >= kRefactorEvery) fresh_factor();

    double sum_inf = 0.0;
    for (int k = 0; k < m_; ++k) {
      const int j = head_[k];
      if (x_[j] < lo_[j] - feas_tol(lo_[j])) {
        cb[k] = -1.0;
        sum_inf += lo_[j] - x_[j];
      } else if (x_[j] > hi_[j] + feas_tol(hi_[j])) {
        cb[k] = 1.0;
        sum_inf += x_[j] - hi_[j];
      } else {
        cb[k] = 0.0;
      }
    }
    const bool phase1 = sum_inf > 0.0;
    if (!phase1)
      for (int k = 0; k < m_; ++k) cb[k] = cost_[head_[k]];

    double progress = sum_inf;
    if (!phase1) {
      progress = 0.0;
      for (int j = 0; j < n_; ++j) progress += cost_[j] * x_[j];
    }
    if (phase1 != last_phase1) {
      last_phase1 = phase1;
      best_progress = kInf;
    }
    if (progress < best_progress - 1e-11 * (1.0 + std::abs(best_progress))) {
      best_progress = progress;
      since_progress = 0;
      bland = false;
    } else if (++since_progress > kStallLimit) {
      bland = true;
    }

    y_ = cb;
    btran(y_);

    // Pricing.
    int enter = -1;
    double enter_d = 0.0;
    double best_score = 0.0;
    for (int j = 0; j < total; ++j) {
      const auto s = state_[j];
      if (s == kBasic) continue;
      if (s == kAtLower && lo_[j] == hi_[j]) continue;
      const double c = phase1 ? 0.0 : cost_[j];
      const double d = c - dot_column(j, y_);
      bool eligible = false;
      if (s == kAtLower) eligible = d < -kDualTol;
      else if (s == kAtUpper) eligible = d > kDualTol;
      else eligible = std::abs(d) > kDualTol;
      if (!eligible) continue;
      if (bland) {
        enter = j;
        enter_d = d;
        break;
      }
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        enter = j;
        enter_d = d;
      }
    }

    if (enter < 0) {
      if (phase1) {
        result.status = Status::Infeasible;
        result.iterations = iter;
        return result;
      }
      // Confirm with a fresh factorization before declaring optimality.
      if (!etas_.empty() && verify_rounds < 3) {
        ++verify_rounds;
        fresh_factor();
        bool still_feasible = true;
        for (int k = 0; k < m_ && still_feasible; ++k) still_feasible = infeasibility(head_[k]) == 0.0;
        if (!still_feasible) continue;
      }
      result.status = Status::Optimal;
      result.iterations = iter;
      result.objective = 0.0;
      for (int j = 0; j < n_; ++j) result.objective += cost_[j] * x_[j];
      return result;
    }

    const double dir = enter_d < 0.0 ? 1.0 : -1.0;
    load_column(enter, alpha);
    ftran(alpha);

    // Ratio test (Harris two-pass, or textbook with index ties under Bland).
    const double flip = hi_[enter] - lo_[enter];
    auto target_of = [&](int k, double rate, double& target) -> bool {
      const int j = head_[k];
      if (rate > 0.0) {
        if (phase1 && x_[j] < lo_[j] - feas_tol(lo_[j])) { target = lo_[j]; return true; }
        if (x_[j] > hi_[j] + feas_tol(hi_[j])) return false;
        target = hi_[j];
        return std::isfinite(target);
      }
      if (phase1 && x_[j] > hi_[j] + feas_tol(hi_[j])) { target = hi_[j]; return true; }
      if (x_[j] < lo_[j] - feas_tol(lo_[j])) return false;
      target = lo_[j];
      return std::isfinite(target);
    };

    int leave = -1;
    double theta = kInf;
    double leave_target = 0.0;
    if (bland) {
      for (int k = 0; k < m_; ++k) {
        if (std::abs(alpha[k]) <= kPivotTol) continue;
        const double rate = -dir * alpha[k];
        double target;
        if (!target_of(k, rate, target)) continue;
        const double ratio = std::max(0.0, (target - x_[head_[k]]) / rate);
        if (ratio < theta - 1e-12 || (ratio <= theta + 1e-12 && leave >= 0 && head_[k] < head_[leave])) {
          theta = std::min(theta, ratio);
          leave = k;
          leave_target = target;
        }
      }
    } else {
      double relaxed = kInf;
      for (int k = 0; k < m_; ++k) {
        if (std::abs(alpha[k]) <= kPivotTol) continue;
        const double rate = -dir * alpha[k];
        double target;
        if (!target_of(k, rate, target)) continue;
        const double slack = feas_tol(target) * (rate > 0.0 ? 1.0 : -1.0);
        relaxed = std::min(relaxed, (target + slack - x_[head_[k]]) / rate);
      }
      double best_alpha = 0.0;
      for (int k = 0; k < m_; ++k) {
        if (std::abs(alpha[k]) <= kPivotTol) continue;
        const double rate = -dir * alpha[k];
        double target;
        if (!target_of(k, rate, target)) continue;
        const double ratio = (target - x_[head_[k]]) / rate;
        if (ratio <= relaxed && std::abs(alpha[k]) > best_alpha) {
          best_alpha = std::abs(alpha[k]);
          leave = k;
          leave_target = target;
          theta = std::max(0.0, ratio);
        }
      }
    }

    if (std::isfinite(flip) && flip <= theta) {
      for (int k = 0; k < m_; ++k)
        if (alpha[k] != 0.0) x_[head_[k]] -= dir * flip * alpha[k];
      state_[enter] = state_[enter] == kAtLower ? kAtUpper : kAtLower;
      x_[enter] = state_[enter] == kAtLower ? lo_[enter] : hi_[enter];
      continue;
    }
    if (leave < 0) {
      if (!phase1) {
        result.status = Status::Unbounded;
        result.iterations = iter;
        return result;
      }
      // Phase-1 direction without a breakpoint means accumulated error.
      fresh_factor();
      continue;
    }

    for (int k = 0; k < m_; ++k)
      if (alpha[k] != 0.0) x_[head_[k]] -= dir * theta * alpha[k];
    const int out = head_[leave];
    x_[out] = leave_target;
    state_[out] = leave_target == lo_[out] ? kAtLower : kAtUpper;
    pos_[out] = -1;
    x_[enter] += dir * theta;
    state_[enter] = kBasic;
    head_[leave] = enter;
    pos_[enter] = leave;

    Eta eta;
    eta.pos = leave;
    eta.pivot = alpha[leave];
    for (int k = 0; k < m_; ++k)
      if (k != leave && std::abs(alpha[k]) > kDropTol) {
        eta.idx.push_back(k);
        eta.val.push_back(alpha[k]);
      }
    eta_nnz_ += eta.idx.size();
    etas_.push_back(std::move(eta));
  }
}

Basis Simplex::basis() const { return Basis{state_}; }

std::vector<double> Simplex::primal() const { return {x_.begin(), x_.begin() + n_}; }

std::vector<double> Simplex::duals() const {
  std::vector<double> out(m_);
  for (int i = 0; i < m_; ++i) out[i] = y_[i] * row_scale_[i];
  return out;
}

}  // namespace imb::milp::detail
