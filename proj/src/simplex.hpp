#pragma once

// Bounded-variable revised simplex engine shared by solve_lp and the
// branch-and-bound driver. Internal to the milp library.

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cstdint>
#include <vector>

#include "imb/milp.hpp"

namespace imb::milp::detail {

enum VarState : std::int8_t {
  kBasic = Basis::Basic,
  kAtLower = Basis::AtLower,
  kAtUpper = Basis::AtUpper,
  kFreeZero = Basis::FreeAtZero
};

struct LpResult {
  Status status = Status::Infeasible;
  double objective = 0.0;
  std::size_t iterations = 0;
};

class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp);

  // Structural bounds; row bounds are fixed at construction.
  void set_bounds(int var, double lower, double upper);
  double lower(int var) const { return lo_[var]; }
  double upper(int var) const { return hi_[var]; }

  LpResult solve(const Basis* warm, std::size_t max_iterations);

  Basis basis() const;
  std::vector<double> primal() const;  // structural values
  std::vector<double> duals() const;   // unscaled row duals

 private:
  struct Eta {
    int pos;
    double pivot;
    std::vector<int> idx;
    std::vector<double> val;
  };

  void install_basis(const Basis* warm);
  void slack_basis();
  void crash_basis();
  void place_nonbasic(int j);
  bool refactor();
  void compute_basics();
  void ftran(std::vector<double>& v) const;
  void btran(std::vector<double>& v) const;
  void load_column(int j, std::vector<double>& dense) const;
  double dot_column(int j, const std::vector<double>& y) const;
  double infeasibility(int j) const;
  double feas_tol(double bound) const;

  int n_ = 0;  // structurals
  int m_ = 0;  // rows
  std::vector<int> col_start_;
  std::vector<int> row_idx_;
  std::vector<double> val_;
  std::vector<double> row_scale_;
  std::vector<double> cost_;
  std::vector<double> lo_;
  std::vector<double> hi_;

  std::vector<std::int8_t> state_;
  std::vector<int> head_;  // basic variable at each position
  std::vector<int> pos_;   // position of a basic variable, -1 otherwise
  std::vector<double> x_;
  std::vector<double> y_;  // scaled duals from the last pricing pass

  // transpose() is non-const in Eigen.
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
  std::size_t eta_nnz_ = 0;
};

}  // namespace imb::milp::detail
