#pragma once

// Sparse linear programming and 0/1 branch-and-bound.
//
// LPs are solved with a bounded-variable revised simplex method. Every row
// gets a logical variable, so any basis can serve as a starting point:
// phase 1 minimizes the sum of bound violations of the basic variables and
// phase 2 the true objective. The basis matrix is kept as a sparse LU
// factorization plus a product-form eta file between refactorizations.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imb/error.hpp"

namespace imb::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Term {
  int var;
  double coef;
};

struct Constraint {
  std::vector<Term> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  std::string name;
};

// Minimize cost'x subject to rows and per-variable bounds.
class LinearProgram {
 public:
  int add_variable(double lower, double upper, double cost = 0.0, std::string name = {});
  int add_constraint(std::vector<Term> terms, Relation relation, double rhs, std::string name = {});

  void set_cost(int var, double cost) { cost_.at(var) = cost; }
  void set_bounds(int var, double lower, double upper);

  int num_vars() const { return static_cast<int>(cost_.size()); }
  int num_constraints() const { return static_cast<int>(rows_.size()); }
  std::size_t nonzeros() const;

  const std::vector<double>& cost() const { return cost_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<Constraint>& constraints() const { return rows_; }
  const std::string& name(int var) const { return names_.at(var); }
  const std::string& constraint_name(int row) const { return rows_.at(row).name; }

  // Throws ValidationError for bad indices, non-finite coefficients or lo > hi.
  void validate() const;

 private:
  std::vector<double> cost_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<std::string> names_;
  std::vector<Constraint> rows_;
};

struct MilpProblem {
  LinearProgram lp;
  std::vector<int> binaries;
  // Optional, parallel to `binaries`. Fractional binaries of the highest
  // priority class are branched on first. Empty means one class.
  std::vector<int> branch_priority;

  void add_binary(int var, int priority = 0);
  void validate() const;
};

enum class Status { Optimal, Infeasible, Unbounded, NodeLimit };
const char* to_string(Status s);

// Opaque simplex basis for warm starts. One entry per structural variable
// followed by one per row.
struct Basis {
  enum State : std::int8_t { Basic = 0, AtLower = 1, AtUpper = 2, FreeAtZero = 3 };
  std::vector<std::int8_t> state;
  bool empty() const { return state.empty(); }
};

struct MilpSolution {
  Status status = Status::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  // Row duals (LP solves only): cost = duals'A + reduced costs.
  std::vector<double> duals;
  std::size_t nodes = 0;
  std::size_t lp_iterations = 0;
  // NodeLimit only: whether `x` holds a feasible incumbent.
  bool has_incumbent = false;
  Basis basis;
};

struct LpOptions {
  std::size_t max_iterations = 2'000'000;
  const Basis* warm_start = nullptr;
};

// Throws SolverError on numerical breakdown (repeatedly singular basis).
MilpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

// Maps a relaxed point to a candidate feasible point, or nothing.
using IncumbentHeuristic = std::function<std::optional<std::vector<double>>(std::span<const double>)>;

struct MilpOptions {
  double gap_tol = 1e-6;
  std::size_t node_limit = 100'000;
  // Candidates are checked for integrality and feasibility before use.
  IncumbentHeuristic heuristic;
  const Basis* warm_start = nullptr;
};

MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options = {});

// Largest violation of a bound or of a row scaled to unit max coefficient.
double max_violation(const LinearProgram& lp, std::span<const double> x);
double objective_value(const LinearProgram& lp, std::span<const double> x);

inline constexpr double kFeasibilityTol = 1e-6;
inline constexpr double kIntegralityTol = 1e-6;

}  // namespace imb::milp
