#pragma once

// One window of the stochastic charge/discharge scheduler: the
// mixed-integer model over a shared dispatch plan and per-scenario
// imbalances, its solution, and an independent check of the tariff and
// storage encodings.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imb/core.hpp"
#include "imb/milp.hpp"
#include "imb/scengen.hpp"

namespace imb {

struct WindowInput {
  std::vector<double> supply;  // contracted supply for each window period
  ScenarioSet scenarios;
  BatterySpec battery;  // aggregated
  double soc_now = 0.0;
  ImbalanceTariff tariff;
  double c0 = 0.1;  // weight on |imbalance|
  double c1 = 1.0;  // weight on imbalance cost

  std::size_t window() const { return supply.size(); }
  void validate() const;
};

struct FormulationOptions {
  // Segment indicators become continuous in [0, 1].
  bool relax_segment_binaries = false;
  // Caps the outer segments at the largest reachable imbalance instead of big_m.
  bool tighten_big_m = true;
};

// The built problem and where each modelling variable lives in it.
struct WindowModel {
  milp::MilpProblem problem;
  int periods = 0;
  int scenarios = 0;
  int segments = 0;
  int indicators = 0;  // per (period, scenario): side selector then saturation flags
  std::vector<int> p, s, ax, x;
  std::vector<int> im, u;  // period * scenarios + scenario
  std::vector<int> z;      // (period * scenarios + scenario) * segments + segment
  std::vector<int> y;      // (period * scenarios + scenario) * indicators + index

  int cell(int i, int sc) const { return i * scenarios + sc; }
  int z_at(int i, int sc, int k) const { return z[cell(i, sc) * segments + k]; }
};

WindowModel build_problem(const WindowInput& input, const FormulationOptions& options = {});

// Maps any point of the model to a fully consistent one: charge flags from
// the dispatch sign, exact products, the SOC path, canonical segment fill
// and absolute values. Returns nothing if the SOC path leaves its bounds.
std::optional<std::vector<double>> complete_solution(const WindowInput& input, const WindowModel& model,
                                                     std::span<const double> point);

// Simplex basis of the idle dispatch (P = 0 throughout) with canonical
// segment fill. It is primal feasible, so the root relaxation needs no
// feasibility phase.
milp::Basis idle_basis(const WindowInput& input, const WindowModel& model);

struct SolveOptions {
  FormulationOptions formulation;
  // Defaults to idle_basis.
  const milp::Basis* warm_start = nullptr;
  std::size_t node_limit = 100'000;
  bool use_heuristic = true;
};

struct DispatchDecision {
  double p_first = 0.0;  // + charge, - discharge, kWh per period
  double soc_next = 0.0;
  double expected_objective = 0.0;
  std::vector<double> per_scenario_imbalance;
  std::vector<double> plan;  // dispatch for every window period
  std::vector<double> soc_plan;
  milp::MilpSolution solution;
};

// Throws WindowSolveError when the solver finds no feasible dispatch.
DispatchDecision solve_window(const WindowInput& input, const SolveOptions& options = {});

class WindowSolveError : public SolverError {
 public:
  WindowSolveError(const std::string& what, std::string lp_text) : SolverError(what), lp_text_(std::move(lp_text)) {}
  const std::string& lp_text() const { return lp_text_; }

 private:
  std::string lp_text_;
};

struct VerificationReport {
  std::vector<std::string> issues;
  double max_cost_error = 0.0;
  bool clean() const { return issues.empty(); }
};

// Checks a solution of `model` against the scalar tariff, the segment fill
// order and the charge-product identity.
VerificationReport verify_solution(const WindowInput& input, const WindowModel& model, std::span<const double> x);

}  // namespace imb
