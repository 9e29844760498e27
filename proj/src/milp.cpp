#include "imb/milp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <string>

#include "simplex.hpp"

namespace imb::milp {

int LinearProgram::add_variable(double lower, double upper, double cost, std::string name) {
  const int id = num_vars();
  if (name.empty()) name = "x" + std::to_string(id);
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  names_.push_back(std::move(name));
  return id;
}

int LinearProgram::add_constraint(std::vector<Term> terms, Relation relation, double rhs, std::string name) {
  const int id = num_constraints();
  if (name.empty()) name = "c" + std::to_string(id);
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> merged;
  merged.reserve(terms.size());
  for (const auto& t : terms) {
    if (!merged.empty() && merged.back().var == t.var)
      merged.back().coef += t.coef;
    else
      merged.push_back(t);
  }
  std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
  rows_.push_back(Constraint{std::move(merged), relation, rhs, std::move(name)});
  return id;
}

void LinearProgram::set_bounds(int var, double lower, double upper) {
  lower_.at(var) = lower;
  upper_.at(var) = upper;
}

std::size_t LinearProgram::nonzeros() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.terms.size();
  return n;
}

void LinearProgram::validate() const {
  const int n = num_vars();
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(cost_[j])) throw ValidationError("variable " + names_[j] + ": cost not finite");
    if (std::isnan(lower_[j]) || std::isnan(upper_[j]) || lower_[j] > upper_[j] || lower_[j] == kInf ||
        upper_[j] == -kInf)
      throw ValidationError("variable " + names_[j] + ": invalid bounds");
  }
  for (const auto& r : rows_) {
    if (!std::isfinite(r.rhs)) throw ValidationError("constraint " + r.name + ": rhs not finite");
    for (const auto& t : r.terms) {
      if (t.var < 0 || t.var >= n) throw ValidationError("constraint " + r.name + ": bad variable index");
      if (!std::isfinite(t.coef)) throw ValidationError("constraint " + r.name + ": coefficient not finite");
    }
  }
}

void MilpProblem::add_binary(int var, int priority) {
  if (branch_priority.size() < binaries.size()) branch_priority.resize(binaries.size(), 0);
  binaries.push_back(var);
  branch_priority.push_back(priority);
}

void MilpProblem::validate() const {
  lp.validate();
  if (!branch_priority.empty() && branch_priority.size() != binaries.size())
    throw ValidationError("branch_priority must be empty or match binaries");
  for (int b : binaries) {
    if (b < 0 || b >= lp.num_vars()) throw ValidationError("binary index out of range");
    if (lp.lower()[b] < 0.0 || lp.upper()[b] > 1.0)
      throw ValidationError("binary " + lp.name(b) + " must have bounds within [0, 1]");
  }
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::NodeLimit: return "node_limit";
  }
  return "unknown";
}

double objective_value(const LinearProgram& lp, std::span<const double> x) {
  double s = 0.0;
  for (int j = 0; j < lp.num_vars(); ++j) s += lp.cost()[j] * x[j];
  return s;
}

double max_violation(const LinearProgram& lp, std::span<const double> x) {
  double worst = 0.0;
  for (int j = 0; j < lp.num_vars(); ++j) {
    worst = std::max(worst, lp.lower()[j] - x[j]);
    worst = std::max(worst, x[j] - lp.upper()[j]);
  }
  for (const auto& r : lp.constraints()) {
    double big = 0.0;
    double lhs = 0.0;
    for (const auto& t : r.terms) {
      big = std::max(big, std::abs(t.coef));
      lhs += t.coef * x[t.var];
    }
    const double scale = big > 0.0 ? 1.0 / big : 1.0;
    const double diff = (lhs - r.rhs) * scale;
    switch (r.relation) {
      case Relation::LessEqual: worst = std::max(worst, diff); break;
      case Relation::GreaterEqual: worst = std::max(worst, -diff); break;
      case Relation::Equal: worst = std::max(worst, std::abs(diff)); break;
    }
  }
  return worst;
}

MilpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
  lp.validate();
  detail::Simplex simplex(lp);
  const auto r = simplex.solve(options.warm_start, options.max_iterations);
  MilpSolution out;
  out.status = r.status;
  out.lp_iterations = r.iterations;
  out.nodes = 1;
  if (r.status == Status::Optimal) {
    out.x = simplex.primal();
    out.objective = objective_value(lp, out.x);
    out.duals = simplex.duals();
    out.basis = simplex.basis();
  }
  return out;
}

namespace {

struct Node {
  double bound;
  std::size_t id;
  std::vector<std::pair<int, std::int8_t>> fixings;  // (binary var, value)
  std::shared_ptr<const Basis> basis;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

}  // namespace

MilpSolution solve_milp(const MilpProblem& problem, const MilpOptions& options) {
  problem.validate();
  const auto& lp = problem.lp;
  detail::Simplex simplex(lp);

  std::vector<int> priority(problem.binaries.size(), 0);
  if (!problem.branch_priority.empty()) priority = problem.branch_priority;

  MilpSolution out;
  bool have_incumbent = false;
  double incumbent_obj = kInf;
  std::vector<double> incumbent;

  auto snap = [&](std::vector<double>& x) {
    for (int b : problem.binaries) x[b] = x[b] < 0.5 ? 0.0 : 1.0;
  };
  auto consider = [&](std::vector<double> x) {
    for (int b : problem.binaries)
      if (std::abs(x[b] - std::round(x[b])) > kIntegralityTol) return;
    snap(x);
    if (max_violation(lp, x) > kFeasibilityTol) return;
    const double obj = objective_value(lp, x);
    if (obj < incumbent_obj) {
      incumbent_obj = obj;
      incumbent = std::move(x);
      have_incumbent = true;
    }
  };
  auto closes = [&](double bound) {
    return have_incumbent && bound >= incumbent_obj - options.gap_tol * std::max(1.0, std::abs(incumbent_obj));
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::size_t next_id = 0;
  std::shared_ptr<const Basis> root_basis;
  if (options.warm_start) root_basis = std::make_shared<Basis>(*options.warm_start);
  open.push(Node{-kInf, next_id++, {}, root_basis});
  std::shared_ptr<const Basis> root_lp_basis;

  while (!open.empty()) {
    if (out.nodes >= options.node_limit) {
      out.status = Status::NodeLimit;
      break;
    }
    Node node = open.top();
    open.pop();
    if (closes(node.bound)) continue;

    for (int b : problem.binaries) simplex.set_bounds(b, lp.lower()[b], lp.upper()[b]);
    for (auto [var, value] : node.fixings) simplex.set_bounds(var, value, value);

    const auto r = simplex.solve(node.basis.get(), 2'000'000);
    ++out.nodes;
    out.lp_iterations += r.iterations;
    if (r.status == Status::Infeasible) continue;
    if (r.status == Status::Unbounded) {
      if (out.nodes == 1) {
        out.status = Status::Unbounded;
        return out;
      }
      continue;
    }
    auto basis = std::make_shared<const Basis>(simplex.basis());
    if (!root_lp_basis) root_lp_basis = basis;
    if (closes(r.objective)) continue;

    std::vector<double> x = simplex.primal();
    if (options.heuristic) {
      if (auto candidate = options.heuristic(x)) {
        if (static_cast<int>(candidate->size()) == lp.num_vars()) consider(std::move(*candidate));
      }
      if (closes(r.objective)) continue;
    }

    int branch = -1;
    int branch_prio = 0;
    double branch_dist = kInf;
    for (std::size_t q = 0; q < problem.binaries.size(); ++q) {
      const int b = problem.binaries[q];
      const double frac = x[b] - std::floor(x[b]);
      if (std::min(frac, 1.0 - frac) <= kIntegralityTol) continue;
      const double dist = std::abs(frac - 0.5);
      if (branch < 0 || priority[q] > branch_prio || (priority[q] == branch_prio && dist < branch_dist)) {
        branch = b;
        branch_prio = priority[q];
        branch_dist = dist;
      }
    }
    if (branch < 0) {
      consider(std::move(x));
      continue;
    }
    for (std::int8_t v : {std::int8_t{0}, std::int8_t{1}}) {
      Node child{r.objective, next_id++, node.fixings, basis};
      child.fixings.emplace_back(branch, v);
      open.push(std::move(child));
    }
  }

  if (out.status != Status::NodeLimit) out.status = have_incumbent ? Status::Optimal : Status::Infeasible;
  out.has_incumbent = have_incumbent;
  if (have_incumbent) {
    out.x = std::move(incumbent);
    out.objective = incumbent_obj;
  }
  // The root relaxation's basis is the useful warm start for a related problem.
  if (root_lp_basis) out.basis = *root_lp_basis;
  return out;
}

}  // namespace imb::milp
