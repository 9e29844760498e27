#include "imb/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imb/lp_format.hpp"

namespace imb {

using milp::kInf;
using milp::Relation;

void WindowInput::validate() const {
  if (supply.empty()) throw ValidationError("window must contain at least one period");
  for (double v : supply)
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("contracted supply must be finite and >= 0");
  if (scenarios.size() == 0) throw ValidationError("window needs at least one scenario");
  if (scenarios.lags() != supply.size()) throw ValidationError("scenario length differs from the window");
  if (scenarios.probabilities.size() != scenarios.size()) throw ValidationError("one probability per scenario required");
  double total = 0.0;
  for (double pr : scenarios.probabilities) {
    if (!(pr >= 0.0)) throw ValidationError("scenario probabilities must be >= 0");
    total += pr;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("scenario probabilities must sum to 1");
  for (const auto& row : scenarios.perturbations)
    if (row.size() != supply.size()) throw ValidationError("scenario length differs from the window");
  battery.validate();
  tariff.validate();
  if (!(c0 >= 0.0) || !(c1 >= 0.0) || !std::isfinite(c0) || !std::isfinite(c1))
    throw ValidationError("objective weights must be finite and >= 0");
  const double tol = 1e-9 * std::max(1.0, battery.soc_max_kwh());
  if (!std::isfinite(soc_now) || soc_now < battery.soc_min_kwh() - tol || soc_now > battery.soc_max_kwh() + tol)
    throw ValidationError("initial SOC " + std::to_string(soc_now) + " kWh outside [" +
                          std::to_string(battery.soc_min_kwh()) + ", " + std::to_string(battery.soc_max_kwh()) + "]");
}

namespace {

// Segment widths for one cell; inner segments are exactly the threshold.
std::vector<double> cell_widths(const WindowInput& in, double reach, bool tighten) {
  const auto& t = in.tariff;
  const std::size_t h = t.half();
  std::vector<double> w(t.segment_count());
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = t.segment_width(k);
    const bool outer = k == 0 || k + 1 == w.size();
    if (outer && tighten) {
      const double needed = std::max(reach - static_cast<double>(h - 1) * t.threshold_kwh, 0.0) + 1.0;
      w[k] = std::min(w[k], needed);
    }
  }
  return w;
}

double max_power(const BatterySpec& b) { return std::max(b.power_charge_kw, b.power_discharge_kw); }

}  // namespace

WindowModel build_problem(const WindowInput& input, const FormulationOptions& options) {
  input.validate();
  const auto& bat = input.battery;
  const auto& tar = input.tariff;
  const int w = static_cast<int>(input.window());
  const int ns = static_cast<int>(input.scenarios.size());
  const int nk = static_cast<int>(tar.segment_count());
  const int h = nk / 2;
  const double pc = bat.power_charge_kw, pd = bat.power_discharge_kw;
  const double ec = bat.eta_charge, ed = bat.eta_discharge;

  WindowModel m;
  m.periods = w;
  m.scenarios = ns;
  m.segments = nk;
  m.indicators = nk - 1;
  auto& lp = m.problem.lp;
  const auto tag = [](const char* base, int a) { return std::string(base) + "_" + std::to_string(a); };
  const auto tag2 = [](const char* base, int a, int b) {
    return std::string(base) + "_" + std::to_string(a) + "_" + std::to_string(b);
  };

  for (int i = 0; i < w; ++i) {
    m.p.push_back(lp.add_variable(-pd, pc, 0.0, tag("P", i)));
    m.s.push_back(lp.add_variable(0.0, 1.0, 0.0, tag("S", i)));
    // S*P is never negative: S = 1 exactly when P >= 0.
    m.ax.push_back(lp.add_variable(0.0, pc, 0.0, tag("Ax", i)));
    m.x.push_back(lp.add_variable(bat.soc_min_kwh(), bat.soc_max_kwh(), 0.0, tag("X", i)));
    m.problem.add_binary(m.s.back(), 1);
  }

  for (int i = 0; i < w; ++i) {
    const int P = m.p[i], S = m.s[i], A = m.ax[i], X = m.x[i];
    std::vector<milp::Term> soc{{X, 1.0}, {A, -(ec - 1.0 / ed)}, {P, -1.0 / ed}};
    double rhs = input.soc_now;
    if (i > 0) {
      soc.push_back({m.x[i - 1], -1.0});
      rhs = 0.0;
    }
    lp.add_constraint(std::move(soc), Relation::Equal, rhs, tag("soc", i));
    lp.add_constraint({{P, 1.0}, {S, -pd}}, Relation::GreaterEqual, -pd, tag("mld_a", i));
    lp.add_constraint({{P, 1.0}, {S, -pc}}, Relation::LessEqual, 0.0, tag("mld_b", i));
    lp.add_constraint({{A, 1.0}, {P, -1.0}, {S, pd}}, Relation::LessEqual, pd, tag("mld_c", i));
    lp.add_constraint({{A, -1.0}, {P, 1.0}, {S, pd}}, Relation::LessEqual, pd, tag("mld_d", i));
    lp.add_constraint({{A, 1.0}, {S, -pc}}, Relation::LessEqual, 0.0, tag("mld_e", i));
    lp.add_constraint({{A, -1.0}, {S, -pc}}, Relation::LessEqual, 0.0, tag("mld_f", i));
  }

  m.im.resize(static_cast<std::size_t>(w) * ns);
  m.u.resize(m.im.size());
  m.z.resize(m.im.size() * nk);
  m.y.resize(m.im.size() * m.indicators);
  const double ylo = 0.0, yhi = 1.0;
  for (int i = 0; i < w; ++i) {
    for (int sc = 0; sc < ns; ++sc) {
      const int c = m.cell(i, sc);
      const double prob = input.scenarios.probabilities[sc];
      const double base = input.supply[i] - input.scenarios.demand(sc, i);
      const auto width = cell_widths(input, std::abs(base) + max_power(bat), options.tighten_big_m);

      const int Im = lp.add_variable(-kInf, kInf, 0.0, tag2("Im", i, sc));
      const int U = lp.add_variable(0.0, kInf, input.c0 * prob, tag2("U", i, sc));
      m.im[c] = Im;
      m.u[c] = U;
      for (int k = 0; k < nk; ++k) {
        const bool shortage = k < h;
        const double lo = shortage ? -width[k] : 0.0, hi = shortage ? 0.0 : width[k];
        m.z[c * nk + k] = lp.add_variable(lo, hi, -input.c1 * prob * tar.prices[k],
                                          tag2("Z", i, sc) + "_" + std::to_string(k + 1));
      }
      for (int j = 0; j < m.indicators; ++j) {
        const int v = lp.add_variable(ylo, yhi, 0.0, tag2("Y", i, sc) + "_" + std::to_string(j));
        m.y[c * m.indicators + j] = v;
        if (!options.relax_segment_binaries) m.problem.add_binary(v, 0);
      }
      const auto Z = [&](int k) { return m.z[c * nk + k]; };
      const auto Y = [&](int j) { return m.y[c * m.indicators + j]; };

      const std::string cname = tag2("c", i, sc);
      lp.add_constraint({{Im, 1.0}, {m.p[i], 1.0}}, Relation::Equal, base, cname + "_im");
      std::vector<milp::Term> sum{{Im, 1.0}};
      for (int k = 0; k < nk; ++k) sum.push_back({Z(k), -1.0});
      lp.add_constraint(std::move(sum), Relation::Equal, 0.0, cname + "_seg");
      lp.add_constraint({{U, 1.0}, {Im, -1.0}}, Relation::GreaterEqual, 0.0, cname + "_abs_pos");
      lp.add_constraint({{U, 1.0}, {Im, 1.0}}, Relation::GreaterEqual, 0.0, cname + "_abs_neg");

      // Side selector: 1 opens the surplus half, 0 the shortage half.
      const int side = Y(0);
      lp.add_constraint({{Z(h - 1), 1.0}, {side, -width[h - 1]}}, Relation::GreaterEqual, -width[h - 1],
                        cname + "_side_short");
      lp.add_constraint({{Z(h), 1.0}, {side, -width[h]}}, Relation::LessEqual, 0.0, cname + "_side_surplus");
      // Saturation flags: segment at depth d full before depth d+1 opens.
      for (int d = 0; d + 1 < h; ++d) {
        const int ys = Y(1 + d);
        const int inner = h - 1 - d, outer = inner - 1;
        lp.add_constraint({{Z(inner), 1.0}, {ys, width[inner]}}, Relation::LessEqual, 0.0,
                          cname + "_sat_short_" + std::to_string(d));
        lp.add_constraint({{Z(outer), 1.0}, {ys, width[outer]}}, Relation::GreaterEqual, 0.0,
                          cname + "_open_short_" + std::to_string(d));
      }
      for (int d = 0; d + 1 < h; ++d) {
        const int ys = Y(h + d);
        const int inner = h + d, outer = inner + 1;
        lp.add_constraint({{Z(inner), 1.0}, {ys, -width[inner]}}, Relation::GreaterEqual, 0.0,
                          cname + "_sat_surplus_" + std::to_string(d));
        lp.add_constraint({{Z(outer), 1.0}, {ys, -width[outer]}}, Relation::LessEqual, 0.0,
                          cname + "_open_surplus_" + std::to_string(d));
      }
    }
  }
  return m;
}

std::optional<std::vector<double>> complete_solution(const WindowInput& input, const WindowModel& m,
                                                     std::span<const double> point) {
  const auto& bat = input.battery;
  const auto& lp = m.problem.lp;
  const int nk = m.segments, h = nk / 2;
  std::vector<double> x(point.begin(), point.end());
  double soc = input.soc_now;
  const double tol = 1e-9 * std::max(1.0, bat.soc_max_kwh());
  for (int i = 0; i < m.periods; ++i) {
    const double p = std::clamp(x[m.p[i]], -bat.power_discharge_kw, bat.power_charge_kw);
    double s = p > 0.0 ? 1.0 : p < 0.0 ? 0.0 : std::round(std::clamp(x[m.s[i]], 0.0, 1.0));
    const double ax = s * p;
    soc = soc + (bat.eta_charge - 1.0 / bat.eta_discharge) * ax + p / bat.eta_discharge;
    if (soc < bat.soc_min_kwh() - tol || soc > bat.soc_max_kwh() + tol) return std::nullopt;
    soc = std::clamp(soc, bat.soc_min_kwh(), bat.soc_max_kwh());
    x[m.p[i]] = p;
    x[m.s[i]] = s;
    x[m.ax[i]] = ax;
    x[m.x[i]] = soc;
  }
  for (int i = 0; i < m.periods; ++i) {
    for (int sc = 0; sc < m.scenarios; ++sc) {
      const int c = m.cell(i, sc);
      const double im = input.supply[i] - input.scenarios.demand(sc, i) - x[m.p[i]];
      x[m.im[c]] = im;
      x[m.u[c]] = std::abs(im);
      for (int k = 0; k < nk; ++k) x[m.z[c * nk + k]] = 0.0;
      for (int j = 0; j < m.indicators; ++j) x[m.y[c * m.indicators + j]] = 0.0;
      double remaining = std::abs(im);
      x[m.y[c * m.indicators]] = im > 0.0 ? 1.0 : 0.0;
      for (int d = 0; d < h && remaining > 0.0; ++d) {
        const int k = im < 0.0 ? h - 1 - d : h + d;
        const double width = im < 0.0 ? -lp.lower()[m.z[c * nk + k]] : lp.upper()[m.z[c * nk + k]];
        const double take = d + 1 == h ? remaining : std::min(remaining, width);
        x[m.z[c * nk + k]] = im < 0.0 ? -take : take;
        remaining -= take;
        if (remaining > 0.0 && d + 1 < h) x[m.y[c * m.indicators + (im < 0.0 ? 1 + d : h + d)]] = 1.0;
      }
    }
  }
  return x;
}

milp::Basis idle_basis(const WindowInput& input, const WindowModel& m) {
  using B = milp::Basis;
  const auto& lp = m.problem.lp;
  const int n = lp.num_vars();
  const int nk = m.segments, h = nk / 2;
  const int rows_per_period = 7, rows_per_cell = 6 + 4 * (h - 1);
  milp::Basis basis;
  basis.state.assign(static_cast<std::size_t>(n + lp.num_constraints()), B::Basic);
  auto row = [&](int r) -> std::int8_t& { return basis.state[n + r]; };

  for (int i = 0; i < m.periods; ++i) {
    // P is pinned at 0 by its tight charge-limit row; X follows the SOC row.
    basis.state[m.s[i]] = B::AtLower;
    basis.state[m.ax[i]] = B::AtLower;
    const int r0 = i * rows_per_period;
    row(r0) = B::AtLower;
    row(r0 + 2) = B::AtUpper;
  }

  const auto x = complete_solution(input, m, std::vector<double>(n, 0.0));
  if (!x) throw ValidationError("initial SOC outside the battery limits");
  for (int i = 0; i < m.periods; ++i) {
    for (int sc = 0; sc < m.scenarios; ++sc) {
      const int c = m.cell(i, sc);
      const double im = (*x)[m.im[c]];
      // The segment where the canonical fill stops carries the remainder.
      int open = im < 0.0 ? h - 1 : h;
      for (int k = 0; k < nk; ++k) {
        const int v = m.z[c * nk + k];
        const double z = (*x)[v];
        if (z != 0.0) open = im < 0.0 ? std::min(open, k) : std::max(open, k);
      }
      for (int k = 0; k < nk; ++k) {
        const int v = m.z[c * nk + k];
        if (k == open) continue;
        basis.state[v] = (*x)[v] == lp.lower()[v] ? B::AtLower : B::AtUpper;
      }
      for (int j = 0; j < m.indicators; ++j) {
        const int v = m.y[c * m.indicators + j];
        basis.state[v] = (*x)[v] > 0.5 ? B::AtUpper : B::AtLower;
      }
      const int r0 = m.periods * rows_per_period + c * rows_per_cell;
      row(r0) = B::AtLower;                // im
      row(r0 + 1) = B::AtLower;            // seg
      row(r0 + (im >= 0.0 ? 2 : 3)) = B::AtLower;  // the tight absolute-value row
    }
  }
  return basis;
}

DispatchDecision solve_window(const WindowInput& input, const SolveOptions& options) {
  const auto model = build_problem(input, options.formulation);
  milp::MilpOptions mo;
  mo.node_limit = options.node_limit;
  milp::Basis start;
  if (options.warm_start) {
    mo.warm_start = options.warm_start;
  } else {
    start = idle_basis(input, model);
    mo.warm_start = &start;
  }
  if (options.use_heuristic)
    mo.heuristic = [&](std::span<const double> point) { return complete_solution(input, model, point); };
  auto sol = milp::solve_milp(model.problem, mo);
  const bool usable = sol.status == milp::Status::Optimal || (sol.status == milp::Status::NodeLimit && sol.has_incumbent);
  if (!usable)
    throw WindowSolveError(std::string("window solve failed: ") + milp::to_string(sol.status),
                           milp::write_lp(model.problem));

  DispatchDecision d;
  const auto& x = sol.x;
  for (int i = 0; i < model.periods; ++i) {
    d.plan.push_back(x[model.p[i]]);
    d.soc_plan.push_back(x[model.x[i]]);
  }
  d.p_first = d.plan.front();
  d.soc_next = d.soc_plan.front();
  d.expected_objective = sol.objective;
  for (int sc = 0; sc < model.scenarios; ++sc) d.per_scenario_imbalance.push_back(x[model.im[model.cell(0, sc)]]);
  d.solution = std::move(sol);
  return d;
}

VerificationReport verify_solution(const WindowInput& input, const WindowModel& m, std::span<const double> x) {
  VerificationReport rep;
  const auto& tar = input.tariff;
  const auto& lp = m.problem.lp;
  const int nk = m.segments, h = nk / 2;
  auto flag = [&](std::string what) { rep.issues.push_back(std::move(what)); };
  auto at = [](int i, int sc) { return "(period " + std::to_string(i) + ", scenario " + std::to_string(sc) + ")"; };

  for (int i = 0; i < m.periods; ++i) {
    const double p = x[m.p[i]], s = x[m.s[i]], ax = x[m.ax[i]];
    if (std::abs(s - std::round(s)) > milp::kIntegralityTol) {
      flag("charge flag not integral at period " + std::to_string(i));
    } else if (std::abs(ax - std::round(s) * p) > 1e-6 * std::max(1.0, std::abs(p))) {
      flag("charge product Ax != S*P at period " + std::to_string(i));
    }
  }
  for (int i = 0; i < m.periods; ++i) {
    for (int sc = 0; sc < m.scenarios; ++sc) {
      const int c = m.cell(i, sc);
      const double im = x[m.im[c]];
      const double expected_im = input.supply[i] - input.scenarios.demand(sc, i) - x[m.p[i]];
      if (std::abs(im - expected_im) > 1e-6 * std::max(1.0, std::abs(expected_im)))
        flag("imbalance identity violated at " + at(i, sc));
      double zsum = 0.0, zcost = 0.0;
      bool short_active = false, surplus_active = false;
      for (int k = 0; k < nk; ++k) {
        const double z = x[m.z[c * nk + k]];
        zsum += z;
        zcost -= tar.prices[k] * z;
        if (k < h && z < -1e-6) short_active = true;
        if (k >= h && z > 1e-6) surplus_active = true;
      }
      if (std::abs(zsum - im) > 1e-6 * std::max(1.0, std::abs(im))) flag("segments do not sum to imbalance at " + at(i, sc));
      if (short_active && surplus_active) flag("both tariff halves active at " + at(i, sc));
      for (int d = 0; d + 1 < h; ++d) {
        for (int side = 0; side < 2; ++side) {
          const int inner = side == 0 ? h - 1 - d : h + d;
          const int outer = side == 0 ? inner - 1 : inner + 1;
          const double zi = x[m.z[c * nk + inner]], zo = x[m.z[c * nk + outer]];
          const double wi = side == 0 ? -lp.lower()[m.z[c * nk + inner]] : lp.upper()[m.z[c * nk + inner]];
          if (std::abs(zo) > 1e-6 && std::abs(std::abs(zi) - wi) > 1e-6 * std::max(1.0, wi))
            flag("fill order violated at " + at(i, sc) + ", segment " + std::to_string(outer + 1) +
                 " active before segment " + std::to_string(inner + 1) + " is full");
        }
      }
      const double err = std::abs(zcost - imbalance_cost(im, tar));
      rep.max_cost_error = std::max(rep.max_cost_error, err);
      if (err > 1e-4) flag("segment cost differs from tariff by " + std::to_string(err) + " JPY at " + at(i, sc));
    }
  }
  return rep;
}

}  // namespace imb
