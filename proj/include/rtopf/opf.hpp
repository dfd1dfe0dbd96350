#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtopf/common.hpp"
#include "rtopf/grid.hpp"
#include "rtopf/powerflow.hpp"

namespace rtopf {

// Feasibility tolerance for every operating constraint, p.u.
inline constexpr double kConstraintTol = 1e-6;

// Energy prices, currency per MWh (per MVArh for reactive import).
struct PriceModel {
  double price_wind = 50.0;
  double price_loss = 45.0;
  double price_p_import = 40.0;
  double price_q_import = 5.0;
};

// One scenario instance of the curtailment OPF. Network and admittance are
// shared immutable inputs; wind_available holds this scenario's per-WS
// injectable power (p.u.).
struct OpfProblem {
  const Network* net = nullptr;
  const AdmittanceMatrix* y = nullptr;
  std::vector<double> wind_available;
  PriceModel prices;
};

enum class SolveStatus { Optimal, Infeasible, Fallback };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::Fallback:
      return "fallback";
  }
  return "unknown";
}

struct OpfSolution {
  std::vector<double> beta;  // per-WS curtailment factor in [0,1]
  double objective = std::numeric_limits<double>::quiet_NaN();
  PowerFlowState state;
  SolveStatus status = SolveStatus::Fallback;
};

// Builds the all-zero-injection fallback solution (beta = 0 per WS).
inline OpfSolution fallback_solution(int n_ws) {
  OpfSolution sol;
  sol.beta.assign(n_ws, 0.0);
  sol.status = SolveStatus::Fallback;
  return sol;
}

// One exact evaluation of the reduced problem at a control point.
// `margins` are signed constraint values (<= 0 feasible) in a fixed layout:
// per PQ bus [v_min - |V|, |V| - v_max], per branch [|S| - s_max], then
// [-P_S, -Q_S]. `violations` is the clipped max(0, margin) vector with one
// extra trailing entry: the non-physical indicator (+inf when the embedded
// power flow did not converge, 0 otherwise).
struct Evaluation {
  double objective = -std::numeric_limits<double>::infinity();
  PowerFlowState state;
  std::vector<double> margins;
  std::vector<double> violations;
  double max_violation = std::numeric_limits<double>::infinity();

  bool feasible(double tol = kConstraintTol) const {
    return max_violation <= tol;
  }
};

// Names for the margin layout, for binding-constraint reporting.
inline std::vector<std::string> margin_names(const Network& net) {
  std::vector<std::string> names;
  const int slack = net.slack_index();
  for (int i = 0; i < net.n_bus(); ++i) {
    if (i == slack) continue;
    names.push_back("v_min@bus" + std::to_string(i));
    names.push_back("v_max@bus" + std::to_string(i));
  }
  for (int k = 0; k < net.n_branch(); ++k)
    names.push_back("s_max@branch" + std::to_string(k));
  names.push_back("p_slack>=0");
  names.push_back("q_slack>=0");
  return names;
}

// Runs the embedded power flow at injections beta_i * wind_available(i) and
// scores the techno-economic objective
//   f = price_wind * P_wind_injected - price_loss * P_loss
//       - price_p_import * P_S - price_q_import * Q_S     [currency/h]
// with all power terms converted to MW at the network base.
inline Evaluation evaluate(const OpfProblem& problem,
                           std::span<const double> beta,
                           const PowerFlowOptions& pf_opts = {}) {
  const Network& net = *problem.net;
  if (static_cast<int>(beta.size()) != net.n_ws())
    throw InternalError("evaluate: beta size != number of wind stations");

  Evaluation ev;
  const InjectionSet inj =
      wind_injections(net, problem.wind_available, beta);
  ev.state = solve_powerflow(net, *problem.y, inj, pf_opts);

  if (!ev.state.converged) {
    // Non-physical point: dedicated violation with value +inf.
    ev.violations.assign(1, std::numeric_limits<double>::infinity());
    return ev;
  }

  const int slack = net.slack_index();
  for (int i = 0; i < net.n_bus(); ++i) {
    if (i == slack) continue;
    const double v = ev.state.v_mag(i);
    ev.margins.push_back(net.buses[i].v_min - v);
    ev.margins.push_back(v - net.buses[i].v_max);
  }
  const std::vector<double> flows = branch_flows(net, ev.state);
  for (int k = 0; k < net.n_branch(); ++k)
    ev.margins.push_back(flows[k] - net.branches[k].s_max);
  ev.margins.push_back(-ev.state.p_slack);
  ev.margins.push_back(-ev.state.q_slack);

  ev.max_violation = 0;
  ev.violations.reserve(ev.margins.size() + 1);
  for (double m : ev.margins) {
    const double v = std::max(0.0, m);
    ev.violations.push_back(v);
    ev.max_violation = std::max(ev.max_violation, v);
  }
  ev.violations.push_back(0.0);  // physical point

  double wind_injected = 0;
  for (int w = 0; w < net.n_ws(); ++w)
    wind_injected += beta[w] * problem.wind_available[w];
  const double loss = total_losses(net, ev.state);
  const PriceModel& p = problem.prices;
  ev.objective = p.price_wind * net.to_mw(wind_injected) -
                 p.price_loss * net.to_mw(loss) -
                 p.price_p_import * net.to_mw(ev.state.p_slack) -
                 p.price_q_import * net.to_mw(ev.state.q_slack);
  return ev;
}

// Control grid {0, res, 2*res, ..., 1}; both endpoints always included.
inline std::vector<double> grid_values(double resolution) {
  if (!(resolution > 0) || resolution > 1)
    throw Error("grid resolution must be in (0, 1]");
  const int steps = static_cast<int>(std::ceil(1.0 / resolution - 1e-9));
  std::vector<double> vals;
  vals.reserve(steps + 1);
  for (int k = 0; k < steps; ++k) vals.push_back(k * resolution);
  vals.push_back(1.0);
  return vals;
}

struct OpfOptions {
  double grid_step = 0.05;       // coarse seed resolution per WS
  double penalty_initial = 100;  // augmented-Lagrangian penalty start
  double penalty_growth = 10;
  int outer_rounds = 8;
  int inner_iterations = 30;
  double fd_step = 1e-4;         // finite-difference step over beta
  DeadlineToken deadline;        // checked between outer iterations
  PowerFlowOptions pf;
};

namespace detail {

inline void check_problem(const OpfProblem& problem) {
  if (problem.net == nullptr || problem.y == nullptr)
    throw InternalError("OpfProblem: network/admittance not set");
  const Network& net = *problem.net;
  if (static_cast<int>(problem.wind_available.size()) != net.n_ws())
    throw Error("OpfProblem: wind_available size != number of wind stations");
  for (int w = 0; w < net.n_ws(); ++w) {
    const double avail = problem.wind_available[w];
    if (!(avail >= 0) || avail > net.wind_stations[w].p_rated + 1e-12)
      throw Error("OpfProblem: wind_available outside [0, p_rated] at WS " +
                  std::to_string(w));
  }
}

// Best point tracker with the documented tie-break: enumeration order is
// lexicographically ascending and updates are strict, so equal-objective
// optima resolve to the smallest beta.
struct BestPoint {
  std::vector<double> beta;
  Evaluation eval;
  bool set = false;

  void offer(std::span<const double> b, Evaluation&& ev) {
    if (!ev.feasible()) return;
    if (!set || ev.objective > eval.objective) {
      beta.assign(b.begin(), b.end());
      eval = std::move(ev);
      set = true;
    }
  }
};

// Classic Powell-Hestenes-Rockafellar term for one inequality margin.
inline double al_term(double margin, double lambda, double mu) {
  const double t = std::max(0.0, lambda + mu * margin);
  return (t * t - lambda * lambda) / (2.0 * mu);
}

}  // namespace detail

// Reduced-space scenario OPF over the curtailment factors only: the state
// is eliminated by the embedded power flow. A coarse feasibility-filtered
// grid seed is polished by projected gradient ascent on an augmented
// Lagrangian of the violation vector. Deterministic for fixed inputs; the
// deadline token (when limited) is polled between outer iterations and
// aborts to the beta = 0 fallback.
inline OpfSolution solve_opf(const OpfProblem& problem,
                             const OpfOptions& opts = {}) {
  detail::check_problem(problem);
  const Network& net = *problem.net;
  const int n_ws = net.n_ws();

  if (n_ws == 0) {
    // No controls: the problem is the demand-only base case.
    Evaluation ev = evaluate(problem, {}, opts.pf);
    OpfSolution sol;
    sol.objective = ev.objective;
    sol.state = ev.state;
    sol.status =
        ev.feasible() ? SolveStatus::Optimal : SolveStatus::Infeasible;
    return sol;
  }

  detail::BestPoint best;
  std::vector<double> least_bad_beta(n_ws, 0.0);
  double least_bad = std::numeric_limits<double>::infinity();

  // Grid seed, lexicographic ascending over {0, step, ..., 1}^n_ws.
  const std::vector<double> vals = grid_values(opts.grid_step);
  std::vector<int> idx(n_ws, 0);
  std::vector<double> beta(n_ws, 0.0);
  bool done = false;
  while (!done) {
    if (opts.deadline.expired()) return fallback_solution(n_ws);
    for (int w = 0; w < n_ws; ++w) beta[w] = vals[idx[w]];
    Evaluation ev = evaluate(problem, beta, opts.pf);
    if (ev.max_violation < least_bad) {
      least_bad = ev.max_violation;
      least_bad_beta = beta;
    }
    best.offer(beta, std::move(ev));
    int w = n_ws - 1;
    while (w >= 0 && ++idx[w] == static_cast<int>(vals.size())) {
      idx[w] = 0;
      --w;
    }
    done = w < 0;
  }

  // Polish from the best feasible grid point (or the least-violating one
  // if the whole grid is infeasible).
  std::vector<double> x = best.set ? best.beta : least_bad_beta;
  const int n_margin = static_cast<int>(margin_names(net).size());
  std::vector<double> lambda(n_margin, 0.0);
  double mu = opts.penalty_initial;

  auto merit = [&](std::span<const double> b) -> double {
    Evaluation ev = evaluate(problem, b, opts.pf);
    if (!ev.state.converged) return -std::numeric_limits<double>::infinity();
    double m = ev.objective;
    for (int j = 0; j < n_margin; ++j)
      m -= detail::al_term(ev.margins[j], lambda[j], mu);
    best.offer(b, std::move(ev));
    return m;
  };
  auto project = [](double v) { return std::clamp(v, 0.0, 1.0); };

  for (int round = 0; round < opts.outer_rounds; ++round) {
    if (opts.deadline.expired()) return fallback_solution(n_ws);

    double fx = merit(x);
    std::vector<double> grad(n_ws, 0.0);
    std::vector<double> trial(n_ws, 0.0);
    for (int it = 0; it < opts.inner_iterations; ++it) {
      // Central differences with the stencil shifted inside the box.
      const double h = opts.fd_step;
      for (int w = 0; w < n_ws; ++w) {
        trial = x;
        const double lo = std::max(0.0, x[w] - h);
        const double hi = std::min(1.0, x[w] + h);
        trial[w] = hi;
        const double f_hi = merit(trial);
        trial[w] = lo;
        const double f_lo = merit(trial);
        grad[w] = hi > lo ? (f_hi - f_lo) / (hi - lo) : 0.0;
      }

      // Backtracking line search along the projected ascent direction.
      double alpha = 0.2;
      bool moved = false;
      while (alpha >= 1e-9) {
        double step_sq = 0;
        for (int w = 0; w < n_ws; ++w) {
          trial[w] = project(x[w] + alpha * grad[w]);
          step_sq += (trial[w] - x[w]) * (trial[w] - x[w]);
        }
        if (step_sq == 0) break;
        const double ft = merit(trial);
        if (ft > fx + 1e-4 * step_sq / std::max(alpha, 1e-12)) {
          x = trial;
          fx = ft;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }

    // Multiplier update at the inner solution; stop once feasible and the
    // multipliers have settled.
    Evaluation ev = evaluate(problem, x, opts.pf);
    if (!ev.state.converged) break;
    double max_update = 0;
    for (int j = 0; j < n_margin; ++j) {
      const double next = std::max(0.0, lambda[j] + mu * ev.margins[j]);
      max_update = std::max(max_update, std::abs(next - lambda[j]));
      lambda[j] = next;
    }
    const bool feas = ev.feasible();
    best.offer(x, std::move(ev));
    if (feas && max_update <= 1e-9) break;
    mu *= opts.penalty_growth;
  }

  if (!best.set) {
    OpfSolution sol = fallback_solution(n_ws);
    sol.status = SolveStatus::Infeasible;
    sol.state = evaluate(problem, sol.beta, opts.pf).state;
    return sol;
  }
  OpfSolution sol;
  sol.beta = best.beta;
  sol.objective = best.eval.objective;
  sol.state = best.eval.state;
  sol.status = SolveStatus::Optimal;
  return sol;
}

// Exhaustive reference solve over the full control grid; the independent
// ground truth the reduced solver is tested against. Guarded so the grid
// stays tractable.
inline OpfSolution oracle_solve(const OpfProblem& problem, double resolution) {
  detail::check_problem(problem);
  const Network& net = *problem.net;
  const int n_ws = net.n_ws();

  if (n_ws == 0) {
    Evaluation ev = evaluate(problem, {});
    OpfSolution sol;
    sol.objective = ev.objective;
    sol.state = ev.state;
    sol.status =
        ev.feasible() ? SolveStatus::Optimal : SolveStatus::Infeasible;
    return sol;
  }

  const std::vector<double> vals = grid_values(resolution);
  double points = 1;
  for (int w = 0; w < n_ws; ++w) points *= static_cast<double>(vals.size());
  if (points > 1e6)
    throw Error("oracle_solve: grid of " + std::to_string(points) +
                " points exceeds the 1e6 guard; coarsen the resolution");

  detail::BestPoint best;
  std::vector<int> idx(n_ws, 0);
  std::vector<double> beta(n_ws, 0.0);
  bool done = false;
  while (!done) {
    for (int w = 0; w < n_ws; ++w) beta[w] = vals[idx[w]];
    best.offer(beta, evaluate(problem, beta));
    int w = n_ws - 1;
    while (w >= 0 && ++idx[w] == static_cast<int>(vals.size())) {
      idx[w] = 0;
      --w;
    }
    done = w < 0;
  }

  if (!best.set) {
    OpfSolution sol = fallback_solution(n_ws);
    sol.status = SolveStatus::Infeasible;
    sol.state = evaluate(problem, sol.beta).state;
    return sol;
  }
  OpfSolution sol;
  sol.beta = best.beta;
  sol.objective = best.eval.objective;
  sol.state = best.eval.state;
  sol.status = SolveStatus::Optimal;
  return sol;
}

}  // namespace rtopf
