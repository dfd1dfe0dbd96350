#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rtopf/common.hpp"
#include "rtopf/dispatch.hpp"
#include "rtopf/grid.hpp"
#include "rtopf/opf.hpp"
#include "rtopf/powerflow.hpp"
#include "rtopf/scenario.hpp"
#include "rtopf/scheduler.hpp"

namespace rtopf {

// Actual wind per update interval plus the per-horizon forecasts, p.u.
struct WindTrace {
  int horizons = 0;
  int updates = 0;  // per horizon
  std::vector<std::vector<double>> actual;    // [ws][horizon*updates + k]
  std::vector<std::vector<double>> forecast;  // [ws][horizon]

  double actual_at(int ws, int horizon, int interval) const {
    return actual[ws][horizon * updates + interval];
  }

  void validate(const Network& net) const {
    if (static_cast<int>(actual.size()) != net.n_ws() ||
        static_cast<int>(forecast.size()) != net.n_ws())
      throw Error("wind trace: one actual/forecast series per WS required");
    if (horizons < 1) throw Error("wind trace: at least one horizon");
    for (int w = 0; w < net.n_ws(); ++w) {
      if (static_cast<int>(actual[w].size()) != horizons * updates ||
          static_cast<int>(forecast[w].size()) != horizons)
        throw Error("wind trace: series length mismatch at WS " +
                    std::to_string(w));
      const double rated = net.wind_stations[w].p_rated;
      for (double v : actual[w])
        if (!(v >= 0) || v > rated + 1e-12)
          throw Error("wind trace: actual outside [0, p_rated] at WS " +
                      std::to_string(w));
      for (double v : forecast[w])
        if (!(v >= 0) || v > rated + 1e-12)
          throw Error("wind trace: forecast outside [0, p_rated] at WS " +
                      std::to_string(w));
    }
  }
};

namespace detail {

// Deterministic uniform in [0,1): mt19937_64 output is fixed by the
// standard; the 53-bit mapping keeps traces bit-identical everywhere.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Bounded random walk per WS clipped to [0, p_rated] with per-step
// magnitude <= volatility; each horizon's forecast is the mean of its
// actuals perturbed by a seeded error so the actuals straddle it.
inline WindTrace synthesize_trace(std::uint64_t seed, const Network& net,
                                  int horizons, double volatility,
                                  int updates_per_horizon = 6,
                                  const std::vector<double>* initial = nullptr) {
  if (horizons < 1) throw Error("synthesize_trace: horizons must be >= 1");
  if (!(volatility >= 0))
    throw Error("synthesize_trace: volatility must be >= 0");
  if (initial && static_cast<int>(initial->size()) != net.n_ws())
    throw Error("synthesize_trace: one initial value per WS required");

  WindTrace trace;
  trace.horizons = horizons;
  trace.updates = updates_per_horizon;
  std::mt19937_64 rng(seed);
  for (int w = 0; w < net.n_ws(); ++w) {
    const double rated = net.wind_stations[w].p_rated;
    double p = initial ? std::clamp((*initial)[w], 0.0, rated) : 0.5 * rated;
    std::vector<double> series;
    series.reserve(horizons * updates_per_horizon);
    for (int t = 0; t < horizons * updates_per_horizon; ++t) {
      p = std::clamp(p + (2.0 * detail::uniform01(rng) - 1.0) * volatility,
                     0.0, rated);
      series.push_back(p);
    }
    std::vector<double> fc;
    fc.reserve(horizons);
    for (int h = 0; h < horizons; ++h) {
      double mean = 0;
      for (int k = 0; k < updates_per_horizon; ++k)
        mean += series[h * updates_per_horizon + k];
      mean /= updates_per_horizon;
      const double err = (2.0 * detail::uniform01(rng) - 1.0) * volatility;
      fc.push_back(std::clamp(mean + err, 0.0, rated));
    }
    trace.actual.push_back(std::move(series));
    trace.forecast.push_back(std::move(fc));
  }
  return trace;
}

// Trace around externally provided forecasts (e.g. a forecast CSV): the
// actuals follow a seeded bounded walk that reverts toward the active
// horizon's forecast, so they straddle it without being pinned to it.
inline WindTrace synthesize_actuals(
    std::uint64_t seed, const Network& net,
    const std::vector<std::vector<double>>& forecasts,  // [ws][horizon], p.u.
    double volatility, int updates_per_horizon = 6) {
  if (static_cast<int>(forecasts.size()) != net.n_ws())
    throw Error("synthesize_actuals: one forecast series per WS required");
  if (forecasts.empty() || forecasts[0].empty())
    throw Error("synthesize_actuals: empty forecast series");
  const int horizons = static_cast<int>(forecasts[0].size());

  WindTrace trace;
  trace.horizons = horizons;
  trace.updates = updates_per_horizon;
  trace.forecast = forecasts;
  std::mt19937_64 rng(seed);
  for (int w = 0; w < net.n_ws(); ++w) {
    const double rated = net.wind_stations[w].p_rated;
    double p = std::clamp(forecasts[w][0], 0.0, rated);
    std::vector<double> series;
    series.reserve(horizons * updates_per_horizon);
    for (int h = 0; h < horizons; ++h) {
      const double target = forecasts[w][h];
      for (int k = 0; k < updates_per_horizon; ++k) {
        const double step =
            (2.0 * detail::uniform01(rng) - 1.0) * volatility;
        p = std::clamp(p + step + 0.3 * (target - p), 0.0, rated);
        series.push_back(p);
      }
    }
    trace.actual.push_back(std::move(series));
  }
  return trace;
}

// Post-dispatch feasibility audit of one interval: full AC power flow at
// the realized injections. Feasibility is verified, never assumed.
struct AuditRow {
  int horizon = 0;
  int interval = 0;
  bool converged = false;
  double p_slack = 0, q_slack = 0;  // p.u.
  double loss = 0;                  // p.u.
  double max_v_violation = 0;       // p.u.
  double max_s_violation = 0;       // p.u.
  double reverse_p = 0, reverse_q = 0;  // max(0, -P_S), max(0, -Q_S)
  double balance_residual = 0;      // p.u.
};

inline AuditRow audit_interval(const Network& net, const AdmittanceMatrix& y,
                               const DispatchDecision& d, int horizon) {
  AuditRow row;
  row.horizon = horizon;
  row.interval = d.interval_index;
  const InjectionSet inj = wind_injections(
      net, d.actual_wind, d.beta_applied);
  const PowerFlowState st = solve_powerflow(net, y, inj);
  row.converged = st.converged;
  if (!st.converged) {
    row.max_v_violation = row.max_s_violation =
        std::numeric_limits<double>::infinity();
    return row;
  }
  row.p_slack = st.p_slack;
  row.q_slack = st.q_slack;
  row.loss = total_losses(net, st);
  const int slack = net.slack_index();
  for (int i = 0; i < net.n_bus(); ++i) {
    if (i == slack) continue;
    const double v = st.v_mag(i);
    row.max_v_violation = std::max(
        {row.max_v_violation, net.buses[i].v_min - v, v - net.buses[i].v_max});
  }
  const std::vector<double> flows = branch_flows(net, st);
  for (int k = 0; k < net.n_branch(); ++k)
    row.max_s_violation =
        std::max(row.max_s_violation, flows[k] - net.branches[k].s_max);
  row.max_v_violation = std::max(0.0, row.max_v_violation);
  row.max_s_violation = std::max(0.0, row.max_s_violation);
  row.reverse_p = std::max(0.0, -st.p_slack);
  row.reverse_q = std::max(0.0, -st.q_slack);
  double injected = 0, demand = 0;
  for (int w = 0; w < net.n_ws(); ++w)
    injected += d.beta_applied[w] * d.actual_wind[w];
  for (const Bus& bus : net.buses) demand += bus.p_demand;
  row.balance_residual = st.p_slack + injected - demand - row.loss;
  return row;
}

// One moving-horizon cycle: dispatch the 6 update intervals of horizon k
// against its precomputed table while the next horizon's table is solved
// from the freshly provided forecast. The two lanes are independent by
// contract and synchronize only at the horizon boundary; publication of
// the new table is atomic (it is returned complete, by value).
struct CycleResult {
  std::vector<DispatchDecision> decisions;
  std::vector<AuditRow> audits;
  std::optional<LookupTable> next_table;
  std::optional<SolveReport> solve_report;
};

inline CycleResult run_cycle(
    const Network& net, const AdmittanceMatrix& y, const PriceModel& prices,
    const TimingConfig& timing, const DeviationConfig& dev,
    const std::optional<std::vector<double>>& next_forecast,
    const LookupTable& table,
    const std::vector<std::vector<double>>& actuals,  // [interval][ws]
    int workers = 0, const SolveFn& solve_fn = default_scenario_solve,
    const Network* next_net = nullptr, const AdmittanceMatrix* next_y = nullptr) {
  timing.validate();
  if (static_cast<int>(actuals.size()) != timing.updates_per_horizon)
    throw InternalError("run_cycle: one actual-wind vector per interval");

  CycleResult result;
  const int k = table.horizon_index;

  // Dispatch lane: Steps 6-8, repeated per update interval.
  for (int j = 0; j < timing.updates_per_horizon; ++j) {
    DispatchDecision d = dispatch_interval(table, actuals[j], j);
    result.audits.push_back(audit_interval(net, y, d, k));
    result.decisions.push_back(std::move(d));
  }

  // Solve lane: Steps 1-5 for horizon k+1, published at the boundary.
  if (next_forecast) {
    const Network& nn = next_net ? *next_net : net;
    const AdmittanceMatrix& ny = next_y ? *next_y : y;
    const std::vector<LevelSet> levels =
        generate_all_levels(nn, *next_forecast, dev);
    const ScenarioSet scenarios = enumerate_scenarios(levels);
    std::map<int, OpfProblem> problems;
    for (const Scenario& sc : scenarios.scenarios)
      problems.emplace(sc.id, OpfProblem{&nn, &ny, sc.wind, prices});
    auto [solutions, report] = solve_all(problems, timing, workers, solve_fn);
    result.next_table = build_table(scenarios, solutions, levels, k + 1,
                                    (k + 1) * timing.t_horizon);
    result.solve_report = std::move(report);
  }
  return result;
}

struct SimDecision {
  int horizon = 0;
  DispatchDecision decision;
};

// Per-interval energy bookkeeping, MWh (MVArh for reactive import).
// injected + curtailed_total = available holds exactly by construction;
// curtailed_total splits into the unavoidable part (what the ideal solve
// at the actual wind would curtail) and the conservatism surcharge of the
// nearest-higher-level rule.
struct IntervalAccount {
  int horizon = 0;
  int interval = 0;
  double available = 0;
  double injected = 0;
  double curtailed_total = 0;
  double curtailed_beta = 0;
  double curtailed_conservatism = 0;
  double imported_p = 0;
  double imported_q = 0;
  double losses = 0;
  std::vector<double> beta_ideal;  // per WS, from the solve at actual wind
};

struct EnergyTotals {
  double available = 0;
  double injected = 0;
  double curtailed_beta = 0;
  double curtailed_conservatism = 0;
  double imported_p = 0;
  double imported_q = 0;
  double losses = 0;
};

struct EconomicTotals {
  double revenue_wind = 0;
  double cost_losses = 0;
  double cost_p_import = 0;
  double cost_q_import = 0;
  double net = 0;
};

struct SimReport {
  int horizons = 0;
  int n_ws = 0;
  int updates = 0;
  std::vector<SimDecision> decisions;
  std::vector<AuditRow> audits;
  std::vector<IntervalAccount> accounts;
  EnergyTotals energy;
  EconomicTotals economics;
  int clamp_events = 0;
  int scheduler_overruns = 0;
  int reverse_flow_violations = 0;  // audited imports below -1e-6
  std::vector<LookupTable> tables;
  std::vector<SolveReport> solve_reports;  // wall-clock observability
};

struct SimOptions {
  int workers = 0;
  SolveFn solve_fn = default_scenario_solve;
  // Optional per-horizon demand variants; same topology, size == horizons.
  std::vector<Network> horizon_networks;
};

// The full RT-OPF cycle over a wind trace. The cold start solves horizon
// 0's table in a warm-up phase before the clock starts; afterwards the
// table dispatched during horizon k was always computed during horizon
// k-1 from the forecast for k.
inline SimReport run_simulation(const Network& net, const PriceModel& prices,
                                const TimingConfig& timing,
                                const DeviationConfig& dev,
                                const WindTrace& trace,
                                const SimOptions& options = {}) {
  timing.validate();
  dev.validate(net);
  if (trace.updates != timing.updates_per_horizon)
    throw Error("trace update count does not match the timing config");
  trace.validate(net);
  if (!options.horizon_networks.empty() &&
      static_cast<int>(options.horizon_networks.size()) != trace.horizons)
    throw Error("one horizon network per horizon required");

  const int n_ws = net.n_ws();
  const int horizons = trace.horizons;
  const double interval_hours = timing.t_update / 3600.0;

  auto net_at = [&](int h) -> const Network& {
    return options.horizon_networks.empty() ? net
                                            : options.horizon_networks[h];
  };
  std::vector<AdmittanceMatrix> ys;
  if (options.horizon_networks.empty()) {
    ys.push_back(build_admittance(net));
  } else {
    for (const Network& hn : options.horizon_networks)
      ys.push_back(build_admittance(hn));
  }
  auto y_at = [&](int h) -> const AdmittanceMatrix& {
    return options.horizon_networks.empty() ? ys[0] : ys[h];
  };

  SimReport report;
  report.horizons = horizons;
  report.n_ws = n_ws;
  report.updates = trace.updates;

  auto forecast_for = [&](int h) {
    std::vector<double> fc(n_ws);
    for (int w = 0; w < n_ws; ++w) fc[w] = trace.forecast[w][h];
    return fc;
  };

  // Cold start: horizon 0's table is precomputed before t = 0.
  {
    const Network& n0 = net_at(0);
    const std::vector<LevelSet> levels =
        generate_all_levels(n0, forecast_for(0), dev);
    const ScenarioSet scenarios = enumerate_scenarios(levels);
    std::map<int, OpfProblem> problems;
    for (const Scenario& sc : scenarios.scenarios)
      problems.emplace(sc.id, OpfProblem{&n0, &y_at(0), sc.wind, prices});
    auto [solutions, solve_report] =
        solve_all(problems, timing, options.workers, options.solve_fn);
    report.tables.push_back(
        build_table(scenarios, solutions, levels, 0, 0.0));
    report.scheduler_overruns += solve_report.overruns;
    report.solve_reports.push_back(std::move(solve_report));
  }

  for (int k = 0; k < horizons; ++k) {
    const Network& nk = net_at(k);
    const AdmittanceMatrix& yk = y_at(k);
    std::vector<std::vector<double>> actuals(trace.updates,
                                             std::vector<double>(n_ws));
    for (int j = 0; j < trace.updates; ++j)
      for (int w = 0; w < n_ws; ++w)
        actuals[j][w] = trace.actual_at(w, k, j);

    std::optional<std::vector<double>> next_forecast;
    if (k + 1 < horizons) next_forecast = forecast_for(k + 1);
    const Network* next_net = k + 1 < horizons ? &net_at(k + 1) : nullptr;
    const AdmittanceMatrix* next_y = k + 1 < horizons ? &y_at(k + 1) : nullptr;

    CycleResult cycle =
        run_cycle(nk, yk, prices, timing, dev, next_forecast,
                  report.tables.back(), actuals, options.workers,
                  options.solve_fn, next_net, next_y);

    for (int j = 0; j < trace.updates; ++j) {
      const DispatchDecision& d = cycle.decisions[j];
      const AuditRow& audit = cycle.audits[j];

      // Ideal curtailment at the actual wind, for the conservatism split.
      OpfSolution ideal =
          solve_opf(OpfProblem{&nk, &yk, d.actual_wind, prices});
      std::vector<double> beta_ideal(n_ws, 0.0);
      if (ideal.status == SolveStatus::Optimal) beta_ideal = ideal.beta;

      IntervalAccount acct;
      acct.horizon = k;
      acct.interval = j;
      acct.beta_ideal = beta_ideal;
      double avail_pu = 0, inj_pu = 0, cons_pu = 0;
      for (int w = 0; w < n_ws; ++w) {
        avail_pu += d.actual_wind[w];
        inj_pu += d.injected[w];
        cons_pu += (beta_ideal[w] - d.beta_applied[w]) * d.actual_wind[w];
      }
      const double scale = net.base_mva * interval_hours;
      acct.available = avail_pu * scale;
      acct.injected = inj_pu * scale;
      acct.curtailed_total = acct.available - acct.injected;
      acct.curtailed_conservatism = cons_pu * scale;
      acct.curtailed_beta = acct.curtailed_total - acct.curtailed_conservatism;
      acct.imported_p = audit.p_slack * scale;
      acct.imported_q = audit.q_slack * scale;
      acct.losses = audit.loss * scale;

      report.energy.available += acct.available;
      report.energy.injected += acct.injected;
      report.energy.curtailed_beta += acct.curtailed_beta;
      report.energy.curtailed_conservatism += acct.curtailed_conservatism;
      report.energy.imported_p += acct.imported_p;
      report.energy.imported_q += acct.imported_q;
      report.energy.losses += acct.losses;

      report.clamp_events += d.clamp_count();
      if (audit.p_slack < -kConstraintTol || audit.q_slack < -kConstraintTol)
        ++report.reverse_flow_violations;

      report.decisions.push_back(SimDecision{k, d});
      report.audits.push_back(audit);
      report.accounts.push_back(std::move(acct));
    }

    if (cycle.next_table) {
      report.scheduler_overruns += cycle.solve_report->overruns;
      report.tables.push_back(std::move(*cycle.next_table));
      report.solve_reports.push_back(std::move(*cycle.solve_report));
    }
  }

  report.economics.revenue_wind = prices.price_wind * report.energy.injected;
  report.economics.cost_losses = prices.price_loss * report.energy.losses;
  report.economics.cost_p_import =
      prices.price_p_import * report.energy.imported_p;
  report.economics.cost_q_import =
      prices.price_q_import * report.energy.imported_q;
  report.economics.net =
      report.economics.revenue_wind - report.economics.cost_losses -
      report.economics.cost_p_import - report.economics.cost_q_import;
  return report;
}

}  // namespace rtopf
