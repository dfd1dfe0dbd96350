#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rtopf/common.hpp"
#include "rtopf/opf.hpp"
#include "rtopf/scenario.hpp"

namespace rtopf {

struct TableRow {
  Scenario scenario;
  OpfSolution solution;  // fallback rows carry beta = 0
  SolveStatus original_status = SolveStatus::Optimal;  // audit trail
};

// Scenario id -> precomputed optimal curtailment for one prediction
// horizon. Immutable after build; dispatch is a pure read, so the next
// horizon's table can be computed concurrently.
struct LookupTable {
  int horizon_index = 0;
  double created_at = 0;  // simulated seconds at publication

  std::vector<LevelSet> level_sets;  // per WS, the rows' level values
  std::vector<TableRow> rows;        // indexed by scenario id

  int n_ws() const { return static_cast<int>(level_sets.size()); }
  int size() const { return static_cast<int>(rows.size()); }
};

// Assembles the table from the scenario set and the per-id solutions.
// Infeasible solutions are replaced by beta = 0 fallback rows with the
// original status preserved for auditing.
inline LookupTable build_table(const ScenarioSet& scenarios,
                               const std::map<int, OpfSolution>& solutions,
                               const std::vector<LevelSet>& level_sets,
                               int horizon_index = 0, double created_at = 0) {
  if (static_cast<int>(level_sets.size()) != scenarios.n_ws)
    throw InternalError("build_table: level set count != scenario WS count");
  LookupTable table;
  table.horizon_index = horizon_index;
  table.created_at = created_at;
  table.level_sets = level_sets;
  table.rows.reserve(scenarios.scenarios.size());
  for (const Scenario& sc : scenarios.scenarios) {
    auto it = solutions.find(sc.id);
    if (it == solutions.end())
      throw Error("build_table: missing solution for scenario id " +
                  std::to_string(sc.id));
    TableRow row;
    row.scenario = sc;
    row.solution = it->second;
    row.original_status = it->second.status;
    if (row.solution.status != SolveStatus::Optimal) {
      row.solution.beta.assign(scenarios.n_ws, 0.0);
      row.solution.status = SolveStatus::Fallback;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// The nearest-higher-level rule of the realization step: an actual value
// equal to a level selects that level; anything else rounds up to the
// smallest level above it; above the top level it clamps to H3. Duplicate
// level values from clipping resolve to the highest sigma tag so the audit
// trail names the most conservative scenario.
inline int select_level(double actual, const LevelSet& levels) {
  if (actual > levels.top()) return kLevelsPerWs - 1;
  int idx = 0;
  while (levels.value(idx) < actual) ++idx;
  const double target = levels.value(idx);
  while (idx + 1 < kLevelsPerWs && levels.value(idx + 1) == target) ++idx;
  return idx;
}

// The realized controls of one update interval.
struct DispatchDecision {
  int interval_index = 0;
  std::vector<double> actual_wind;  // per WS, p.u.
  int selected_scenario = 0;
  std::vector<int> level_index;     // per WS, 0..6
  std::vector<double> beta_applied; // exact copy of the table row's beta
  std::vector<double> injected;     // beta_applied * actual_wind, p.u.
  std::vector<bool> clamped;        // actual above H3 (coverage gap)

  int clamp_count() const {
    int c = 0;
    for (bool flag : clamped) c += flag ? 1 : 0;
    return c;
  }
};

inline DispatchDecision dispatch_interval(const LookupTable& table,
                                          std::span<const double> actual_wind,
                                          int interval_index) {
  const int n_ws = table.n_ws();
  if (static_cast<int>(actual_wind.size()) != n_ws)
    throw InternalError("dispatch_interval: actual wind size mismatch");
  if (table.size() != scenario_count(n_ws))
    throw InternalError("dispatch_interval: incomplete lookup table");

  DispatchDecision d;
  d.interval_index = interval_index;
  d.actual_wind.assign(actual_wind.begin(), actual_wind.end());
  d.level_index.resize(n_ws);
  d.clamped.resize(n_ws);
  for (int w = 0; w < n_ws; ++w) {
    d.level_index[w] = select_level(actual_wind[w], table.level_sets[w]);
    d.clamped[w] = actual_wind[w] > table.level_sets[w].top();
  }
  d.selected_scenario = encode_levels(d.level_index);
  const TableRow& row = table.rows[d.selected_scenario];
  d.beta_applied = row.solution.beta;
  d.injected.resize(n_ws);
  for (int w = 0; w < n_ws; ++w)
    d.injected[w] = d.beta_applied[w] * actual_wind[w];
  return d;
}

}  // namespace rtopf
