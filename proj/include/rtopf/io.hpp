#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtopf/common.hpp"
#include "rtopf/dispatch.hpp"
#include "rtopf/grid.hpp"
#include "rtopf/scheduler.hpp"
#include "rtopf/simulator.hpp"

namespace rtopf {

// Shortest round-trip decimal form; locale-free and deterministic, so
// repeated runs produce byte-identical artifacts.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Write-then-rename so partial runs never leave corrupt artifacts.
inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(tmp.string() + ": cannot open for writing");
    out << content;
    if (!out) throw Error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- CSV inputs -----------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

inline double parse_double(const std::string& s, const std::string& ctx) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ctx + ": not a number: '" + s + "'");
  }
}

inline int parse_int(const std::string& s, const std::string& ctx) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ctx + ": not an integer: '" + s + "'");
  }
}

}  // namespace detail

// Forecast file: CSV with columns horizon_index, ws_bus, p_forecast_mw.
// Returns per-WS forecast series in p.u., [ws][horizon]; every (horizon,
// WS) pair must be covered.
inline std::vector<std::vector<double>> read_forecast_csv(
    const std::string& path, const Network& net) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open file");
  std::map<int, int> ws_of_bus;
  for (int w = 0; w < net.n_ws(); ++w)
    ws_of_bus[net.wind_stations[w].bus] = w;

  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  ++line_no;
  if (detail::split_csv_line(line) !=
      std::vector<std::string>{"horizon_index", "ws_bus", "p_forecast_mw"})
    throw Error(path + ": expected header horizon_index,ws_bus,p_forecast_mw");

  std::map<std::pair<int, int>, double> cells;
  int max_horizon = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != 3) throw Error(ctx + ": expected 3 fields");
    const int h = detail::parse_int(fields[0], ctx);
    const int bus = detail::parse_int(fields[1], ctx);
    if (h < 0) throw Error(ctx + ": negative horizon_index");
    auto it = ws_of_bus.find(bus);
    if (it == ws_of_bus.end())
      throw Error(ctx + ": no wind station at bus " + std::to_string(bus));
    cells[{h, it->second}] = net.to_pu(detail::parse_double(fields[2], ctx));
    max_horizon = std::max(max_horizon, h);
  }
  if (max_horizon < 0) throw Error(path + ": no forecast rows");

  std::vector<std::vector<double>> out(
      net.n_ws(), std::vector<double>(max_horizon + 1, 0.0));
  for (int h = 0; h <= max_horizon; ++h)
    for (int w = 0; w < net.n_ws(); ++w) {
      auto it = cells.find({h, w});
      if (it == cells.end())
        throw Error(path + ": missing forecast for horizon " +
                    std::to_string(h) + ", ws bus " +
                    std::to_string(net.wind_stations[w].bus));
      out[w][h] = it->second;
    }
  return out;
}

// Optional per-horizon demand overrides: CSV with columns horizon_index,
// bus, p_demand_mw, q_demand_mvar. Unlisted buses keep the base demand.
inline std::vector<Network> read_demand_csv(const std::string& path,
                                            const Network& net,
                                            int horizons) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open file");
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  ++line_no;
  if (detail::split_csv_line(line) !=
      std::vector<std::string>{"horizon_index", "bus", "p_demand_mw",
                               "q_demand_mvar"})
    throw Error(path +
                ": expected header horizon_index,bus,p_demand_mw,q_demand_mvar");

  std::vector<Network> nets(horizons, net);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != 4) throw Error(ctx + ": expected 4 fields");
    const int h = detail::parse_int(fields[0], ctx);
    const int bus = detail::parse_int(fields[1], ctx);
    if (h < 0 || h >= horizons)
      throw Error(ctx + ": horizon_index out of range");
    if (bus < 0 || bus >= net.n_bus())
      throw Error(ctx + ": unknown bus " + std::to_string(bus));
    nets[h].buses[bus].p_demand =
        net.to_pu(detail::parse_double(fields[2], ctx));
    nets[h].buses[bus].q_demand =
        net.to_pu(detail::parse_double(fields[3], ctx));
  }
  return nets;
}

// --- CSV/JSON outputs -----------------------------------------------------

inline std::string dispatch_log_csv(const SimReport& report,
                                    const Network& net) {
  std::string out =
      "horizon,interval,ws_bus,actual_mw,selected_level,beta,injected_mw,"
      "clamped_flag\n";
  for (const SimDecision& sd : report.decisions) {
    const DispatchDecision& d = sd.decision;
    for (int w = 0; w < net.n_ws(); ++w) {
      out += std::to_string(sd.horizon) + "," +
             std::to_string(d.interval_index) + "," +
             std::to_string(net.wind_stations[w].bus) + "," +
             format_double(net.to_mw(d.actual_wind[w])) + "," +
             level_name(d.level_index[w]) + "," +
             format_double(d.beta_applied[w]) + "," +
             format_double(net.to_mw(d.injected[w])) + "," +
             (d.clamped[w] ? "1" : "0") + "\n";
    }
  }
  return out;
}

inline std::string audit_csv(const SimReport& report, const Network& net) {
  std::string out =
      "horizon,interval,converged,p_slack_mw,q_slack_mvar,loss_mw,"
      "max_v_violation_pu,max_s_violation_pu,reverse_p_pu,reverse_q_pu,"
      "balance_residual_pu\n";
  for (const AuditRow& a : report.audits) {
    out += std::to_string(a.horizon) + "," + std::to_string(a.interval) +
           "," + (a.converged ? "1" : "0") + "," +
           format_double(net.to_mw(a.p_slack)) + "," +
           format_double(net.to_mw(a.q_slack)) + "," +
           format_double(net.to_mw(a.loss)) + "," +
           format_double(a.max_v_violation) + "," +
           format_double(a.max_s_violation) + "," +
           format_double(a.reverse_p) + "," + format_double(a.reverse_q) +
           "," + format_double(a.balance_residual) + "\n";
  }
  return out;
}

inline std::string table_csv(const LookupTable& table, const Network& net) {
  std::string out = "scenario_id";
  for (int w = 0; w < table.n_ws(); ++w) {
    const std::string bus = std::to_string(net.wind_stations[w].bus);
    out += ",level_b" + bus + ",wind_mw_b" + bus + ",beta_b" + bus;
  }
  out += ",objective,status,original_status\n";
  for (const TableRow& row : table.rows) {
    out += std::to_string(row.scenario.id);
    for (int w = 0; w < table.n_ws(); ++w) {
      out += std::string(",") + level_name(row.scenario.level_index[w]) +
             "," + format_double(net.to_mw(row.scenario.wind[w])) + "," +
             format_double(row.solution.beta[w]);
    }
    out += std::string(",") + format_double(row.solution.objective) + "," +
           to_string(row.solution.status) + "," +
           to_string(row.original_status) + "\n";
  }
  return out;
}

inline nlohmann::json table_json(const LookupTable& table,
                                 const Network& net) {
  nlohmann::json rows = nlohmann::json::array();
  for (const TableRow& row : table.rows) {
    nlohmann::json jr;
    jr["scenario_id"] = row.scenario.id;
    nlohmann::json per_ws = nlohmann::json::array();
    for (int w = 0; w < table.n_ws(); ++w) {
      per_ws.push_back({{"ws_bus", net.wind_stations[w].bus},
                        {"level", level_name(row.scenario.level_index[w])},
                        {"wind_mw", net.to_mw(row.scenario.wind[w])},
                        {"beta", row.solution.beta[w]}});
    }
    jr["wind_stations"] = std::move(per_ws);
    jr["objective"] = row.solution.objective;
    jr["status"] = to_string(row.solution.status);
    jr["original_status"] = to_string(row.original_status);
    rows.push_back(std::move(jr));
  }
  nlohmann::json j;
  j["horizon_index"] = table.horizon_index;
  j["created_at_s"] = table.created_at;
  j["rows"] = std::move(rows);
  return j;
}

// Deterministic run summary: identical bytes for identical inputs and any
// worker count. Wall-clock solve times go to the separate run report.
inline nlohmann::json sim_report_json(const SimReport& report,
                                      const Network& net) {
  nlohmann::json j;
  j["horizons"] = report.horizons;
  j["updates_per_horizon"] = report.updates;
  j["wind_stations"] = nlohmann::json::array();
  for (const WindStation& ws : net.wind_stations)
    j["wind_stations"].push_back(
        {{"bus", ws.bus}, {"p_rated_mw", net.to_mw(ws.p_rated)}});

  j["energy_mwh"] = {
      {"available", report.energy.available},
      {"injected", report.energy.injected},
      {"curtailed_beta", report.energy.curtailed_beta},
      {"curtailed_conservatism", report.energy.curtailed_conservatism},
      {"imported_p", report.energy.imported_p},
      {"imported_q_mvarh", report.energy.imported_q},
      {"losses", report.energy.losses}};
  j["economics"] = {{"revenue_wind", report.economics.revenue_wind},
                    {"cost_losses", report.economics.cost_losses},
                    {"cost_p_import", report.economics.cost_p_import},
                    {"cost_q_import", report.economics.cost_q_import},
                    {"net", report.economics.net}};
  j["clamp_events"] = report.clamp_events;
  j["scheduler_overruns"] = report.scheduler_overruns;
  j["reverse_flow_violations"] = report.reverse_flow_violations;

  nlohmann::json accounts = nlohmann::json::array();
  for (const IntervalAccount& a : report.accounts) {
    accounts.push_back({{"horizon", a.horizon},
                        {"interval", a.interval},
                        {"available_mwh", a.available},
                        {"injected_mwh", a.injected},
                        {"curtailed_beta_mwh", a.curtailed_beta},
                        {"curtailed_conservatism_mwh", a.curtailed_conservatism},
                        {"imported_p_mwh", a.imported_p},
                        {"imported_q_mvarh", a.imported_q},
                        {"losses_mwh", a.losses}});
  }
  j["intervals"] = std::move(accounts);

  nlohmann::json tables = nlohmann::json::array();
  for (const LookupTable& t : report.tables) {
    int fallback_rows = 0;
    for (const TableRow& row : t.rows)
      if (row.solution.status != SolveStatus::Optimal) ++fallback_rows;
    tables.push_back({{"horizon_index", t.horizon_index},
                      {"created_at_s", t.created_at},
                      {"rows", t.size()},
                      {"fallback_rows", fallback_rows}});
  }
  j["tables"] = std::move(tables);
  return j;
}

// Wall-clock observability of the solve lane; its timings vary from run to
// run by nature and are kept out of the deterministic report.
inline nlohmann::json run_report_json(const SimReport& report) {
  nlohmann::json j = nlohmann::json::array();
  for (size_t i = 0; i < report.solve_reports.size(); ++i) {
    const SolveReport& sr = report.solve_reports[i];
    double max_wall = 0, sum_wall = 0;
    for (const auto& ps : sr.scenarios) {
      max_wall = std::max(max_wall, ps.wall_seconds);
      sum_wall += ps.wall_seconds;
    }
    j.push_back({{"table_index", i},
                 {"workers", sr.workers},
                 {"budget_s", sr.budget_seconds},
                 {"budget_used_s", sr.budget_used},
                 {"overruns", sr.overruns},
                 {"scenarios", sr.scenarios.size()},
                 {"max_solve_s", max_wall},
                 {"total_solve_s", sum_wall}});
  }
  return nlohmann::json{{"solves", std::move(j)}};
}

// Plot-ready series per WS and interval: forecast, the seven level values
// of the active table, actual and injected wind.
inline std::string plot_csv(const SimReport& report, const WindTrace& trace,
                            const Network& net, const TimingConfig& timing) {
  std::string out =
      "time_s,ws_bus,forecast_mw,l3_mw,l2_mw,l1_mw,m_mw,h1_mw,h2_mw,h3_mw,"
      "actual_mw,injected_mw\n";
  for (const SimDecision& sd : report.decisions) {
    const DispatchDecision& d = sd.decision;
    const double t =
        sd.horizon * timing.t_horizon + d.interval_index * timing.t_update;
    const LookupTable& table = report.tables[sd.horizon];
    for (int w = 0; w < net.n_ws(); ++w) {
      out += format_double(t) + "," +
             std::to_string(net.wind_stations[w].bus) + "," +
             format_double(net.to_mw(trace.forecast[w][sd.horizon]));
      for (int l = 0; l < kLevelsPerWs; ++l)
        out += "," + format_double(net.to_mw(table.level_sets[w].value(l)));
      out += "," + format_double(net.to_mw(d.actual_wind[w])) + "," +
             format_double(net.to_mw(d.injected[w])) + "\n";
    }
  }
  return out;
}

// Debug dump of a power flow state.
inline std::string state_csv(const PowerFlowState& state) {
  std::string out = "bus,e,f,v_mag\n";
  for (size_t i = 0; i < state.e.size(); ++i) {
    out += std::to_string(i) + "," + format_double(state.e[i]) + "," +
           format_double(state.f[i]) + "," +
           format_double(std::hypot(state.e[i], state.f[i])) + "\n";
  }
  return out;
}

}  // namespace rtopf
