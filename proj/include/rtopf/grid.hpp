#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtopf/common.hpp"

namespace rtopf {

enum class BusKind { Slack, Pq };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Pq;
  double v_min = 0.9;   // p.u.
  double v_max = 1.1;   // p.u.
  double p_demand = 0;  // p.u., constant within a horizon
  double q_demand = 0;  // p.u.
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0;        // series resistance, p.u.
  double x = 0;        // series reactance, p.u.
  double b_shunt = 0;  // total line charging susceptance, p.u.
  double s_max = 0;    // apparent-power limit, p.u.
};

struct WindStation {
  int bus = 0;
  double p_rated = 0;  // rated active power, p.u.
};

// Immutable after construction; safe to share across concurrent solves.
struct Network {
  double base_mva = 10.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<WindStation> wind_stations;

  int n_bus() const { return static_cast<int>(buses.size()); }
  int n_branch() const { return static_cast<int>(branches.size()); }
  int n_ws() const { return static_cast<int>(wind_stations.size()); }

  // Slack is index 0 by convention; validated, not assumed.
  int slack_index() const {
    for (const Bus& b : buses)
      if (b.kind == BusKind::Slack) return b.id;
    return -1;
  }

  double to_pu(double mw) const { return mw / base_mva; }
  double to_mw(double pu) const { return pu * base_mva; }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::string out;
    for (const std::string& v : violations) {
      out += v;
      out += '\n';
    }
    return out;
  }
};

// Checks every Network/Bus/Branch/WindStation invariant. Violations are
// data, not failures: the report lists all of them and never throws.
inline ValidationReport validate_network(const Network& net) {
  ValidationReport report;
  auto add = [&report](const std::string& msg) {
    report.violations.push_back(msg);
  };

  if (!(net.base_mva > 0) || !std::isfinite(net.base_mva))
    add("base_mva must be a positive finite number");
  if (net.buses.empty()) {
    add("network has no buses");
    return report;
  }

  const int n = net.n_bus();
  int slack_count = 0;
  for (int i = 0; i < n; ++i) {
    const Bus& bus = net.buses[i];
    const std::string at = "bus " + std::to_string(bus.id);
    if (bus.id != i)
      add("bus indices must be contiguous and ordered: position " +
          std::to_string(i) + " holds id " + std::to_string(bus.id));
    if (bus.kind == BusKind::Slack) ++slack_count;
    if (!(bus.v_min > 0) || !(bus.v_min < bus.v_max))
      add(at + ": voltage bounds must satisfy 0 < v_min < v_max");
    if (!std::isfinite(bus.p_demand) || !std::isfinite(bus.q_demand))
      add(at + ": demand must be finite");
    else if (bus.kind == BusKind::Pq && (bus.p_demand < 0 || bus.q_demand < 0))
      add(at + ": negative demand on load bus");
  }
  if (slack_count == 0) add("no slack bus");
  if (slack_count > 1) add("multiple slack buses");
  if (slack_count == 1 && net.buses[0].kind != BusKind::Slack)
    add("slack bus must be bus 0");

  for (int k = 0; k < net.n_branch(); ++k) {
    const Branch& br = net.branches[k];
    const std::string at = "branch " + std::to_string(k);
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n) {
      add(at + ": dangling branch endpoint (" + std::to_string(br.from_bus) +
          "-" + std::to_string(br.to_bus) + ")");
      continue;
    }
    if (br.from_bus == br.to_bus) add(at + ": self-loop");
    if (br.r < 0) add(at + ": negative resistance");
    if (br.x == 0) add(at + ": zero reactance");
    if (!(br.s_max > 0)) add(at + ": s_max must be positive");
    if (!std::isfinite(br.r) || !std::isfinite(br.x) ||
        !std::isfinite(br.b_shunt) || !std::isfinite(br.s_max))
      add(at + ": non-finite parameter");
  }

  std::vector<bool> ws_seen(n, false);
  for (int w = 0; w < net.n_ws(); ++w) {
    const WindStation& ws = net.wind_stations[w];
    const std::string at = "wind station " + std::to_string(w);
    if (ws.bus < 0 || ws.bus >= n) {
      add(at + ": references missing bus " + std::to_string(ws.bus));
      continue;
    }
    if (!(ws.p_rated > 0) || !std::isfinite(ws.p_rated))
      add(at + ": p_rated must be positive");
    if (net.buses[ws.bus].kind != BusKind::Pq)
      add(at + ": must connect to a PQ bus");
    if (ws_seen[ws.bus])
      add(at + ": more than one wind station at bus " + std::to_string(ws.bus));
    ws_seen[ws.bus] = true;
  }

  // Connectivity: every bus reachable from the slack over branch endpoints.
  if (slack_count == 1) {
    const int slack = net.slack_index();
    std::vector<bool> seen(n, false);
    std::vector<int> stack{slack};
    if (slack >= 0 && slack < n) seen[slack] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const Branch& br : net.branches) {
        if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 ||
            br.to_bus >= n)
          continue;
        const int v = br.from_bus == u ? br.to_bus
                      : br.to_bus == u ? br.from_bus
                                       : -1;
        if (v >= 0 && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        add("bus " + std::to_string(i) + ": unreachable from slack");
  }

  return report;
}

// Dense bus-admittance matrix, split into real and imaginary parts.
// Symmetric for the bundled feeders (no phase shifters modeled).
struct AdmittanceMatrix {
  Eigen::MatrixXd g;  // conductance, p.u.
  Eigen::MatrixXd b;  // susceptance, p.u.

  int size() const { return static_cast<int>(g.rows()); }
};

inline AdmittanceMatrix build_admittance(const Network& net) {
  const int n = net.n_bus();
  AdmittanceMatrix y;
  y.g = Eigen::MatrixXd::Zero(n, n);
  y.b = Eigen::MatrixXd::Zero(n, n);

  for (int k = 0; k < net.n_branch(); ++k) {
    const Branch& br = net.branches[k];
    if (br.r == 0 && br.x == 0)
      throw Error("branch " + std::to_string(k) +
                  ": singular branch (r = x = 0)");
    const std::complex<double> series = 1.0 / std::complex<double>(br.r, br.x);
    const int f = br.from_bus;
    const int t = br.to_bus;
    y.g(f, t) -= series.real();
    y.b(f, t) -= series.imag();
    y.g(t, f) -= series.real();
    y.b(t, f) -= series.imag();
    y.g(f, f) += series.real();
    y.b(f, f) += series.imag() + br.b_shunt / 2.0;
    y.g(t, t) += series.real();
    y.b(t, t) += series.imag() + br.b_shunt / 2.0;
  }
  return y;
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* key,
                                           const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ctx + ": missing field '" + key + "'");
  return *it;
}

inline double require_number(const nlohmann::json& j, const char* key,
                             const std::string& ctx) {
  const nlohmann::json& v = require_field(j, key, ctx);
  if (!v.is_number())
    throw Error(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

inline int require_int(const nlohmann::json& j, const char* key,
                       const std::string& ctx) {
  const nlohmann::json& v = require_field(j, key, ctx);
  if (!v.is_number_integer())
    throw Error(ctx + "." + key + ": expected an integer");
  return v.get<int>();
}

}  // namespace detail

// Builds a Network from the documented JSON schema. Demands and ratings are
// given in physical units (MW / MVAr / MVA) and converted to per-unit here.
inline Network network_from_json(const nlohmann::json& j,
                                 const std::string& ctx) {
  using detail::require_field;
  using detail::require_int;
  using detail::require_number;

  if (!j.is_object()) throw Error(ctx + ": expected a JSON object");
  Network net;
  net.base_mva = require_number(j, "base_mva", ctx);
  if (!(net.base_mva > 0))
    throw Error(ctx + ".base_mva: must be positive");

  const nlohmann::json& buses = require_field(j, "buses", ctx);
  if (!buses.is_array()) throw Error(ctx + ".buses: expected an array");
  int pos = 0;
  for (const nlohmann::json& jb : buses) {
    const std::string bctx = ctx + ".buses[" + std::to_string(pos++) + "]";
    Bus bus;
    bus.id = require_int(jb, "id", bctx);
    const nlohmann::json& kind = require_field(jb, "kind", bctx);
    if (kind == "slack")
      bus.kind = BusKind::Slack;
    else if (kind == "pq")
      bus.kind = BusKind::Pq;
    else
      throw Error(bctx + ".kind: expected \"slack\" or \"pq\"");
    bus.v_min = require_number(jb, "v_min", bctx);
    bus.v_max = require_number(jb, "v_max", bctx);
    bus.p_demand = net.to_pu(require_number(jb, "p_demand_mw", bctx));
    bus.q_demand = net.to_pu(require_number(jb, "q_demand_mvar", bctx));
    net.buses.push_back(bus);
  }

  const nlohmann::json& branches = require_field(j, "branches", ctx);
  if (!branches.is_array()) throw Error(ctx + ".branches: expected an array");
  pos = 0;
  for (const nlohmann::json& jb : branches) {
    const std::string bctx = ctx + ".branches[" + std::to_string(pos++) + "]";
    Branch br;
    br.from_bus = require_int(jb, "from", bctx);
    br.to_bus = require_int(jb, "to", bctx);
    br.r = require_number(jb, "r_pu", bctx);
    br.x = require_number(jb, "x_pu", bctx);
    br.b_shunt = require_number(jb, "b_shunt_pu", bctx);
    br.s_max = net.to_pu(require_number(jb, "s_max_mva", bctx));
    net.branches.push_back(br);
  }

  const nlohmann::json& stations = require_field(j, "wind_stations", ctx);
  if (!stations.is_array())
    throw Error(ctx + ".wind_stations: expected an array");
  pos = 0;
  for (const nlohmann::json& jw : stations) {
    const std::string wctx =
        ctx + ".wind_stations[" + std::to_string(pos++) + "]";
    WindStation ws;
    ws.bus = require_int(jw, "bus", wctx);
    ws.p_rated = net.to_pu(require_number(jw, "p_rated_mw", wctx));
    net.wind_stations.push_back(ws);
  }

  return net;
}

// Loads, converts to per-unit and validates a network file. Throws Error
// with parse context on malformed input and with the full report on
// invariant violations.
inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path + ": parse error: " + e.what());
  }
  Network net = network_from_json(j, path);
  const ValidationReport report = validate_network(net);
  if (!report.ok())
    throw Error(path + ": validation failed:\n" + report.to_string());
  return net;
}

}  // namespace rtopf
