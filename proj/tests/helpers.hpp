#pragma once

#include <complex>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtopf/grid.hpp"
#include "rtopf/powerflow.hpp"

namespace rtopf::testing {

inline std::filesystem::path data_dir() {
  return std::filesystem::path(RTOPF_DATA_DIR);
}

inline Network load_feeder15() {
  return load_network((data_dir() / "feeder15.json").string());
}

inline Network load_feeder15_tight() {
  return load_network((data_dir() / "feeder15_tight.json").string());
}

// Slack--(r,x)--load network, the smallest system with a closed form.
inline Network two_bus_network(double r, double x, double p_load_pu,
                               double q_load_pu, double s_max_pu = 10.0,
                               bool with_ws = false, double p_rated_pu = 1.0) {
  Network net;
  net.base_mva = 10.0;
  net.buses.push_back(Bus{0, BusKind::Slack, 0.5, 1.5, 0.0, 0.0});
  net.buses.push_back(Bus{1, BusKind::Pq, 0.5, 1.5, p_load_pu, q_load_pu});
  net.branches.push_back(Branch{0, 1, r, x, 0.0, s_max_pu});
  if (with_ws) net.wind_stations.push_back(WindStation{1, p_rated_pu});
  return net;
}

// Closed-form solution of the two-bus case (no shunt): with V1 = 1 and net
// injection S at bus 2, |V2|^2 solves a quadratic obtained by eliminating
// the angle. Returns (V2, S_slack).
struct TwoBusSolution {
  std::complex<double> v2;
  std::complex<double> s_slack;
};

inline TwoBusSolution two_bus_closed_form(double r, double x, double p_inj,
                                          double q_inj) {
  const std::complex<double> z(r, x);
  const std::complex<double> s(p_inj, q_inj);
  // V2 = |V2|^2 - S * conj(z); substituting m = |V2|^2 gives
  // m^2 - (2 Re(c) + 1) m + |c|^2 = 0 with c = S * conj(z).
  const std::complex<double> c = s * std::conj(z);
  const double b = 2.0 * c.real() + 1.0;
  const double disc = b * b - 4.0 * std::norm(c);
  if (disc < 0) throw std::runtime_error("two-bus case has no real solution");
  const double m = (b + std::sqrt(disc)) / 2.0;  // root near 1: high-voltage
  TwoBusSolution sol;
  sol.v2 = std::complex<double>(m, 0.0) - c;
  const std::complex<double> i1 = (1.0 - sol.v2) / z;
  sol.s_slack = std::conj(i1);  // V1 = 1
  return sol;
}

// Independent fixed-point power flow for radial feeders: backward current
// sweep, forward voltage update. Used as an oracle against Newton-Raphson.
inline std::vector<std::complex<double>> backward_forward_sweep(
    const Network& net, const InjectionSet& inj, double tol = 1e-12,
    int max_iter = 500) {
  const int n = net.n_bus();
  const int slack = net.slack_index();

  // Parent/child structure from BFS over the (radial) branch list.
  std::vector<int> parent(n, -1), parent_branch(n, -1), order;
  std::vector<bool> seen(n, false);
  seen[slack] = true;
  order.push_back(slack);
  for (size_t head = 0; head < order.size(); ++head) {
    const int u = order[head];
    for (int k = 0; k < net.n_branch(); ++k) {
      const Branch& br = net.branches[k];
      const int v = br.from_bus == u ? br.to_bus
                    : br.to_bus == u ? br.from_bus
                                     : -1;
      if (v >= 0 && !seen[v]) {
        seen[v] = true;
        parent[v] = u;
        parent_branch[v] = k;
        order.push_back(v);
      }
    }
  }
  if (static_cast<int>(order.size()) != n)
    throw std::runtime_error("sweep oracle needs a connected network");

  std::vector<std::complex<double>> shunt(n, 0.0);
  for (const Branch& br : net.branches) {
    shunt[br.from_bus] += std::complex<double>(0.0, br.b_shunt / 2.0);
    shunt[br.to_bus] += std::complex<double>(0.0, br.b_shunt / 2.0);
  }

  std::vector<std::complex<double>> v(n, 1.0);
  for (int it = 0; it < max_iter; ++it) {
    // Backward: accumulate series currents from the leaves.
    std::vector<std::complex<double>> flow(n, 0.0);  // series current into bus
    for (int pos = n - 1; pos >= 1; --pos) {
      const int u = order[pos];
      const std::complex<double> s_inj(inj.p_inj[u], inj.q_inj[u]);
      const std::complex<double> absorbed =
          -std::conj(s_inj / v[u]) + shunt[u] * v[u];
      flow[u] += absorbed;
      flow[parent[u]] += flow[u];
    }
    // Forward: drop voltages along the tree.
    double max_dv = 0;
    for (size_t pos = 1; pos < order.size(); ++pos) {
      const int u = order[pos];
      const Branch& br = net.branches[parent_branch[u]];
      const std::complex<double> z(br.r, br.x);
      const std::complex<double> v_new = v[parent[u]] - z * flow[u];
      max_dv = std::max(max_dv, std::abs(v_new - v[u]));
      v[u] = v_new;
    }
    if (max_dv < tol) break;
  }
  return v;
}

// Mismatch recomputed from scratch with plain complex arithmetic; the
// independent check for the solver's reported residual.
inline double recompute_max_mismatch(const Network& net,
                                     const AdmittanceMatrix& y,
                                     const InjectionSet& inj,
                                     const PowerFlowState& state) {
  const int n = net.n_bus();
  const int slack = net.slack_index();
  double worst = 0;
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    std::complex<double> current(0, 0);
    for (int k = 0; k < n; ++k)
      current += std::complex<double>(y.g(i, k), y.b(i, k)) *
                 std::complex<double>(state.e[k], state.f[k]);
    const std::complex<double> s =
        std::complex<double>(state.e[i], state.f[i]) * std::conj(current);
    worst = std::max(worst, std::abs(s.real() - inj.p_inj[i]));
    worst = std::max(worst, std::abs(s.imag() - inj.q_inj[i]));
  }
  return worst;
}

inline std::filesystem::path write_temp(const std::string& name,
                                        const std::string& content) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "rtopf_tests";
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / name;
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

}  // namespace rtopf::testing
