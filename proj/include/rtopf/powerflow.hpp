#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "rtopf/common.hpp"
#include "rtopf/grid.hpp"

namespace rtopf {

// Net injected power per bus, p.u. The slack entry is ignored: its import
// is an output of the power flow, not an input.
struct InjectionSet {
  std::vector<double> p_inj;
  std::vector<double> q_inj;
};

// Net bus injections for curtailed wind against the horizon demand:
// p = beta * available - demand at WS buses, -demand elsewhere; wind
// stations operate at unity power factor, so q = -demand everywhere.
inline InjectionSet wind_injections(const Network& net,
                                    std::span<const double> wind_available,
                                    std::span<const double> beta) {
  if (static_cast<int>(wind_available.size()) != net.n_ws() ||
      static_cast<int>(beta.size()) != net.n_ws())
    throw InternalError("wind_injections: per-WS vector size mismatch");
  const int n = net.n_bus();
  InjectionSet inj;
  inj.p_inj.assign(n, 0.0);
  inj.q_inj.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    inj.p_inj[i] = -net.buses[i].p_demand;
    inj.q_inj[i] = -net.buses[i].q_demand;
  }
  for (int w = 0; w < net.n_ws(); ++w)
    inj.p_inj[net.wind_stations[w].bus] += beta[w] * wind_available[w];
  return inj;
}

struct PowerFlowState {
  std::vector<double> e, f;  // per-bus voltage, rectangular, p.u.
  double p_slack = 0;        // active import at the HV interface, p.u.
  double q_slack = 0;        // reactive import, p.u.
  bool converged = false;
  int iterations = 0;        // mismatch evaluations performed
  double max_mismatch = 0;   // residual of the returned point, p.u.

  double v_mag(int bus) const { return std::hypot(e[bus], f[bus]); }
  std::complex<double> voltage(int bus) const { return {e[bus], f[bus]}; }
};

struct PowerFlowOptions {
  double tolerance = 1e-8;  // p.u. max mismatch
  int max_iterations = 50;
};

// Newton-Raphson on the rectangular mismatch equations
//   P_i(e,f) - p_inj(i) = 0,  Q_i(e,f) - q_inj(i) = 0   for all PQ buses,
// from a flat start. Non-convergence is reported, never thrown: the OPF
// probes infeasible and extreme points by design.
inline PowerFlowState solve_powerflow(const Network& net,
                                      const AdmittanceMatrix& y,
                                      const InjectionSet& inj,
                                      const PowerFlowOptions& opts = {}) {
  const int n = net.n_bus();
  const int slack = net.slack_index();
  if (slack < 0) throw InternalError("solve_powerflow: no slack bus");
  if (static_cast<int>(inj.p_inj.size()) != n ||
      static_cast<int>(inj.q_inj.size()) != n)
    throw InternalError("solve_powerflow: injection size mismatch");

  std::vector<int> pq;
  pq.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != slack) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  Eigen::VectorXd e = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd ire(n), iim(n);
  Eigen::VectorXd mis(2 * m);
  Eigen::MatrixXd jac(2 * m, 2 * m);

  PowerFlowState state;
  state.iterations = 0;

  // One extra Newton step after first reaching tolerance drives the
  // residual to round-off, so downstream balance identities hold far
  // below the convergence gate. The best iterate seen is returned.
  Eigen::VectorXd best_e, best_f;
  double best_mis = std::numeric_limits<double>::infinity();
  bool polished = false;

  for (int it = 0; it <= opts.max_iterations; ++it) {
    // Injected current, rectangular: I = (G + jB)(e + jf).
    ire = y.g * e - y.b * f;
    iim = y.g * f + y.b * e;

    double max_mis = 0;
    for (int k = 0; k < m; ++k) {
      const int i = pq[k];
      const double p = e(i) * ire(i) + f(i) * iim(i);
      const double q = f(i) * ire(i) - e(i) * iim(i);
      mis(k) = p - inj.p_inj[i];
      mis(m + k) = q - inj.q_inj[i];
      max_mis = std::max(max_mis, std::abs(mis(k)));
      max_mis = std::max(max_mis, std::abs(mis(m + k)));
    }
    ++state.iterations;
    state.max_mismatch = max_mis;
    if (max_mis <= opts.tolerance) {
      state.converged = true;
      if (max_mis < best_mis) {
        best_mis = max_mis;
        best_e = e;
        best_f = f;
      }
      if (max_mis <= 1e-13 || polished) break;
      polished = true;
    }
    if (it == opts.max_iterations || !std::isfinite(max_mis)) break;

    for (int k = 0; k < m; ++k) {
      const int i = pq[k];
      for (int l = 0; l < m; ++l) {
        const int j = pq[l];
        const double gij = y.g(i, j);
        const double bij = y.b(i, j);
        double dp_de = e(i) * gij + f(i) * bij;
        double dp_df = -e(i) * bij + f(i) * gij;
        double dq_de = f(i) * gij - e(i) * bij;
        double dq_df = -f(i) * bij - e(i) * gij;
        if (i == j) {
          dp_de += ire(i);
          dp_df += iim(i);
          dq_de -= iim(i);
          dq_df += ire(i);
        }
        jac(k, l) = dp_de;
        jac(k, m + l) = dp_df;
        jac(m + k, l) = dq_de;
        jac(m + k, m + l) = dq_df;
      }
    }

    const Eigen::VectorXd dx = jac.partialPivLu().solve(-mis);
    if (!dx.allFinite()) break;
    for (int k = 0; k < m; ++k) {
      e(pq[k]) += dx(k);
      f(pq[k]) += dx(m + k);
    }
  }

  if (state.converged) {
    e = best_e;
    f = best_f;
    state.max_mismatch = best_mis;
  }
  state.e.assign(e.data(), e.data() + n);
  state.f.assign(f.data(), f.data() + n);
  state.e[slack] = 1.0;
  state.f[slack] = 0.0;

  // Import seen by the HV interface covers the network injection at the
  // slack plus any demand attached there.
  ire = y.g * e - y.b * f;
  iim = y.g * f + y.b * e;
  state.p_slack = e(slack) * ire(slack) + f(slack) * iim(slack) +
                  net.buses[slack].p_demand;
  state.q_slack = f(slack) * ire(slack) - e(slack) * iim(slack) +
                  net.buses[slack].q_demand;
  return state;
}

// Total active losses, summed branch by branch (series r * |I|^2; shunt
// elements are pure susceptance and lossless). Agrees with the balance
// formula p_slack + sum(wind injected) - sum(demand) to 1e-10.
inline double total_losses(const Network& net, const PowerFlowState& state) {
  if (!state.converged)
    throw Error("total_losses: unconverged state rejected");
  double loss = 0;
  for (const Branch& br : net.branches) {
    const std::complex<double> series =
        1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> i_series =
        (state.voltage(br.from_bus) - state.voltage(br.to_bus)) * series;
    loss += br.r * std::norm(i_series);
  }
  return loss;
}

// Apparent power per branch, p.u.; the reported flow is the larger of the
// two ends (the sending end carries the losses).
inline std::vector<double> branch_flows(const Network& net,
                                        const PowerFlowState& state) {
  std::vector<double> flows;
  flows.reserve(net.branches.size());
  for (const Branch& br : net.branches) {
    const std::complex<double> series =
        1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> shunt(0.0, br.b_shunt / 2.0);
    const std::complex<double> vf = state.voltage(br.from_bus);
    const std::complex<double> vt = state.voltage(br.to_bus);
    const std::complex<double> i_from = (vf - vt) * series + vf * shunt;
    const std::complex<double> i_to = (vt - vf) * series + vt * shunt;
    const double s_from = std::abs(vf * std::conj(i_from));
    const double s_to = std::abs(vt * std::conj(i_to));
    flows.push_back(std::max(s_from, s_to));
  }
  return flows;
}

}  // namespace rtopf
