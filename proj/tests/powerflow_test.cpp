#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "rtopf/powerflow.hpp"

namespace rtopf {
namespace {

using testing::backward_forward_sweep;
using testing::load_feeder15;
using testing::recompute_max_mismatch;
using testing::two_bus_closed_form;
using testing::two_bus_network;

InjectionSet demand_only(const Network& net) {
  return wind_injections(net, std::vector<double>(net.n_ws(), 0.0),
                         std::vector<double>(net.n_ws(), 0.0));
}

TEST(PowerFlow, FlatCaseConvergesImmediately) {
  Network net = two_bus_network(0.01, 0.02, 0.0, 0.0);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  ASSERT_TRUE(st.converged);
  EXPECT_EQ(st.iterations, 1);
  EXPECT_DOUBLE_EQ(st.e[0], 1.0);
  EXPECT_DOUBLE_EQ(st.f[0], 0.0);
  EXPECT_DOUBLE_EQ(st.e[1], 1.0);
  EXPECT_DOUBLE_EQ(st.f[1], 0.0);
  EXPECT_NEAR(st.p_slack, 0.0, 1e-14);
  EXPECT_NEAR(st.q_slack, 0.0, 1e-14);
}

TEST(PowerFlow, TwoBusMatchesClosedForm) {
  const double r = 0.01, x = 0.02, p = 0.1, q = 0.05;
  Network net = two_bus_network(r, x, p, q);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  ASSERT_TRUE(st.converged);

  const auto oracle = two_bus_closed_form(r, x, -p, -q);
  EXPECT_NEAR(st.e[1], oracle.v2.real(), 1e-8);
  EXPECT_NEAR(st.f[1], oracle.v2.imag(), 1e-8);
  EXPECT_NEAR(st.p_slack, oracle.s_slack.real(), 1e-8);
  EXPECT_NEAR(st.q_slack, oracle.s_slack.imag(), 1e-8);
}

TEST(PowerFlow, Feeder15NominalDemand) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  ASSERT_TRUE(st.converged);
  EXPECT_LE(st.iterations, 10);
  EXPECT_LE(st.max_mismatch, 1e-8);
  for (int i = 0; i < net.n_bus(); ++i) {
    EXPECT_GE(st.v_mag(i), net.buses[i].v_min);
    EXPECT_LE(st.v_mag(i), net.buses[i].v_max);
  }
}

TEST(PowerFlow, Feeder15MatchesSweepOracle) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  const InjectionSet inj = demand_only(net);
  const PowerFlowState st = solve_powerflow(net, y, inj);
  ASSERT_TRUE(st.converged);
  const auto v_sweep = backward_forward_sweep(net, inj);
  for (int i = 0; i < net.n_bus(); ++i) {
    EXPECT_NEAR(st.e[i], v_sweep[i].real(), 1e-7);
    EXPECT_NEAR(st.f[i], v_sweep[i].imag(), 1e-7);
  }
}

TEST(PowerFlow, WindInjectionsShape) {
  const Network net = load_feeder15();
  const std::vector<double> avail{0.2, 0.1};
  const std::vector<double> beta{0.5, 1.0};
  const InjectionSet inj = wind_injections(net, avail, beta);
  EXPECT_DOUBLE_EQ(inj.p_inj[10], 0.5 * 0.2 - net.buses[10].p_demand);
  EXPECT_DOUBLE_EQ(inj.p_inj[14], 0.1 - net.buses[14].p_demand);
  EXPECT_DOUBLE_EQ(inj.p_inj[3], -net.buses[3].p_demand);
  EXPECT_DOUBLE_EQ(inj.q_inj[10], -net.buses[10].q_demand);
}

TEST(PowerFlow, NonConvergenceIsReportedNotThrown) {
  // Absurd load far beyond the feeder's capability.
  Network net = two_bus_network(0.01, 0.02, 50.0, 20.0);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  EXPECT_FALSE(st.converged);
  EXPECT_THROW(total_losses(net, st), Error);
}

TEST(Losses, FlatZeroInjectionIsZero) {
  Network net = two_bus_network(0.01, 0.02, 0.0, 0.0);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  EXPECT_NEAR(total_losses(net, st), 0.0, 1e-14);
}

TEST(Losses, TwoBusBranchFormulaEqualsBalance) {
  const double r = 0.01, x = 0.02, p = 0.1, q = 0.05;
  Network net = two_bus_network(r, x, p, q);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  ASSERT_TRUE(st.converged);
  const double loss = total_losses(net, st);
  // r |I|^2 of the single branch.
  const std::complex<double> i_branch =
      (st.voltage(0) - st.voltage(1)) / std::complex<double>(r, x);
  EXPECT_NEAR(loss, r * std::norm(i_branch), 1e-12);
  // Balance formula: P_S + sum(wind) - sum(demand) = loss.
  EXPECT_NEAR(loss, st.p_slack - p, 1e-10);
}

TEST(Losses, AlwaysNonNegative) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  std::mt19937_64 rng(3);
  auto u01 = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> avail{0.25 * u01(), 0.25 * u01()};
    const std::vector<double> beta{u01(), u01()};
    const PowerFlowState st =
        solve_powerflow(net, y, wind_injections(net, avail, beta));
    ASSERT_TRUE(st.converged);
    EXPECT_GE(total_losses(net, st), 0.0);
  }
}

TEST(BranchFlows, FlatStateAllZero) {
  Network net = two_bus_network(0.01, 0.02, 0.0, 0.0);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  for (double s : branch_flows(net, st)) EXPECT_NEAR(s, 0.0, 1e-14);
}

TEST(BranchFlows, SendingEndCarriesTheLosses) {
  Network net = two_bus_network(0.01, 0.02, 0.1, 0.05);
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  ASSERT_TRUE(st.converged);
  const std::complex<double> i_branch =
      (st.voltage(0) - st.voltage(1)) / std::complex<double>(0.01, 0.02);
  const double s_from = std::abs(st.voltage(0) * std::conj(i_branch));
  const double s_to = std::abs(st.voltage(1) * std::conj(-i_branch));
  EXPECT_GE(s_from, s_to);
  EXPECT_NEAR(branch_flows(net, st)[0], std::max(s_from, s_to), 1e-12);
}

TEST(BranchFlows, RootBranchCarriesDemandPlusLossesAtZeroWind) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  const PowerFlowState st = solve_powerflow(net, y, demand_only(net));
  ASSERT_TRUE(st.converged);
  double demand = 0;
  for (const Bus& b : net.buses) demand += b.p_demand;
  const double loss = total_losses(net, st);
  // Active part of the root flow equals total demand plus losses.
  const Branch& root = net.branches[0];
  const std::complex<double> series =
      1.0 / std::complex<double>(root.r, root.x);
  const std::complex<double> shunt(0.0, root.b_shunt / 2.0);
  const std::complex<double> i_from =
      (st.voltage(0) - st.voltage(1)) * series + st.voltage(0) * shunt;
  const double p_root = (st.voltage(0) * std::conj(i_from)).real();
  EXPECT_NEAR(p_root, demand + loss, 1e-9);
}

// Power balance across random injections: P_S + sum p_inj = P_loss.
TEST(PowerFlowProperties, BalanceIdentity) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  std::mt19937_64 rng(11);
  auto u01 = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<double> avail{0.25 * u01(), 0.25 * u01()};
    const std::vector<double> beta{u01(), u01()};
    const PowerFlowState st =
        solve_powerflow(net, y, wind_injections(net, avail, beta));
    ASSERT_TRUE(st.converged);
    double wind = 0, demand = 0;
    for (int w = 0; w < net.n_ws(); ++w) wind += beta[w] * avail[w];
    for (const Bus& b : net.buses) demand += b.p_demand;
    const double residual =
        st.p_slack + wind - demand - total_losses(net, st);
    EXPECT_NEAR(residual, 0.0, 1e-10);
  }
}

TEST(PowerFlowProperties, ReportedMismatchMatchesRecomputation) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  const InjectionSet inj = wind_injections(
      net, std::vector<double>{0.2, 0.15}, std::vector<double>{0.7, 0.9});
  const PowerFlowState st = solve_powerflow(net, y, inj);
  ASSERT_TRUE(st.converged);
  EXPECT_NEAR(recompute_max_mismatch(net, y, inj, st), st.max_mismatch,
              1e-12);
}

TEST(PowerFlowProperties, BranchSumLossesEqualBalanceLosses) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  const std::vector<double> avail{0.22, 0.18};
  const std::vector<double> beta{0.8, 0.6};
  const PowerFlowState st =
      solve_powerflow(net, y, wind_injections(net, avail, beta));
  ASSERT_TRUE(st.converged);
  double wind = 0, demand = 0;
  for (int w = 0; w < net.n_ws(); ++w) wind += beta[w] * avail[w];
  for (const Bus& b : net.buses) demand += b.p_demand;
  EXPECT_NEAR(total_losses(net, st), st.p_slack + wind - demand, 1e-10);
}

// Analytic Newton Jacobian against central finite differences of the
// mismatch function at random perturbed states.
TEST(PowerFlowProperties, JacobianMatchesFiniteDifferences) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  const int n = net.n_bus();
  const int slack = net.slack_index();
  std::vector<int> pq;
  for (int i = 0; i < n; ++i)
    if (i != slack) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  std::mt19937_64 rng(5);
  auto u01 = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };

  auto mismatch = [&](const std::vector<double>& e,
                      const std::vector<double>& f) {
    std::vector<double> out(2 * m);
    for (int k = 0; k < m; ++k) {
      const int i = pq[k];
      std::complex<double> current(0, 0);
      for (int j = 0; j < n; ++j)
        current += std::complex<double>(y.g(i, j), y.b(i, j)) *
                   std::complex<double>(e[j], f[j]);
      const std::complex<double> s =
          std::complex<double>(e[i], f[i]) * std::conj(current);
      out[k] = s.real();
      out[m + k] = s.imag();
    }
    return out;
  };

  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> e(n, 1.0), f(n, 0.0);
    for (int i = 0; i < n; ++i) {
      if (i == slack) continue;
      e[i] = 1.0 + 0.05 * (2 * u01() - 1);
      f[i] = 0.05 * (2 * u01() - 1);
    }

    // Analytic entries, same formulas as the solver.
    std::vector<double> ire(n, 0), iim(n, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        ire[i] += y.g(i, j) * e[j] - y.b(i, j) * f[j];
        iim[i] += y.g(i, j) * f[j] + y.b(i, j) * e[j];
      }

    const double h = 1e-6;
    for (int k = 0; k < m; ++k) {
      const int i = pq[k];
      for (int l = 0; l < m; ++l) {
        const int j = pq[l];
        double dp_de = e[i] * y.g(i, j) + f[i] * y.b(i, j);
        double dp_df = -e[i] * y.b(i, j) + f[i] * y.g(i, j);
        double dq_de = f[i] * y.g(i, j) - e[i] * y.b(i, j);
        double dq_df = -f[i] * y.b(i, j) - e[i] * y.g(i, j);
        if (i == j) {
          dp_de += ire[i];
          dp_df += iim[i];
          dq_de -= iim[i];
          dq_df += ire[i];
        }

        auto ep = e, em = e;
        ep[j] += h;
        em[j] -= h;
        const auto fp_e = mismatch(ep, f), fm_e = mismatch(em, f);
        EXPECT_NEAR(dp_de, (fp_e[k] - fm_e[k]) / (2 * h), 1e-6);
        EXPECT_NEAR(dq_de, (fp_e[m + k] - fm_e[m + k]) / (2 * h), 1e-6);

        auto fp = f, fm = f;
        fp[j] += h;
        fm[j] -= h;
        const auto fp_f = mismatch(e, fp), fm_f = mismatch(e, fm);
        EXPECT_NEAR(dp_df, (fp_f[k] - fm_f[k]) / (2 * h), 1e-6);
        EXPECT_NEAR(dq_df, (fp_f[m + k] - fm_f[m + k]) / (2 * h), 1e-6);
      }
    }
  }
}

}  // namespace
}  // namespace rtopf
