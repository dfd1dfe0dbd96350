#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "rtopf/grid.hpp"

namespace rtopf {
namespace {

using testing::data_dir;
using testing::load_feeder15;
using testing::write_temp;

TEST(GridLoad, Feeder15Loads) {
  const Network net = load_feeder15();
  EXPECT_EQ(net.n_bus(), 15);
  EXPECT_EQ(net.n_branch(), 14);
  EXPECT_EQ(net.n_ws(), 2);
  EXPECT_EQ(net.slack_index(), 0);
  EXPECT_TRUE(validate_network(net).ok());
  // Demands arrive in MW and are stored in per-unit.
  EXPECT_DOUBLE_EQ(net.buses[1].p_demand, 0.03);
  EXPECT_DOUBLE_EQ(net.buses[2].q_demand, 0.015);
  EXPECT_DOUBLE_EQ(net.wind_stations[0].p_rated, 0.25);
}

TEST(GridLoad, MissingFileFails) {
  EXPECT_THROW(load_network((data_dir() / "nope.json").string()), Error);
}

TEST(GridLoad, ParseErrorCarriesContext) {
  const auto path = write_temp("broken.json", "{ not json");
  try {
    load_network(path.string());
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("parse error"), std::string::npos);
  }
}

TEST(GridLoad, MissingFieldNamesTheField) {
  const auto path = write_temp("nofield.json", R"({
    "base_mva": 10.0,
    "buses": [{"id": 0, "kind": "slack", "v_min": 0.9, "v_max": 1.1,
               "p_demand_mw": 0.0}],
    "branches": [], "wind_stations": []})");
  try {
    load_network(path.string());
    FAIL() << "expected schema error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("q_demand_mvar"), std::string::npos);
  }
}

TEST(GridLoad, TwoSlackBusesRejected) {
  const auto path = write_temp("twoslack.json", R"({
    "base_mva": 10.0,
    "buses": [
      {"id": 0, "kind": "slack", "v_min": 0.9, "v_max": 1.1,
       "p_demand_mw": 0, "q_demand_mvar": 0},
      {"id": 1, "kind": "slack", "v_min": 0.9, "v_max": 1.1,
       "p_demand_mw": 0, "q_demand_mvar": 0}
    ],
    "branches": [{"from": 0, "to": 1, "r_pu": 0.01, "x_pu": 0.02,
                  "b_shunt_pu": 0, "s_max_mva": 5}],
    "wind_stations": []})");
  try {
    load_network(path.string());
    FAIL() << "expected validation error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("multiple slack buses"),
              std::string::npos);
  }
}

TEST(GridLoad, DanglingBranchEndpointRejected) {
  Network net = load_feeder15();
  net.branches[3].to_bus = 99;
  const ValidationReport report = validate_network(net);
  ASSERT_FALSE(report.ok());
  EXPECT_NE(report.to_string().find("dangling branch endpoint"),
            std::string::npos);
}

TEST(GridValidate, Feeder15Clean) {
  EXPECT_TRUE(validate_network(load_feeder15()).ok());
}

TEST(GridValidate, NegativeResistance) {
  Network net = load_feeder15();
  net.branches[5].r = -0.01;
  const ValidationReport report = validate_network(net);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_NE(report.violations[0].find("negative resistance"),
            std::string::npos);
}

TEST(GridValidate, DisconnectedBus) {
  Network net = load_feeder15();
  net.branches.pop_back();  // cuts bus 14 off
  const ValidationReport report = validate_network(net);
  bool found = false;
  for (const std::string& v : report.violations)
    if (v.find("unreachable from slack") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(GridValidate, WindStationOnSlackRejected) {
  Network net = load_feeder15();
  net.wind_stations[0].bus = 0;
  const ValidationReport report = validate_network(net);
  ASSERT_FALSE(report.ok());
  EXPECT_NE(report.to_string().find("PQ bus"), std::string::npos);
}

TEST(GridValidate, DuplicateWindStationRejected) {
  Network net = load_feeder15();
  net.wind_stations.push_back(WindStation{10, 0.1});
  EXPECT_FALSE(validate_network(net).ok());
}

TEST(Admittance, SingleBranchOffDiagonal) {
  // 1/(0.01 + j0.02) = 20 - j40, so the off-diagonal is -(20 - j40).
  const Network net = testing::two_bus_network(0.01, 0.02, 0.0, 0.0);
  const AdmittanceMatrix y = build_admittance(net);
  EXPECT_NEAR(y.g(0, 1), -20.0, 1e-12);
  EXPECT_NEAR(y.b(0, 1), 40.0, 1e-12);
  EXPECT_NEAR(y.g(1, 0), -20.0, 1e-12);
  EXPECT_NEAR(y.b(1, 0), 40.0, 1e-12);
  EXPECT_NEAR(y.g(0, 0), 20.0, 1e-12);
  EXPECT_NEAR(y.b(0, 0), -40.0, 1e-12);
}

TEST(Admittance, NoBranchesGivesZeroMatrix) {
  Network net;
  net.buses.push_back(Bus{0, BusKind::Slack, 0.9, 1.1, 0, 0});
  net.buses.push_back(Bus{1, BusKind::Pq, 0.9, 1.1, 0, 0});
  const AdmittanceMatrix y = build_admittance(net);
  EXPECT_EQ(y.g.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(y.b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Admittance, SingularBranchRejected) {
  Network net = testing::two_bus_network(0.0, 0.0, 0.0, 0.0);
  EXPECT_THROW(build_admittance(net), Error);
}

TEST(Admittance, Feeder15ZeroPatternMatchesBranchList) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  std::vector<std::vector<bool>> connected(
      net.n_bus(), std::vector<bool>(net.n_bus(), false));
  for (const Branch& br : net.branches)
    connected[br.from_bus][br.to_bus] = connected[br.to_bus][br.from_bus] =
        true;
  for (int i = 0; i < net.n_bus(); ++i)
    for (int j = 0; j < net.n_bus(); ++j) {
      if (i == j) continue;
      const bool nonzero = y.g(i, j) != 0.0 || y.b(i, j) != 0.0;
      EXPECT_EQ(nonzero, connected[i][j]) << "at (" << i << "," << j << ")";
    }
}

// Y-bus row identity: the off-diagonal sum of row k equals the negated sum
// of series admittances incident to k (shunts excluded).
TEST(Admittance, RowSumsMatchSeriesAdmittances) {
  const Network net = load_feeder15();
  const AdmittanceMatrix y = build_admittance(net);
  for (int k = 0; k < net.n_bus(); ++k) {
    std::complex<double> off_sum(0, 0);
    for (int j = 0; j < net.n_bus(); ++j)
      if (j != k) off_sum += std::complex<double>(y.g(k, j), y.b(k, j));
    std::complex<double> series_sum(0, 0);
    for (const Branch& br : net.branches)
      if (br.from_bus == k || br.to_bus == k)
        series_sum += 1.0 / std::complex<double>(br.r, br.x);
    EXPECT_NEAR(std::abs(off_sum + series_sum), 0.0, 1e-12);
  }
}

TEST(PerUnit, RoundTripIsExactToTolerance) {
  const Network net = load_feeder15();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double mw = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 200.0 -
                      100.0;
    const double back = net.to_mw(net.to_pu(mw));
    EXPECT_NEAR(back, mw, 1e-12 * std::max(1.0, std::abs(mw)));
  }
}

}  // namespace
}  // namespace rtopf
