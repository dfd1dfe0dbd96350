#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtopf/common.hpp"
#include "rtopf/grid.hpp"
#include "rtopf/opf.hpp"
#include "rtopf/scenario.hpp"
#include "rtopf/scheduler.hpp"

namespace rtopf {

// Everything a run needs beyond the network file. Deviations, volatility
// and initial wind are in physical MW like the rest of the external data;
// conversion to per-unit happens once the network is known.
struct RunConfig {
  std::string network_path;
  PriceModel prices;
  std::vector<double> delta1_mw;  // per WS; empty -> 10% of rated
  TimingConfig timing;
  std::uint64_t seed = 1;
  int horizons = 3;
  int workers = 0;  // 0 -> available parallelism
  std::string out_dir = "out";
  double volatility_mw = 0.2;  // per update-interval random-walk step bound
  std::optional<std::string> forecast_csv;
  std::optional<std::string> demand_csv;
  std::optional<std::vector<double>> initial_wind_mw;
  std::optional<std::vector<double>> table_forecast_mw;  // for `table`

  DeviationConfig deviation(const Network& net) const {
    if (delta1_mw.empty()) return DeviationConfig::proportional(net);
    if (static_cast<int>(delta1_mw.size()) == 1 && net.n_ws() > 1) {
      DeviationConfig dev;
      dev.delta1.assign(net.n_ws(), net.to_pu(delta1_mw[0]));
      return dev;
    }
    if (static_cast<int>(delta1_mw.size()) != net.n_ws())
      throw Error("config: delta1 needs one value (shared) or one per WS");
    DeviationConfig dev;
    for (double mw : delta1_mw) dev.delta1.push_back(net.to_pu(mw));
    return dev;
  }

  void validate() const {
    if (horizons < 1) throw Error("config: horizons must be >= 1");
    if (workers < 0) throw Error("config: workers must be >= 0");
    if (!(volatility_mw >= 0))
      throw Error("config: volatility_mw must be >= 0");
    for (double d : delta1_mw)
      if (!(d >= 0)) throw Error("config: delta1 must be >= 0");
    if (!(prices.price_wind >= 0) || !(prices.price_loss >= 0) ||
        !(prices.price_p_import >= 0) || !(prices.price_q_import >= 0))
      throw Error("config: prices must be finite and >= 0");
    timing.validate();
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> known,
                                const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw Error(ctx + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j,
                                  const std::string& ctx) {
  if (!j.is_object()) throw Error(ctx + ": expected a JSON object");
  detail::reject_unknown_keys(
      j,
      {"network", "prices", "delta1_mw", "timing", "seed", "horizons",
       "workers", "out_dir", "volatility_mw", "forecast_csv", "demand_csv",
       "initial_wind_mw", "table_forecast_mw"},
      ctx);

  RunConfig cfg;
  if (j.contains("network")) cfg.network_path = j.at("network").get<std::string>();
  if (j.contains("prices")) {
    const nlohmann::json& p = j.at("prices");
    detail::reject_unknown_keys(p, {"wind", "loss", "p_import", "q_import"},
                                ctx + ".prices");
    if (p.contains("wind")) cfg.prices.price_wind = p.at("wind").get<double>();
    if (p.contains("loss")) cfg.prices.price_loss = p.at("loss").get<double>();
    if (p.contains("p_import"))
      cfg.prices.price_p_import = p.at("p_import").get<double>();
    if (p.contains("q_import"))
      cfg.prices.price_q_import = p.at("q_import").get<double>();
  }
  if (j.contains("delta1_mw")) {
    if (j.at("delta1_mw").is_number())
      cfg.delta1_mw = {j.at("delta1_mw").get<double>()};
    else
      cfg.delta1_mw = j.at("delta1_mw").get<std::vector<double>>();
  }
  if (j.contains("timing")) {
    const nlohmann::json& t = j.at("timing");
    detail::reject_unknown_keys(t,
                                {"t_horizon_s", "t_update_s", "t_data_s",
                                 "updates_per_horizon", "wall_clock_scale"},
                                ctx + ".timing");
    if (t.contains("t_horizon_s"))
      cfg.timing.t_horizon = t.at("t_horizon_s").get<double>();
    if (t.contains("t_update_s"))
      cfg.timing.t_update = t.at("t_update_s").get<double>();
    if (t.contains("t_data_s"))
      cfg.timing.t_data = t.at("t_data_s").get<double>();
    if (t.contains("updates_per_horizon"))
      cfg.timing.updates_per_horizon =
          t.at("updates_per_horizon").get<int>();
    if (t.contains("wall_clock_scale"))
      cfg.timing.wall_clock_scale = t.at("wall_clock_scale").get<double>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("horizons")) cfg.horizons = j.at("horizons").get<int>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("volatility_mw"))
    cfg.volatility_mw = j.at("volatility_mw").get<double>();
  if (j.contains("forecast_csv"))
    cfg.forecast_csv = j.at("forecast_csv").get<std::string>();
  if (j.contains("demand_csv"))
    cfg.demand_csv = j.at("demand_csv").get<std::string>();
  if (j.contains("initial_wind_mw"))
    cfg.initial_wind_mw = j.at("initial_wind_mw").get<std::vector<double>>();
  if (j.contains("table_forecast_mw"))
    cfg.table_forecast_mw =
        j.at("table_forecast_mw").get<std::vector<double>>();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path + ": parse error: " + e.what());
  }
  try {
    return config_from_json(j, path);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace rtopf
