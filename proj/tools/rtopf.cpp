// rtopf: real-time optimal power flow engine and moving-horizon simulator
// for distribution feeders with wind stations.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rtopf/rtopf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string network_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> horizons;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  std::optional<double> wall_clock_scale;
  std::vector<double> delta1;
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "Config file (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--network", flags->network_path, "Network file (JSON)");
  cmd->add_option("--seed", flags->seed, "Trace seed");
  cmd->add_option("--horizons", flags->horizons, "Number of horizons");
  cmd->add_option("--workers", flags->workers,
                  "Worker threads (0 = available parallelism)");
  cmd->add_option("--out", flags->out_dir, "Output directory");
  cmd->add_option("--wall-clock-scale", flags->wall_clock_scale,
                  "Simulated-to-real seconds factor for solve deadlines");
  cmd->add_option("--delta1", flags->delta1,
                  "Base level deviation per WS, MW (one value or one per WS)")
      ->delimiter(',');
}

// Config file plus flag overrides; flags win.
rtopf::RunConfig merged_config(const CommonFlags& flags) {
  rtopf::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = rtopf::load_config(flags.config_path);
  if (!flags.network_path.empty()) cfg.network_path = flags.network_path;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.horizons) cfg.horizons = *flags.horizons;
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.wall_clock_scale)
    cfg.timing.wall_clock_scale = *flags.wall_clock_scale;
  if (!flags.delta1.empty()) cfg.delta1_mw = flags.delta1;
  cfg.validate();
  if (cfg.network_path.empty())
    throw rtopf::Error("no network file given (use --network or a config)");
  return cfg;
}

int cmd_validate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rtopf::Error(path + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw rtopf::Error(path + ": parse error: " + e.what());
  }
  const rtopf::Network net = rtopf::network_from_json(j, path);
  const rtopf::ValidationReport report = rtopf::validate_network(net);
  if (!report.ok()) {
    std::cerr << path << ": " << report.violations.size()
              << " violation(s):\n"
              << report.to_string();
    return 1;
  }
  std::cout << path << ": ok (" << net.n_bus() << " buses, "
            << net.n_branch() << " branches, " << net.n_ws()
            << " wind stations)\n";
  return 0;
}

int cmd_opf(const CommonFlags& flags, const std::vector<double>& wind_mw,
            const std::string& dump_state_path) {
  const rtopf::RunConfig cfg = merged_config(flags);
  const rtopf::Network net = rtopf::load_network(cfg.network_path);
  if (static_cast<int>(wind_mw.size()) != net.n_ws())
    throw rtopf::Error("--wind needs one value per wind station (" +
                       std::to_string(net.n_ws()) + ")");
  const rtopf::AdmittanceMatrix y = rtopf::build_admittance(net);
  rtopf::OpfProblem problem{&net, &y, {}, cfg.prices};
  for (double mw : wind_mw) problem.wind_available.push_back(net.to_pu(mw));

  const rtopf::OpfSolution sol = rtopf::solve_opf(problem);

  json out;
  out["status"] = rtopf::to_string(sol.status);
  out["beta"] = sol.beta;
  out["objective"] = sol.objective;
  if (sol.state.converged) {
    out["p_slack_mw"] = net.to_mw(sol.state.p_slack);
    out["q_slack_mvar"] = net.to_mw(sol.state.q_slack);
    out["losses_mw"] = net.to_mw(rtopf::total_losses(net, sol.state));
  }
  json binding = json::array();
  if (sol.status == rtopf::SolveStatus::Optimal) {
    const rtopf::Evaluation ev = rtopf::evaluate(problem, sol.beta);
    const std::vector<std::string> names = rtopf::margin_names(net);
    for (size_t i = 0; i < ev.margins.size(); ++i)
      if (ev.margins[i] >= -1e-5) binding.push_back(names[i]);
  }
  out["binding"] = std::move(binding);
  std::cout << out.dump(2) << "\n";

  if (!dump_state_path.empty())
    rtopf::atomic_write(dump_state_path, rtopf::state_csv(sol.state));
  return 0;
}

// One prediction-horizon pass: levels, scenarios, parallel solves, table.
int cmd_table(const CommonFlags& flags,
              const std::vector<double>& forecast_flag_mw) {
  const rtopf::RunConfig cfg = merged_config(flags);
  const rtopf::Network net = rtopf::load_network(cfg.network_path);
  const rtopf::AdmittanceMatrix y = rtopf::build_admittance(net);
  const rtopf::DeviationConfig dev = cfg.deviation(net);

  std::vector<double> forecast_pu;
  if (!forecast_flag_mw.empty()) {
    for (double mw : forecast_flag_mw) forecast_pu.push_back(net.to_pu(mw));
  } else if (cfg.table_forecast_mw) {
    for (double mw : *cfg.table_forecast_mw)
      forecast_pu.push_back(net.to_pu(mw));
  } else if (cfg.forecast_csv) {
    const auto forecasts = rtopf::read_forecast_csv(*cfg.forecast_csv, net);
    for (int w = 0; w < net.n_ws(); ++w)
      forecast_pu.push_back(forecasts[w][0]);
  } else {
    throw rtopf::Error(
        "no forecast given (use --forecast, table_forecast_mw or a "
        "forecast_csv)");
  }
  if (static_cast<int>(forecast_pu.size()) != net.n_ws())
    throw rtopf::Error("forecast needs one value per wind station");

  const std::vector<rtopf::LevelSet> levels =
      rtopf::generate_all_levels(net, forecast_pu, dev);
  const rtopf::ScenarioSet scenarios = rtopf::enumerate_scenarios(levels);
  std::map<int, rtopf::OpfProblem> problems;
  for (const rtopf::Scenario& sc : scenarios.scenarios)
    problems.emplace(sc.id, rtopf::OpfProblem{&net, &y, sc.wind, cfg.prices});
  auto [solutions, report] =
      rtopf::solve_all(problems, cfg.timing, cfg.workers);
  const rtopf::LookupTable table =
      rtopf::build_table(scenarios, solutions, levels);

  fs::create_directories(cfg.out_dir);
  rtopf::atomic_write(fs::path(cfg.out_dir) / "table.csv",
                      rtopf::table_csv(table, net));
  rtopf::atomic_write(fs::path(cfg.out_dir) / "table.json",
                      rtopf::table_json(table, net).dump(2) + "\n");
  int fallback_rows = 0;
  for (const rtopf::TableRow& row : table.rows)
    if (row.solution.status != rtopf::SolveStatus::Optimal) ++fallback_rows;
  std::cout << "table: " << table.size() << " rows, " << fallback_rows
            << " fallback, " << report.overruns << " overruns -> "
            << cfg.out_dir << "/table.{csv,json}\n";
  return 0;
}

int cmd_simulate(const CommonFlags& flags, double volatility_flag_mw,
                 bool has_volatility_flag) {
  rtopf::RunConfig cfg = merged_config(flags);
  if (has_volatility_flag) cfg.volatility_mw = volatility_flag_mw;
  const rtopf::Network net = rtopf::load_network(cfg.network_path);
  const rtopf::DeviationConfig dev = cfg.deviation(net);

  rtopf::WindTrace trace;
  if (cfg.forecast_csv) {
    auto forecasts = rtopf::read_forecast_csv(*cfg.forecast_csv, net);
    if (static_cast<int>(forecasts[0].size()) < cfg.horizons)
      throw rtopf::Error("forecast csv covers fewer horizons than requested");
    for (auto& series : forecasts) series.resize(cfg.horizons);
    trace = rtopf::synthesize_actuals(cfg.seed, net, forecasts,
                                      net.to_pu(cfg.volatility_mw),
                                      cfg.timing.updates_per_horizon);
  } else {
    std::optional<std::vector<double>> initial_pu;
    if (cfg.initial_wind_mw) {
      initial_pu.emplace();
      for (double mw : *cfg.initial_wind_mw)
        initial_pu->push_back(net.to_pu(mw));
    }
    trace = rtopf::synthesize_trace(
        cfg.seed, net, cfg.horizons, net.to_pu(cfg.volatility_mw),
        cfg.timing.updates_per_horizon,
        initial_pu ? &*initial_pu : nullptr);
  }

  rtopf::SimOptions options;
  options.workers = cfg.workers;
  if (cfg.demand_csv)
    options.horizon_networks =
        rtopf::read_demand_csv(*cfg.demand_csv, net, cfg.horizons);

  const rtopf::SimReport report =
      rtopf::run_simulation(net, cfg.prices, cfg.timing, dev, trace, options);

  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  rtopf::atomic_write(out / "dispatch_log.csv",
                      rtopf::dispatch_log_csv(report, net));
  rtopf::atomic_write(out / "audit.csv", rtopf::audit_csv(report, net));
  rtopf::atomic_write(out / "sim_report.json",
                      rtopf::sim_report_json(report, net).dump(2) + "\n");
  rtopf::atomic_write(out / "run_report.json",
                      rtopf::run_report_json(report).dump(2) + "\n");
  rtopf::atomic_write(out / "plot.csv",
                      rtopf::plot_csv(report, trace, net, cfg.timing));

  std::cout << "simulated " << report.horizons << " horizon(s): injected "
            << rtopf::format_double(report.energy.injected)
            << " MWh of " << rtopf::format_double(report.energy.available)
            << " MWh available, net "
            << rtopf::format_double(report.economics.net) << " -> "
            << cfg.out_dir << "/\n";
  return 0;
}

int cmd_report(const std::string& path) {
  json j;
  try {
    j = json::parse(rtopf::read_file(path));
  } catch (const json::parse_error& e) {
    throw rtopf::Error(path + ": parse error: " + e.what());
  }
  const json& e = j.at("energy_mwh");
  const json& c = j.at("economics");
  std::cout << "horizons:                 " << j.at("horizons") << "\n"
            << "wind available [MWh]:     " << e.at("available") << "\n"
            << "wind injected [MWh]:      " << e.at("injected") << "\n"
            << "curtailed (ideal) [MWh]:  " << e.at("curtailed_beta") << "\n"
            << "curtailed (conserv) [MWh]:" << e.at("curtailed_conservatism")
            << "\n"
            << "imported P [MWh]:         " << e.at("imported_p") << "\n"
            << "imported Q [MVArh]:       " << e.at("imported_q_mvarh") << "\n"
            << "losses [MWh]:             " << e.at("losses") << "\n"
            << "wind revenue:             " << c.at("revenue_wind") << "\n"
            << "cost of losses:           " << c.at("cost_losses") << "\n"
            << "cost of P import:         " << c.at("cost_p_import") << "\n"
            << "cost of Q import:         " << c.at("cost_q_import") << "\n"
            << "net:                      " << c.at("net") << "\n"
            << "clamp events:             " << j.at("clamp_events") << "\n"
            << "scheduler overruns:       " << j.at("scheduler_overruns")
            << "\n"
            << "reverse-flow violations:  " << j.at("reverse_flow_violations")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time optimal power flow for wind-penetrated feeders"};
  app.require_subcommand(1);

  std::string validate_path;
  CLI::App* validate =
      app.add_subcommand("validate", "Validate a network file");
  validate->add_option("network", validate_path, "Network file (JSON)")
      ->required();

  CommonFlags opf_flags;
  std::vector<double> opf_wind;
  std::string dump_state_path;
  CLI::App* opf = app.add_subcommand(
      "opf", "Solve one curtailment OPF at given available wind");
  add_common_flags(opf, &opf_flags);
  opf->add_option("--wind", opf_wind, "Available wind per WS, MW")
      ->delimiter(',')
      ->required();
  opf->add_option("--dump-state", dump_state_path,
                  "Write the optimal power flow state to CSV");

  CommonFlags table_flags;
  std::vector<double> table_forecast;
  CLI::App* table = app.add_subcommand(
      "table", "Build one prediction horizon's lookup table");
  add_common_flags(table, &table_flags);
  table->add_option("--forecast", table_forecast, "Forecast per WS, MW")
      ->delimiter(',');

  CommonFlags sim_flags;
  double volatility_mw = 0;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Run the moving-horizon simulation");
  add_common_flags(simulate, &sim_flags);
  CLI::Option* vol_opt = simulate->add_option(
      "--volatility", volatility_mw, "Random-walk step bound, MW");

  std::string report_path;
  CLI::App* report =
      app.add_subcommand("report", "Summarize a sim_report.json");
  report->add_option("report_json", report_path, "sim_report.json path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_path);
    if (opf->parsed()) return cmd_opf(opf_flags, opf_wind, dump_state_path);
    if (table->parsed()) return cmd_table(table_flags, table_forecast);
    if (simulate->parsed())
      return cmd_simulate(sim_flags, volatility_mw, vol_opt->count() > 0);
    if (report->parsed()) return cmd_report(report_path);
  } catch (const rtopf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const rtopf::InternalError& e) {
    std::cerr << "internal invariant breach: " << e.what()
              << "\nThis is a bug; please report it with the exact command "
                 "line and input files.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what()
              << "\nThis is a bug; please report it with the exact command "
                 "line and input files.\n";
    return 2;
  }
  return 0;
}
