#pragma once

#include <atomic>
#include <chrono>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rtopf/common.hpp"
#include "rtopf/opf.hpp"

namespace rtopf {

// Time allocation of one prediction horizon (Fig-3 style schedule): three
// pre-solve data steps and one table step of t_data each surround the
// reserved solve window, so t_solve = t_horizon - 4 * t_data.
struct TimingConfig {
  double t_horizon = 120.0;       // prediction horizon, s
  double t_update = 20.0;         // update interval, s
  double t_data = 2.0;            // data-management step, s
  int updates_per_horizon = 6;
  double wall_clock_scale = 1.0;  // simulated -> real seconds for deadlines

  double t_solve() const { return t_horizon - 4.0 * t_data; }

  void validate() const {
    if (updates_per_horizon < 1)
      throw Error("timing: updates_per_horizon must be >= 1");
    if (!(t_update > 0) || !(t_data >= 0))
      throw Error("timing: intervals must be positive");
    if (std::abs(t_horizon - updates_per_horizon * t_update) > 1e-9)
      throw Error("timing: t_horizon must equal updates_per_horizon * "
                  "t_update");
    if (!(t_solve() > 0))
      throw Error("timing: no time left for the solve window");
    if (!(wall_clock_scale > 0))
      throw Error("timing: wall_clock_scale must be positive");
  }
};

struct SolveReport {
  struct PerScenario {
    int id = 0;
    double wall_seconds = 0;
    SolveStatus status = SolveStatus::Fallback;
    int worker = -1;
    bool reused = false;  // copied from an identical problem's solve
  };
  std::vector<PerScenario> scenarios;
  double budget_seconds = 0;  // deadline given to the batch, real s
  double budget_used = 0;     // wall time of the batch, real s
  int overruns = 0;           // solves cut off by the deadline
  int workers = 0;
};

using SolveFn =
    std::function<OpfSolution(const OpfProblem&, const DeadlineToken&)>;

inline OpfSolution default_scenario_solve(const OpfProblem& problem,
                                          const DeadlineToken& deadline) {
  OpfOptions opts;
  opts.deadline = deadline;
  return solve_opf(problem, opts);
}

namespace detail {

// Batches share one network, so two problems are interchangeable iff their
// wind vectors match bit for bit and they price identically.
inline bool same_problem(const OpfProblem& a, const OpfProblem& b) {
  return a.net == b.net && a.y == b.y &&
         std::memcmp(&a.prices, &b.prices, sizeof(PriceModel)) == 0 &&
         a.wind_available.size() == b.wind_available.size() &&
         std::memcmp(a.wind_available.data(), b.wind_available.data(),
                     a.wind_available.size() * sizeof(double)) == 0;
}

}  // namespace detail

// Solves every scenario problem on a worker pool under the hard solve-window
// deadline. Results are keyed by scenario id and bit-identical for any
// worker count: solves are pure, cut-off solves degrade to the beta = 0
// fallback, and scenarios with identical problems share one computation.
inline std::pair<std::map<int, OpfSolution>, SolveReport> solve_all(
    const std::map<int, OpfProblem>& problems, const TimingConfig& timing,
    int workers = 0, const SolveFn& solve_fn = default_scenario_solve) {
  timing.validate();
  if (problems.empty()) throw Error("solve_all: empty problem batch");

  const auto t_start = std::chrono::steady_clock::now();
  const double budget = timing.t_solve() * timing.wall_clock_scale;
  const DeadlineToken deadline = DeadlineToken::after(budget);

  // Deduplicate identical problems; representatives keep the first id.
  std::vector<int> ids;
  ids.reserve(problems.size());
  for (const auto& [id, problem] : problems) ids.push_back(id);
  const int n = static_cast<int>(ids.size());
  std::vector<int> rep_of(n);  // index into `unique`
  std::vector<int> unique;
  for (int i = 0; i < n; ++i) {
    const OpfProblem& p = problems.at(ids[i]);
    int found = -1;
    for (int u = 0; u < static_cast<int>(unique.size()); ++u) {
      if (detail::same_problem(problems.at(ids[unique[u]]), p)) {
        found = u;
        break;
      }
    }
    if (found < 0) {
      unique.push_back(i);
      found = static_cast<int>(unique.size()) - 1;
    }
    rep_of[i] = found;
  }

  int pool = workers > 0 ? workers
                         : static_cast<int>(std::thread::hardware_concurrency());
  if (pool < 1) pool = 1;
  pool = std::min<int>(pool, static_cast<int>(unique.size()));

  struct UniqueResult {
    OpfSolution solution;
    double wall_seconds = 0;
    int worker = -1;
  };
  std::vector<UniqueResult> results(unique.size());
  std::atomic<size_t> next{0};

  auto work = [&](int worker_id) {
    for (;;) {
      const size_t u = next.fetch_add(1);
      if (u >= unique.size()) return;
      const auto t0 = std::chrono::steady_clock::now();
      const OpfProblem& p = problems.at(ids[unique[u]]);
      OpfSolution sol;
      if (deadline.expired()) {
        sol = fallback_solution(static_cast<int>(p.wind_available.size()));
      } else {
        sol = solve_fn(p, deadline);
      }
      results[u].solution = std::move(sol);
      results[u].wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      results[u].worker = worker_id;
    }
  };

  if (pool == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (int w = 0; w < pool; ++w) threads.emplace_back(work, w);
    for (std::thread& t : threads) t.join();
  }

  std::map<int, OpfSolution> solutions;
  SolveReport report;
  report.workers = pool;
  report.budget_seconds = budget;
  for (const UniqueResult& r : results)
    if (r.solution.status == SolveStatus::Fallback) ++report.overruns;
  for (int i = 0; i < n; ++i) {
    const UniqueResult& r = results[rep_of[i]];
    solutions.emplace(ids[i], r.solution);
    SolveReport::PerScenario ps;
    ps.id = ids[i];
    ps.wall_seconds = r.wall_seconds;
    ps.status = r.solution.status;
    ps.worker = r.worker;
    ps.reused = unique[rep_of[i]] != i;
    report.scenarios.push_back(ps);
  }
  report.budget_used =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return {std::move(solutions), std::move(report)};
}

}  // namespace rtopf
