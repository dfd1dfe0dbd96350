#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rtopf/common.hpp"
#include "rtopf/grid.hpp"

namespace rtopf {

inline constexpr int kLevelsPerWs = 7;

// Per-WS base deviation delta1, p.u.; the three level widths follow the
// fixed 1:2:3 pattern (delta2 = 2*delta1, delta3 = 3*delta1).
struct DeviationConfig {
  std::vector<double> delta1;

  void validate(const Network& net) const {
    if (static_cast<int>(delta1.size()) != net.n_ws())
      throw Error("deviation config: one delta1 per wind station required");
    for (int w = 0; w < net.n_ws(); ++w) {
      if (!(delta1[w] >= 0))
        throw Error("deviation config: delta1 must be >= 0 at WS " +
                    std::to_string(w));
      if (3.0 * delta1[w] > net.wind_stations[w].p_rated + 1e-12)
        throw Error(
            "deviation config: 3*delta1 exceeds rated power at WS " +
            std::to_string(w));
    }
  }

  // Default deviation: 10% of rated per WS (level 3 spans +-30% of rated).
  static DeviationConfig proportional(const Network& net) {
    DeviationConfig dev;
    for (const WindStation& ws : net.wind_stations)
      dev.delta1.push_back(0.1 * ws.p_rated);
    return dev;
  }
};

// The seven wind values of one WS, ascending [L3, L2, L1, M, H1, H2, H3]
// after clipping to [0, p_rated]. Index 3 is the forecast mean, exactly.
struct LevelSet {
  std::array<double, kLevelsPerWs> values{};

  double value(int index) const { return values[static_cast<size_t>(index)]; }
  double mean() const { return values[3]; }
  double top() const { return values[kLevelsPerWs - 1]; }
};

// Level tag by ascending index: sigma in {-3..+3}.
inline int level_sigma(int index) { return index - 3; }

inline const char* level_name(int index) {
  static constexpr const char* names[kLevelsPerWs] = {"L3", "L2", "L1", "M",
                                                      "H1", "H2", "H3"};
  if (index < 0 || index >= kLevelsPerWs)
    throw InternalError("level index out of range");
  return names[index];
}

// Seven levels around the forecast: H_sigma = M + sigma_width, L_sigma =
// M - sigma_width with widths delta1 * {1,2,3}, then clipped to
// [0, p_rated]. The mean entry equals the forecast exactly.
inline LevelSet generate_levels(double forecast, double delta1,
                                double p_rated) {
  if (!(forecast >= 0) || forecast > p_rated + 1e-12)
    throw Error("forecast outside [0, p_rated]");
  LevelSet ls;
  for (int s = 1; s <= 3; ++s) {
    const double width = static_cast<double>(s) * delta1;
    ls.values[static_cast<size_t>(3 + s)] =
        std::min(forecast + width, p_rated);
    ls.values[static_cast<size_t>(3 - s)] = std::max(forecast - width, 0.0);
  }
  ls.values[3] = forecast;
  return ls;
}

inline std::vector<LevelSet> generate_all_levels(
    const Network& net, std::span<const double> forecast,
    const DeviationConfig& dev) {
  if (static_cast<int>(forecast.size()) != net.n_ws())
    throw Error("one forecast per wind station required");
  dev.validate(net);
  std::vector<LevelSet> out;
  out.reserve(net.n_ws());
  for (int w = 0; w < net.n_ws(); ++w)
    out.push_back(generate_levels(forecast[w], dev.delta1[w],
                                  net.wind_stations[w].p_rated));
  return out;
}

// One joint assignment of a level per WS. The id encodes the level indices
// in base 7 with WS 0 most significant; ids are dense in [0, 7^n_ws).
struct Scenario {
  int id = 0;
  std::vector<int> level_index;  // per WS, 0..6 ascending
  std::vector<double> wind;      // per WS, p.u.
};

struct ScenarioSet {
  int n_ws = 0;
  std::vector<Scenario> scenarios;

  int size() const { return static_cast<int>(scenarios.size()); }
};

inline int scenario_count(int n_ws) {
  if (n_ws < 0 || n_ws > 10)
    throw Error("scenario enumeration supports up to 10 wind stations");
  int count = 1;
  for (int w = 0; w < n_ws; ++w) count *= kLevelsPerWs;
  return count;
}

inline int encode_levels(std::span<const int> level_index) {
  int id = 0;
  for (int idx : level_index) {
    if (idx < 0 || idx >= kLevelsPerWs)
      throw InternalError("level index out of range");
    id = id * kLevelsPerWs + idx;
  }
  return id;
}

inline std::vector<int> decode_levels(int id, int n_ws) {
  if (id < 0 || id >= scenario_count(n_ws))
    throw InternalError("scenario id out of range");
  std::vector<int> idx(n_ws, 0);
  for (int w = n_ws - 1; w >= 0; --w) {
    idx[w] = id % kLevelsPerWs;
    id /= kLevelsPerWs;
  }
  return idx;
}

// Cartesian product of the per-WS level sets: 7^n_ws scenarios with dense,
// deterministic ids. Duplicate wind values from clipping are kept so the
// lookup table always has exactly 7^n_ws rows.
inline ScenarioSet enumerate_scenarios(const std::vector<LevelSet>& levels) {
  ScenarioSet set;
  set.n_ws = static_cast<int>(levels.size());
  const int count = scenario_count(set.n_ws);
  set.scenarios.reserve(count);
  for (int id = 0; id < count; ++id) {
    Scenario sc;
    sc.id = id;
    sc.level_index = decode_levels(id, set.n_ws);
    sc.wind.reserve(set.n_ws);
    for (int w = 0; w < set.n_ws; ++w)
      sc.wind.push_back(levels[w].value(sc.level_index[w]));
    set.scenarios.push_back(std::move(sc));
  }
  return set;
}

}  // namespace rtopf
