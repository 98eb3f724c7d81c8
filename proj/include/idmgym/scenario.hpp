#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idmgym/network.hpp"
#include "idmgym/population.hpp"
#include "idmgym/rng.hpp"

namespace idmgym {

enum class ScenarioKind { highway, urban };

std::string_view to_string(ScenarioKind kind) noexcept;
ScenarioKind parse_scenario_kind(std::string_view text);

inline constexpr double kDefaultVehicleWidth = 1.8;

struct SimConfig {
  double dt = 0.1;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
};

/// Where the ego starts. `route`, when given, starts at `lane` and steers
/// the ego at lane ends; otherwise the first listed successor is taken.
struct EgoSpawn {
  std::string lane;
  double s = kDefaultVehicleLength;  ///< front bumper arc length
  double speed = 0.0;
  std::vector<std::string> route;
  double length = kDefaultVehicleLength;
  double width = kDefaultVehicleWidth;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::highway;
  std::filesystem::path source;  ///< file it was loaded from, empty if built in code
  RoadNetwork network;
  DemandSpec demand;
  SimConfig config;
  EgoSpawn ego;

  /// Demand against network, dt > 0, max_steps >= 1, ego spawn on the road.
  void validate() const;
};

/// Assembles and validates; throws rather than returning a partial object.
Scenario make_scenario(ScenarioKind kind, RoadNetwork network, DemandSpec demand, SimConfig config,
                       EgoSpawn ego);

/// Scenario JSON: {kind, network_file, demand_file, dt, max_steps, seed,
/// ego:{lane, s, speed, route, length, width}}. File paths are relative to
/// the scenario file. `ego` and its members are optional.
Scenario load_scenario(const std::filesystem::path& path);

/// Scenario files of the given kind in `library_dir`, sorted by path.
std::vector<std::filesystem::path> list_scenarios(ScenarioKind kind,
                                                  const std::filesystem::path& library_dir);

/// Uniformly random pick among list_scenarios(kind, library_dir).
Scenario load_scenario(ScenarioKind kind, const std::filesystem::path& library_dir, Rng& rng);

}  // namespace idmgym
