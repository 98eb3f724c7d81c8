#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idmgym/histogram.hpp"
#include "idmgym/model.hpp"
#include "idmgym/network.hpp"
#include "idmgym/rng.hpp"

namespace idmgym {

inline constexpr double kDefaultVehicleLength = 5.0;
inline constexpr double kDefaultMeanHeadway = 4.0;

struct Route {
  std::string id;
  std::vector<std::string> lanes;
  friend bool operator==(const Route&, const Route&) = default;
};

struct VehicleSpec {
  std::string id;
  std::string route;
  double depart = 0.0;
  ParamSet params;
  double length = kDefaultVehicleLength;
  /// Optional explicit insertion point (arc length along the route) and speed.
  std::optional<double> depart_pos;
  std::optional<double> depart_speed;
  friend bool operator==(const VehicleSpec&, const VehicleSpec&) = default;
};

struct DemandSpec {
  std::vector<Route> routes;
  std::vector<VehicleSpec> vehicles;

  /// Routes resolve and are successor-connected in `net`; vehicle ids are
  /// unique; departures >= 0; parameter sets valid.
  void validate(const RoadNetwork& net) const;
  [[nodiscard]] const Route* find_route(const std::string& id) const;
  friend bool operator==(const DemandSpec&, const DemandSpec&) = default;
};

/// Picks a bin with probability equal to its mass, then a uniform value in
/// [lo, hi) of that bin.
double sample_from_histogram(const Histogram& h, Rng& rng);

/// Each coordinate drawn independently from its histogram. `pinned_delta`
/// stands in for a missing delta histogram.
ParamSet sample_param_set(const ParamHistograms& hists, Rng& rng,
                          std::optional<double> pinned_delta = std::nullopt);

/// Random source/sink pairs joined by the shortest successor path (by
/// length). Unreachable pairs are redrawn up to 100 times each.
std::vector<Route> generate_random_trips(const RoadNetwork& net, std::size_t n_routes, Rng& rng);

struct FlowSpec {
  double mean_headway = kDefaultMeanHeadway;  ///< s, exponential inter-departure gaps
  std::size_t n_routes = 4;
  double vehicle_length = kDefaultVehicleLength;
  std::optional<double> pinned_delta;
};

DemandSpec build_demand(const RoadNetwork& net, const ParamHistograms& hists, std::size_t n_vehicles,
                        const FlowSpec& flow, Rng& rng);

/// Demand JSON: {routes:[{id, lanes:[...]}],
///               vehicles:[{id, route, depart, params:{a_max,...}, length}]}
std::string demand_to_json(const DemandSpec& demand);
DemandSpec demand_from_json(const std::string& text, const std::string& source = "<json>");
DemandSpec load_demand(const std::filesystem::path& path);
void write_demand(const std::filesystem::path& path, const DemandSpec& demand);

}  // namespace idmgym
