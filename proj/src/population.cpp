#include "idmgym/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "idmgym/errors.hpp"
#include "json_util.hpp"

namespace idmgym {

double sample_from_histogram(const Histogram& h, Rng& rng) {
  h.validate();
  std::vector<double> cum;
  cum.reserve(h.bins.size());
  double total = 0.0;
  for (const auto& b : h.bins) {
    total += b.mass;
    cum.push_back(total);
  }
  if (!(total > 0.0)) throw InputDomainError("sample_from_histogram: all bins have zero mass");

  const double u = uniform01(rng) * total;
  auto idx = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  idx = std::min(idx, h.bins.size() - 1);
  // Skip zero-mass bins that the search can land on through rounding.
  while (h.bins[idx].mass == 0.0 && idx > 0) --idx;
  while (h.bins[idx].mass == 0.0) ++idx;

  const auto& bin = h.bins[idx];
  double x = bin.lo + (bin.hi - bin.lo) * uniform01(rng);
  if (x >= bin.hi) x = std::nextafter(bin.hi, bin.lo);
  return x;
}

ParamSet sample_param_set(const ParamHistograms& hists, Rng& rng, std::optional<double> pinned_delta) {
  for (const auto& [name, h] : hists) {
    if (std::find(ParamSet::kNames.begin(), ParamSet::kNames.end(), name) == ParamSet::kNames.end()) {
      throw ConfigError(fmt::format("histogram for unknown parameter '{}'", name));
    }
  }
  std::array<double, ParamSet::kSize> values{};
  for (std::size_t i = 0; i < ParamSet::kSize; ++i) {
    const std::string name(ParamSet::kNames[i]);
    const auto it = hists.find(name);
    if (it == hists.end()) {
      if (name == "delta" && pinned_delta) {
        values[i] = *pinned_delta;
        continue;
      }
      throw ConfigError(fmt::format("missing histogram for parameter '{}'", name));
    }
    const auto& bins = it->second.bins;
    const auto first = std::find_if(bins.begin(), bins.end(), [](const auto& b) { return b.mass > 0.0; });
    if (first != bins.end() && !(first->lo > 0.0)) {
      throw ConfigError(fmt::format("histogram for '{}' puts mass on values <= 0", name));
    }
    values[i] = sample_from_histogram(it->second, rng);
  }
  auto p = ParamSet::from_array(values);
  p.validate();
  return p;
}

namespace {

// Lane-length weighted shortest path from `from` to `to`. Ties resolve
// toward the lower lane index so results do not depend on container order.
std::optional<std::vector<std::size_t>> shortest_path(const RoadNetwork& net, std::size_t from,
                                                      std::size_t to) {
  const auto n = net.lane_count();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n, n);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[from] = net.lane(from).length();
  queue.emplace(dist[from], from);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (u == to) break;
    for (auto v : net.successors(u)) {
      const double nd = d + net.lane(v).length();
      if (nd < dist[v] || (nd == dist[v] && u < prev[v])) {
        dist[v] = nd;
        prev[v] = u;
        queue.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[to])) return std::nullopt;
  std::vector<std::size_t> path{to};
  while (path.back() != from) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

std::vector<Route> generate_random_trips(const RoadNetwork& net, std::size_t n_routes, Rng& rng) {
  constexpr int kMaxRetries = 100;
  std::vector<Route> routes;
  if (n_routes == 0) return routes;
  if (net.sources().empty() || net.sinks().empty()) {
    throw GenerationError("network needs at least one source and one sink lane");
  }
  std::set<std::vector<std::size_t>> seen;
  for (std::size_t r = 0; r < n_routes; ++r) {
    std::optional<std::vector<std::size_t>> path;
    for (int attempt = 0; attempt < kMaxRetries && !path; ++attempt) {
      std::uniform_int_distribution<std::size_t> pick_src(0, net.sources().size() - 1);
      std::uniform_int_distribution<std::size_t> pick_dst(0, net.sinks().size() - 1);
      const auto src = net.sources()[pick_src(rng)];
      const auto dst = net.sinks()[pick_dst(rng)];
      path = shortest_path(net, src, dst);
    }
    if (!path) {
      throw GenerationError(
          fmt::format("no connected source/sink pair found after {} attempts", kMaxRetries));
    }
    if (!seen.insert(*path).second) continue;
    Route route;
    route.id = fmt::format("route_{}", routes.size());
    for (auto i : *path) route.lanes.push_back(net.lane(i).id);
    routes.push_back(std::move(route));
  }
  return routes;
}

DemandSpec build_demand(const RoadNetwork& net, const ParamHistograms& hists, std::size_t n_vehicles,
                        const FlowSpec& flow, Rng& rng) {
  if (!(flow.mean_headway > 0.0)) throw ConfigError("mean headway must be > 0");
  if (!(flow.vehicle_length > 0.0)) throw ConfigError("vehicle length must be > 0");
  DemandSpec demand;
  if (n_vehicles == 0) return demand;
  if (flow.n_routes == 0) throw ConfigError("n_routes must be >= 1 when vehicles are requested");

  demand.routes = generate_random_trips(net, flow.n_routes, rng);
  std::vector<double> clock(demand.routes.size(), 0.0);
  std::exponential_distribution<double> headway(1.0 / flow.mean_headway);
  for (std::size_t i = 0; i < n_vehicles; ++i) {
    const auto r = i % demand.routes.size();
    VehicleSpec v;
    v.id = fmt::format("bv_{}", i);
    v.route = demand.routes[r].id;
    v.params = sample_param_set(hists, rng, flow.pinned_delta);
    v.length = flow.vehicle_length;
    v.depart = clock[r];
    clock[r] += headway(rng);
    demand.vehicles.push_back(std::move(v));
  }
  demand.validate(net);
  return demand;
}

const Route* DemandSpec::find_route(const std::string& id) const {
  for (const auto& r : routes) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void DemandSpec::validate(const RoadNetwork& net) const {
  std::unordered_set<std::string> route_ids;
  for (const auto& r : routes) {
    if (!route_ids.insert(r.id).second) throw ValidationError(fmt::format("route '{}': duplicate id", r.id));
    if (r.lanes.empty()) throw ValidationError(fmt::format("route '{}': no lanes", r.id));
    std::optional<std::size_t> prev;
    for (const auto& lane_id : r.lanes) {
      const auto idx = net.find(lane_id);
      if (!idx) throw ValidationError(fmt::format("route '{}': unknown lane '{}'", r.id, lane_id));
      if (prev) {
        const auto& succ = net.successors(*prev);
        if (std::find(succ.begin(), succ.end(), *idx) == succ.end()) {
          throw ValidationError(fmt::format("route '{}': lane '{}' does not follow '{}'", r.id,
                                            lane_id, net.lane(*prev).id));
        }
      }
      prev = idx;
    }
  }
  std::unordered_set<std::string> vehicle_ids;
  for (const auto& v : vehicles) {
    if (!vehicle_ids.insert(v.id).second) throw ValidationError(fmt::format("vehicle '{}': duplicate id", v.id));
    if (!route_ids.count(v.route)) {
      throw ValidationError(fmt::format("vehicle '{}': unknown route '{}'", v.id, v.route));
    }
    if (!std::isfinite(v.depart) || v.depart < 0.0) {
      throw ValidationError(fmt::format("vehicle '{}': depart must be >= 0", v.id));
    }
    if (!std::isfinite(v.length) || v.length <= 0.0) {
      throw ValidationError(fmt::format("vehicle '{}': length must be > 0", v.id));
    }
    if (v.depart_pos && (!std::isfinite(*v.depart_pos) || *v.depart_pos < 0.0)) {
      throw ValidationError(fmt::format("vehicle '{}': depart_pos must be >= 0", v.id));
    }
    if (v.depart_speed && (!std::isfinite(*v.depart_speed) || *v.depart_speed < 0.0)) {
      throw ValidationError(fmt::format("vehicle '{}': depart_speed must be >= 0", v.id));
    }
    try {
      v.params.validate();
    } catch (const Error& e) {
      throw ValidationError(fmt::format("vehicle '{}': {}", v.id, e.what()));
    }
  }
}

std::string demand_to_json(const DemandSpec& demand) {
  using detail::ojson;
  ojson routes = ojson::array();
  for (const auto& r : demand.routes) routes.push_back({{"id", r.id}, {"lanes", r.lanes}});
  ojson vehicles = ojson::array();
  for (const auto& v : demand.vehicles) {
    ojson params = ojson::object();
    const auto values = v.params.to_array();
    for (std::size_t i = 0; i < ParamSet::kSize; ++i) params[std::string(ParamSet::kNames[i])] = values[i];
    ojson vj = {{"id", v.id}, {"route", v.route}, {"depart", v.depart}, {"params", params},
                {"length", v.length}};
    if (v.depart_pos) vj["depart_pos"] = *v.depart_pos;
    if (v.depart_speed) vj["depart_speed"] = *v.depart_speed;
    vehicles.push_back(std::move(vj));
  }
  ojson root = {{"routes", routes}, {"vehicles", vehicles}};
  return root.dump(2) + "\n";
}

DemandSpec demand_from_json(const std::string& text, const std::string& source) {
  using detail::ojson;
  const ojson root = detail::parse_json(text, source);
  DemandSpec demand;
  const auto& routes = detail::member(root, "routes", source);
  const auto& vehicles = detail::member(root, "vehicles", source);
  if (!routes.is_array() || !vehicles.is_array()) {
    throw ParseError(fmt::format("{}: 'routes' and 'vehicles' must be arrays", source));
  }
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto where = fmt::format("{}: route #{}", source, i);
    Route r;
    r.id = detail::string(routes[i], "id", where);
    const auto& lanes = detail::member(routes[i], "lanes", where);
    if (!lanes.is_array()) throw ParseError(where + ": 'lanes' must be an array");
    for (const auto& l : lanes) {
      if (!l.is_string()) throw ParseError(where + ": lane ids must be strings");
      r.lanes.push_back(l.get<std::string>());
    }
    demand.routes.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& vj = vehicles[i];
    const auto where = fmt::format("{}: vehicle #{}", source, i);
    VehicleSpec v;
    v.id = detail::string(vj, "id", where);
    v.route = detail::string(vj, "route", where);
    v.depart = detail::number(vj, "depart", where);
    if (vj.contains("length")) v.length = detail::number(vj, "length", where);
    if (vj.contains("depart_pos")) v.depart_pos = detail::number(vj, "depart_pos", where);
    if (vj.contains("depart_speed")) v.depart_speed = detail::number(vj, "depart_speed", where);
    const auto& pj = detail::member(vj, "params", where);
    std::array<double, ParamSet::kSize> values{};
    for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
      const std::string name(ParamSet::kNames[k]);
      if (name == "delta" && !pj.contains("delta")) {
        values[k] = ParamSet{}.delta;
        continue;
      }
      values[k] = detail::number(pj, name.c_str(), where + " params");
    }
    v.params = ParamSet::from_array(values);
    demand.vehicles.push_back(std::move(v));
  }
  return demand;
}

DemandSpec load_demand(const std::filesystem::path& path) {
  return demand_from_json(detail::read_text_file(path), path.string());
}

void write_demand(const std::filesystem::path& path, const DemandSpec& demand) {
  detail::write_text_file(path, demand_to_json(demand));
}

}  // namespace idmgym
