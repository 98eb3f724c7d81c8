#include "idmgym/scenario.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "idmgym/errors.hpp"
#include "json_util.hpp"

namespace idmgym {

std::string_view to_string(ScenarioKind kind) noexcept {
  return kind == ScenarioKind::highway ? "highway" : "urban";
}

ScenarioKind parse_scenario_kind(std::string_view text) {
  if (text == "highway") return ScenarioKind::highway;
  if (text == "urban") return ScenarioKind::urban;
  throw ConfigError(fmt::format("unknown scenario kind '{}' (expected highway or urban)", text));
}

void Scenario::validate() const {
  if (!std::isfinite(config.dt) || config.dt <= 0.0) throw ValidationError("scenario dt must be > 0");
  if (config.max_steps < 1) throw ValidationError("scenario max_steps must be >= 1");
  demand.validate(network);

  const auto lane = network.find(ego.lane);
  if (!lane) throw ValidationError(fmt::format("ego spawn lane '{}' not in network", ego.lane));
  const double len = network.lane(*lane).length();
  if (!std::isfinite(ego.s) || ego.s < 0.0 || ego.s > len) {
    throw ValidationError(fmt::format("ego spawn s={} outside lane '{}' [0, {}]", ego.s, ego.lane, len));
  }
  if (!std::isfinite(ego.speed) || ego.speed < 0.0) throw ValidationError("ego speed must be >= 0");
  if (!(ego.length > 0.0) || !(ego.width > 0.0)) throw ValidationError("ego length and width must be > 0");
  if (!ego.route.empty()) {
    if (ego.route.front() != ego.lane) throw ValidationError("ego route must start at the spawn lane");
    for (std::size_t i = 0; i < ego.route.size(); ++i) {
      const auto idx = network.find(ego.route[i]);
      if (!idx) throw ValidationError(fmt::format("ego route: unknown lane '{}'", ego.route[i]));
      if (i == 0) continue;
      const auto& succ = network.successors(network.index_of(ego.route[i - 1]));
      if (std::find(succ.begin(), succ.end(), *idx) == succ.end()) {
        throw ValidationError(fmt::format("ego route: '{}' does not follow '{}'", ego.route[i], ego.route[i - 1]));
      }
    }
  }
}

Scenario make_scenario(ScenarioKind kind, RoadNetwork network, DemandSpec demand, SimConfig config,
                       EgoSpawn ego) {
  Scenario sc{kind, {}, std::move(network), std::move(demand), config, std::move(ego)};
  if (sc.ego.lane.empty()) {
    if (sc.network.sources().empty()) throw ValidationError("no ego lane given and network has no sources");
    sc.ego.lane = sc.network.lane(sc.network.sources().front()).id;
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  using detail::ojson;
  const auto where = path.string();
  const ojson root = detail::parse_json(detail::read_text_file(path), where);
  const auto kind = parse_scenario_kind(detail::string(root, "kind", where));
  const auto base = path.parent_path();
  auto network = load_network(base / detail::string(root, "network_file", where));
  auto demand = load_demand(base / detail::string(root, "demand_file", where));

  SimConfig config;
  config.dt = detail::number(root, "dt", where);
  const auto& steps = detail::member(root, "max_steps", where);
  if (!steps.is_number_unsigned()) throw ParseError(where + ": 'max_steps' must be a non-negative integer");
  config.max_steps = steps.get<std::size_t>();
  const auto& seed = detail::member(root, "seed", where);
  if (!seed.is_number_unsigned()) throw ParseError(where + ": 'seed' must be a non-negative integer");
  config.seed = seed.get<std::uint64_t>();

  EgoSpawn ego;
  if (root.contains("ego")) {
    const auto& ej = root.at("ego");
    const auto ewhere = where + ": ego";
    if (!ej.is_object()) throw ParseError(ewhere + " must be an object");
    if (ej.contains("lane")) ego.lane = detail::string(ej, "lane", ewhere);
    if (ej.contains("s")) ego.s = detail::number(ej, "s", ewhere);
    if (ej.contains("speed")) ego.speed = detail::number(ej, "speed", ewhere);
    if (ej.contains("length")) ego.length = detail::number(ej, "length", ewhere);
    if (ej.contains("width")) ego.width = detail::number(ej, "width", ewhere);
    if (ej.contains("route")) {
      const auto& rj = ej.at("route");
      if (!rj.is_array()) throw ParseError(ewhere + ": 'route' must be an array");
      for (const auto& l : rj) {
        if (!l.is_string()) throw ParseError(ewhere + ": route lane ids must be strings");
        ego.route.push_back(l.get<std::string>());
      }
    }
  }
  try {
    auto sc = make_scenario(kind, std::move(network), std::move(demand), config, std::move(ego));
    sc.source = path;
    return sc;
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", where, e.what()));
  }
}

std::vector<std::filesystem::path> list_scenarios(ScenarioKind kind,
                                                  const std::filesystem::path& library_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(library_dir)) {
    throw IoError(fmt::format("scenario library {} is not a directory", library_dir.string()));
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(library_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const auto root = detail::parse_json(detail::read_text_file(entry.path()), entry.path().string());
    if (root.is_object() && root.contains("kind") && root.at("kind").is_string() &&
        root.at("kind").get<std::string>() == to_string(kind)) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Scenario load_scenario(ScenarioKind kind, const std::filesystem::path& library_dir, Rng& rng) {
  const auto files = list_scenarios(kind, library_dir);
  if (files.empty()) {
    throw ConfigError(fmt::format("no {} scenarios in {}", to_string(kind), library_dir.string()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, files.size() - 1);
  return load_scenario(files[pick(rng)]);
}

}  // namespace idmgym
