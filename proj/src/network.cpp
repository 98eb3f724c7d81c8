#include "idmgym/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "idmgym/errors.hpp"
#include "json_util.hpp"

namespace idmgym {

namespace {

struct SegmentFrame {
  Point2 start;
  double ux;
  double uy;
  double length;
};

SegmentFrame segment(const Lane& lane, std::size_t j) {
  const auto& a = lane.centerline[j];
  const auto& b = lane.centerline[j + 1];
  const double len = lane.cumulative[j + 1] - lane.cumulative[j];
  const double seg = std::hypot(b.x - a.x, b.y - a.y);
  return {a, (b.x - a.x) / seg, (b.y - a.y) / seg, len};
}

std::size_t segment_at(const Lane& lane, double s) {
  const auto it = std::upper_bound(lane.cumulative.begin(), lane.cumulative.end(), s);
  const auto j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - lane.cumulative.begin() - 1, 0));
  return std::min(j, lane.centerline.size() - 2);
}

}  // namespace

RoadNetwork RoadNetwork::build(std::vector<Lane> lanes, std::vector<std::string> sources,
                               std::vector<std::string> sinks) {
  RoadNetwork net;
  if (lanes.empty()) throw ValidationError("network has no lanes");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    auto& lane = lanes[i];
    if (lane.id.empty()) throw ValidationError(fmt::format("lane #{} has an empty id", i));
    if (!net.index_.emplace(lane.id, i).second) {
      throw ValidationError(fmt::format("lane '{}': duplicate id", lane.id));
    }
    if (lane.centerline.size() < 2) {
      throw ValidationError(fmt::format("lane '{}': centerline needs >= 2 points", lane.id));
    }
    if (!std::isfinite(lane.width) || lane.width <= 0.0) {
      throw ValidationError(fmt::format("lane '{}': width must be > 0", lane.id));
    }
    lane.cumulative.assign(1, 0.0);
    for (std::size_t j = 0; j + 1 < lane.centerline.size(); ++j) {
      const auto& a = lane.centerline[j];
      const auto& b = lane.centerline[j + 1];
      if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(b.x) || !std::isfinite(b.y)) {
        throw ValidationError(fmt::format("lane '{}': non-finite centerline point", lane.id));
      }
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      if (!(len > 0.0)) {
        throw ValidationError(fmt::format("lane '{}': zero-length segment {}", lane.id, j));
      }
      lane.cumulative.push_back(lane.cumulative.back() + len);
    }
  }

  auto resolve = [&](const std::string& ref, const std::string& owner, const char* what) {
    const auto it = net.index_.find(ref);
    if (it == net.index_.end()) {
      throw ValidationError(
          fmt::format("lane '{}': {} refers to missing lane '{}'", owner, what, ref));
    }
    return it->second;
  };

  const auto n = lanes.size();
  net.successors_.resize(n);
  net.left_.resize(n);
  net.right_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& lane = lanes[i];
    for (const auto& s : lane.successors) net.successors_[i].push_back(resolve(s, lane.id, "successor"));
    if (lane.left) net.left_[i] = resolve(*lane.left, lane.id, "left neighbor");
    if (lane.right) net.right_[i] = resolve(*lane.right, lane.id, "right neighbor");
  }
  for (const auto& s : sources) net.sources_.push_back(resolve(s, "<sources>", "source"));
  for (const auto& s : sinks) net.sinks_.push_back(resolve(s, "<sinks>", "sink"));
  net.lanes_ = std::move(lanes);
  return net;
}

std::optional<std::size_t> RoadNetwork::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t RoadNetwork::index_of(const std::string& id) const {
  if (auto i = find(id)) return *i;
  throw ValidationError(fmt::format("unknown lane '{}'", id));
}

std::vector<std::size_t> RoadNetwork::segment_lanes(std::size_t lane) const {
  std::size_t rightmost = lane;
  for (std::size_t guard = 0; right_.at(rightmost) && guard < lanes_.size(); ++guard) {
    rightmost = *right_[rightmost];
  }
  std::vector<std::size_t> out{rightmost};
  for (std::size_t guard = 0; left_[out.back()] && guard < lanes_.size(); ++guard) {
    const auto next = *left_[out.back()];
    if (std::find(out.begin(), out.end(), next) != out.end()) break;
    out.push_back(next);
  }
  return out;
}

std::size_t RoadNetwork::max_segment_width() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i < lanes_.size(); ++i) best = std::max(best, segment_lanes(i).size());
  return best;
}

RoadNetwork network_from_json(const std::string& text, const std::string& source) {
  using detail::ojson;
  const ojson root = detail::parse_json(text, source);
  const auto& lanes_json = detail::member(root, "lanes", source);
  if (!lanes_json.is_array()) throw ParseError(fmt::format("{}: 'lanes' must be an array", source));

  auto string_list = [&](const ojson& arr, const std::string& where) {
    if (!arr.is_array()) throw ParseError(fmt::format("{}: expected an array of lane ids", where));
    std::vector<std::string> out;
    for (const auto& v : arr) {
      if (!v.is_string()) throw ParseError(fmt::format("{}: lane ids must be strings", where));
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  auto optional_ref = [&](const ojson& obj, const char* key, const std::string& where) {
    std::optional<std::string> out;
    if (obj.contains(key) && !obj.at(key).is_null()) {
      if (!obj.at(key).is_string()) throw ParseError(fmt::format("{}: '{}' must be a lane id", where, key));
      out = obj.at(key).get<std::string>();
    }
    return out;
  };

  std::vector<Lane> lanes;
  for (std::size_t i = 0; i < lanes_json.size(); ++i) {
    const auto& lj = lanes_json[i];
    std::string where = fmt::format("{}: lane #{}", source, i);
    Lane lane;
    lane.id = detail::string(lj, "id", where);
    where = fmt::format("{}: lane '{}'", source, lane.id);
    const auto& pts = detail::member(lj, "centerline", where);
    if (!pts.is_array()) throw ParseError(fmt::format("{}: centerline must be an array", where));
    for (const auto& p : pts) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ParseError(fmt::format("{}: centerline points must be [x, y]", where));
      }
      lane.centerline.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    lane.width = detail::number(lj, "width", where);
    if (lj.contains("successors")) lane.successors = string_list(lj.at("successors"), where);
    lane.left = optional_ref(lj, "left", where);
    lane.right = optional_ref(lj, "right", where);
    lanes.push_back(std::move(lane));
  }
  auto sources = string_list(detail::member(root, "sources", source), source + ": sources");
  auto sinks = string_list(detail::member(root, "sinks", source), source + ": sinks");
  try {
    return RoadNetwork::build(std::move(lanes), std::move(sources), std::move(sinks));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", source, e.what()));
  }
}

RoadNetwork load_network(const std::filesystem::path& path) {
  return network_from_json(detail::read_text_file(path), path.string());
}

std::string network_to_json(const RoadNetwork& net) {
  using detail::ojson;
  ojson root = ojson::object();
  ojson lanes = ojson::array();
  for (const auto& lane : net.lanes()) {
    ojson pts = ojson::array();
    for (const auto& p : lane.centerline) pts.push_back({p.x, p.y});
    ojson lj = {{"id", lane.id}, {"centerline", pts}, {"width", lane.width},
                {"successors", lane.successors}};
    lj["left"] = lane.left ? ojson(*lane.left) : ojson(nullptr);
    lj["right"] = lane.right ? ojson(*lane.right) : ojson(nullptr);
    lanes.push_back(std::move(lj));
  }
  root["lanes"] = std::move(lanes);
  ojson sources = ojson::array();
  for (auto i : net.sources()) sources.push_back(net.lane(i).id);
  ojson sinks = ojson::array();
  for (auto i : net.sinks()) sinks.push_back(net.lane(i).id);
  root["sources"] = std::move(sources);
  root["sinks"] = std::move(sinks);
  return root.dump(2) + "\n";
}

Pose road_to_global(const RoadNetwork& net, const RoadCoord& rc) {
  if (rc.lane >= net.lane_count()) throw InputDomainError("road_to_global: unknown lane index");
  const auto& lane = net.lane(rc.lane);
  if (!std::isfinite(rc.s) || !std::isfinite(rc.d) || rc.s < 0.0 || rc.s > lane.length()) {
    throw InputDomainError(fmt::format("road_to_global: s={} outside lane '{}' [0, {}]", rc.s,
                                       lane.id, lane.length()));
  }
  const auto f = segment(lane, segment_at(lane, rc.s));
  const double along = rc.s - lane.cumulative[segment_at(lane, rc.s)];
  return {f.start.x + f.ux * along - f.uy * rc.d, f.start.y + f.uy * along + f.ux * rc.d,
          std::atan2(f.uy, f.ux)};
}

LaneProjection project_onto_lane(const Lane& lane, double x, double y) {
  LaneProjection best;
  double best_dist2 = std::numeric_limits<double>::infinity();
  const std::size_t n_seg = lane.centerline.size() - 1;
  for (std::size_t j = 0; j < n_seg; ++j) {
    const auto f = segment(lane, j);
    const double px = x - f.start.x;
    const double py = y - f.start.y;
    const double raw_t = px * f.ux + py * f.uy;
    const double t = std::clamp(raw_t, 0.0, f.length);
    const double cross = f.ux * py - f.uy * px;
    double dist2;
    double d;
    if (t == raw_t) {
      d = cross;
      dist2 = cross * cross;
    } else {
      const double ex = px - f.ux * t;
      const double ey = py - f.uy * t;
      dist2 = ex * ex + ey * ey;
      d = std::copysign(std::sqrt(dist2), cross);
    }
    if (dist2 < best_dist2) {
      best_dist2 = dist2;
      best.s = lane.cumulative[j] + t;
      best.d = d;
      best.within_extent = !((j == 0 && raw_t < 0.0) || (j + 1 == n_seg && raw_t > f.length));
    }
  }
  return best;
}

std::optional<RoadCoord> global_to_road(const RoadNetwork& net, double x, double y,
                                        double tolerance) {
  std::optional<RoadCoord> best;
  double best_abs_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.lane_count(); ++i) {
    const auto& lane = net.lane(i);
    const auto proj = project_onto_lane(lane, x, y);
    if (!proj.within_extent) continue;
    const double abs_d = std::abs(proj.d);
    if (abs_d <= 0.5 * lane.width + tolerance && abs_d < best_abs_d) {
      best_abs_d = abs_d;
      best = RoadCoord{i, proj.s, proj.d};
    }
  }
  return best;
}

bool is_off_road(const RoadNetwork& net, double x, double y) {
  return !global_to_road(net, x, y, 0.0).has_value();
}

}  // namespace idmgym
