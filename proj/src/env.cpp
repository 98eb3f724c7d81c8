#include "idmgym/env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "idmgym/errors.hpp"
#include "json_util.hpp"

namespace idmgym {

namespace {

// How far ahead along a route background vehicles and the observation look.
constexpr double kLookahead = 1000.0;

}  // namespace

std::string_view to_string(Cause cause) noexcept {
  switch (cause) {
    case Cause::running: return "running";
    case Cause::collision: return "collision";
    case Cause::off_road: return "off_road";
    case Cause::max_steps: return "max_steps";
    case Cause::protocol_error: return "protocol_error";
  }
  return "running";
}

Environment::Environment(Scenario scenario) : scenario_(std::move(scenario)) {
  scenario_.validate();
  const auto& net = scenario_.network;
  rows_ = 2 * net.max_segment_width();

  for (const auto& id : scenario_.ego.route) ego_route_.push_back(net.index_of(id));
  predecessors_.resize(net.lane_count());
  for (std::size_t i = 0; i < net.lane_count(); ++i) {
    for (auto j : net.successors(i)) predecessors_[j].push_back(i);
  }

  const auto& vehicles = scenario_.demand.vehicles;
  for (const auto& v : vehicles) {
    std::vector<std::size_t> route;
    for (const auto& id : scenario_.demand.find_route(v.route)->lanes) route.push_back(net.index_of(id));
    if (v.depart_pos && *v.depart_pos > net.lane(route.front()).length()) {
      throw ValidationError(fmt::format("vehicle '{}': depart_pos beyond its first lane", v.id));
    }
    demand_routes_.push_back(std::move(route));
  }
  departure_order_.resize(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) departure_order_[i] = i;
  std::stable_sort(departure_order_.begin(), departure_order_.end(),
                   [&](std::size_t a, std::size_t b) { return vehicles[a].depart < vehicles[b].depart; });
}

Observation Environment::reset() {
  const auto& spawn = scenario_.ego;
  ego_ = EgoState{scenario_.network.index_of(spawn.lane), spawn.s, 0.0, spawn.speed, 0.0, spawn.length,
                  spawn.width};
  ego_off_road_ = false;
  active_.clear();
  waiting_.clear();
  next_departure_ = 0;
  logged_pairs_.clear();
  collisions_.clear();
  step_ = 0;
  cause_ = Cause::running;
  is_reset_ = true;
  spawn_pending();
  if (trace_) *trace_ << "step,id,x,y,heading,v\n";
  return build_observation();
}

void Environment::terminate(Cause cause) {
  if (cause == Cause::running) throw UsageError("terminate: cause must not be running");
  cause_ = cause;
}

std::optional<std::size_t> Environment::next_lane(std::size_t lane) const {
  const auto it = std::find(ego_route_.begin(), ego_route_.end(), lane);
  if (it != ego_route_.end() && it + 1 != ego_route_.end()) return *(it + 1);
  const auto& succ = scenario_.network.successors(lane);
  if (succ.empty()) return std::nullopt;
  return succ.front();
}

Pose Environment::lane_pose(std::size_t lane, double s, double d) const {
  const auto& net = scenario_.network;
  const double len = net.lane(lane).length();
  if (s >= 0.0 && s <= len) return road_to_global(net, {lane, s, d});
  // Past either end: extend the end segment in a straight line.
  const bool past_end = s > len;
  const auto anchor = road_to_global(net, {lane, past_end ? len : 0.0, 0.0});
  const double along = past_end ? s - len : s;
  const double c = std::cos(anchor.heading);
  const double sn = std::sin(anchor.heading);
  return {anchor.x + c * along - sn * d, anchor.y + sn * along + c * d, anchor.heading};
}

Pose Environment::ego_pose() const {
  auto pose = lane_pose(ego_.lane, ego_.s, ego_.d);
  pose.heading += std::atan2(ego_.vd, ego_.vs);
  return pose;
}

Pose Environment::vehicle_pose(const BackgroundVehicle& bv) const {
  return lane_pose(bv.lane(), bv.s, 0.0);
}

std::size_t Environment::ego_lane_slot() const {
  const auto lanes = scenario_.network.segment_lanes(ego_.lane);
  return static_cast<std::size_t>(std::find(lanes.begin(), lanes.end(), ego_.lane) - lanes.begin());
}

std::optional<Environment::Leader> Environment::find_leader(std::span<const std::size_t> route,
                                                            std::size_t pos, double s,
                                                            const BackgroundVehicle* self) const {
  const auto& net = scenario_.network;
  double offset = 0.0;
  for (std::size_t k = pos; k < route.size() && offset - s <= kLookahead; ++k) {
    const auto lane = route[k];
    std::optional<Leader> best;
    double best_front = kNoLeader;
    auto consider = [&](double front, double length, double v, const BackgroundVehicle* bv) {
      if (k == pos && !(front > s)) return;
      if (front + offset < best_front) {
        best_front = front + offset;
        best = Leader{(best_front - length) - s, v, bv};
      }
    };
    for (const auto& other : active_) {
      if (&other == self || other.lane() != lane) continue;
      consider(other.s, other.length, other.v, &other);
    }
    if (ego_.lane == lane) consider(ego_.s, ego_.length, ego_.vs, nullptr);
    if (best) return best;
    offset += net.lane(lane).length();
  }
  return std::nullopt;
}

double Environment::bv_acceleration(const BackgroundVehicle& bv) const {
  const auto leader = find_leader(bv.route, bv.route_pos, bv.s, &bv);
  if (!leader) return idm_acceleration(bv.params, {bv.v, 0.0, kNoLeader});
  // Overlapping a leader: brake to a standstill within the step.
  if (!(leader->gap > 0.0)) return -bv.v / scenario_.config.dt;
  return idm_acceleration(bv.params, {bv.v, bv.v - leader->v, leader->gap});
}

void Environment::advance_ego(const Action& action) {
  const auto& net = scenario_.network;
  const double dt = scenario_.config.dt;
  const auto lon = euler_step({ego_.s, ego_.vs}, action.a_long, dt);
  ego_.s = lon.s;
  ego_.vs = lon.v;
  ego_.d += ego_.vd * dt;
  ego_.vd += action.a_lat * dt;

  bool past_end = false;
  while (ego_.s > net.lane(ego_.lane).length()) {
    const auto next = next_lane(ego_.lane);
    if (!next) {
      past_end = true;
      break;
    }
    ego_.s -= net.lane(ego_.lane).length();
    ego_.lane = *next;
  }

  const auto pose = lane_pose(ego_.lane, ego_.s, ego_.d);
  ego_off_road_ = is_off_road(net, pose.x, pose.y);
  if (ego_off_road_) return;

  if (past_end) {
    // Ran off the end of its lane onto some other lane.
    const auto rc = global_to_road(net, pose.x, pose.y, 0.0);
    ego_.lane = rc->lane;
    ego_.s = rc->s;
    ego_.d = rc->d;
    return;
  }
  // Re-anchor to a neighboring lane once the ego is closer to its centerline.
  double best = std::abs(ego_.d);
  for (auto lane : net.segment_lanes(ego_.lane)) {
    if (lane == ego_.lane) continue;
    const auto proj = project_onto_lane(net.lane(lane), pose.x, pose.y);
    if (proj.within_extent && std::abs(proj.d) < best) {
      best = std::abs(proj.d);
      ego_.lane = lane;
      ego_.s = proj.s;
      ego_.d = proj.d;
    }
  }
}

void Environment::advance_background(std::span<const double> accels) {
  const auto& net = scenario_.network;
  const double dt = scenario_.config.dt;
  std::vector<BackgroundVehicle> kept;
  kept.reserve(active_.size());
  for (std::size_t i = 0; i < active_.size(); ++i) {
    auto bv = std::move(active_[i]);
    const auto next = euler_step({bv.s, bv.v}, accels[i], dt);
    bv.s = next.s;
    bv.v = next.v;
    bool arrived = false;
    while (bv.s > net.lane(bv.lane()).length()) {
      if (bv.route_pos + 1 >= bv.route.size()) {
        arrived = true;
        break;
      }
      bv.s -= net.lane(bv.lane()).length();
      ++bv.route_pos;
    }
    if (!arrived) kept.push_back(std::move(bv));
  }
  active_ = std::move(kept);
}

bool Environment::try_insert(std::size_t index) {
  const auto& spec = scenario_.demand.vehicles[index];
  const auto& route = demand_routes_[index];
  const double s = spec.depart_pos.value_or(spec.length);
  const auto lane = route.front();

  // Anything whose front is inside the new vehicle's body blocks insertion.
  auto overlaps = [&](double front) { return front <= s && front > s - spec.length; };
  for (const auto& other : active_) {
    if (other.lane() == lane && overlaps(other.s)) return false;
  }
  if (ego_.lane == lane && overlaps(ego_.s)) return false;

  const auto leader = find_leader(route, 0, s, nullptr);
  double v = 0.0;
  if (spec.depart_pos || spec.depart_speed) {
    if (leader && !(leader->gap > 0.0)) return false;
    v = spec.depart_speed.value_or(leader ? std::min(spec.params.v_des, leader->v) : spec.params.v_des);
  } else if (!leader) {
    v = spec.params.v_des;
  } else {
    const double v_ins = std::min(spec.params.v_des, leader->v);
    if (leader->gap >= desired_gap(spec.params, v_ins, v_ins - leader->v)) {
      v = v_ins;
    } else if (leader->gap >= spec.params.d_min) {
      v = 0.0;
    } else {
      return false;
    }
  }
  active_.push_back(BackgroundVehicle{spec.id, spec.params, spec.length, kDefaultVehicleWidth, route, 0, s, v});
  return true;
}

void Environment::spawn_pending() {
  const auto& vehicles = scenario_.demand.vehicles;
  const double t = time();
  while (next_departure_ < departure_order_.size() &&
         vehicles[departure_order_[next_departure_]].depart <= t) {
    waiting_.push_back(departure_order_[next_departure_++]);
  }
  // Vehicles queue per start lane: a blocked one holds back later ones.
  std::vector<std::size_t> blocked_lanes;
  std::vector<std::size_t> still_waiting;
  for (auto index : waiting_) {
    const auto lane = demand_routes_[index].front();
    const bool lane_blocked = std::find(blocked_lanes.begin(), blocked_lanes.end(), lane) != blocked_lanes.end();
    if (lane_blocked || !try_insert(index)) {
      still_waiting.push_back(index);
      if (!lane_blocked) blocked_lanes.push_back(lane);
    }
  }
  waiting_ = std::move(still_waiting);
}

void Environment::log_background_collisions() {
  for (const auto& bv : active_) {
    const auto leader = find_leader(bv.route, bv.route_pos, bv.s, &bv);
    if (!leader || !leader->bv || leader->gap > 0.0) continue;
    if (logged_pairs_.emplace(bv.id, leader->bv->id).second) {
      collisions_.push_back({step_, bv.id, leader->bv->id});
    }
  }
}

bool Environment::check_collision() const {
  const auto pose = lane_pose(ego_.lane, ego_.s, ego_.d);
  const double c = std::cos(pose.heading);
  const double sn = std::sin(pose.heading);
  for (const auto& bv : active_) {
    const auto p = vehicle_pose(bv);
    const double dx = p.x - pose.x;
    const double dy = p.y - pose.y;
    const double lon = c * dx + sn * dy;
    const double lat = -sn * dx + c * dy;
    const double gap = lon >= 0.0 ? lon - bv.length : -lon - ego_.length;
    if (gap <= 0.0 && std::abs(lat) <= 0.5 * (ego_.width + bv.width)) return true;
  }
  return false;
}

Observation Environment::build_observation() const {
  const auto& net = scenario_.network;
  Observation obs;
  obs.rows = rows_;
  obs.values.assign(rows_ * Observation::kFeatures, 0.0);
  const auto ego_xy = lane_pose(ego_.lane, ego_.s, ego_.d);
  const auto lanes = net.segment_lanes(ego_.lane);

  for (std::size_t slot = 0; slot < lanes.size() && 2 * slot + 1 < rows_; ++slot) {
    const auto lane = lanes[slot];
    double s_ego = ego_.s;
    double lane_d = 0.0;
    if (lane != ego_.lane) {
      s_ego = project_onto_lane(net.lane(lane), ego_xy.x, ego_xy.y).s;
      const auto on_lane = road_to_global(net, {lane, s_ego, 0.0});
      lane_d = project_onto_lane(net.lane(ego_.lane), on_lane.x, on_lane.y).d;
    }

    const BackgroundVehicle* ahead = nullptr;
    double ahead_dx = kNoLeader;
    double offset = 0.0;
    std::optional<std::size_t> cur = lane;
    for (std::size_t hops = 0; cur && !ahead && offset - s_ego <= kLookahead && hops < net.lane_count(); ++hops) {
      for (const auto& bv : active_) {
        if (bv.lane() != *cur) continue;
        const double dx = bv.s + offset - s_ego;
        if (dx >= 0.0 && dx < ahead_dx) {
          ahead_dx = dx;
          ahead = &bv;
        }
      }
      offset += net.lane(*cur).length();
      cur = next_lane(*cur);
    }

    const BackgroundVehicle* behind = nullptr;
    double behind_dx = -kNoLeader;
    auto scan_behind = [&](std::size_t l, double off) {
      for (const auto& bv : active_) {
        if (bv.lane() != l) continue;
        const double dx = bv.s + off - s_ego;
        if (dx < 0.0 && dx > behind_dx) {
          behind_dx = dx;
          behind = &bv;
        }
      }
    };
    scan_behind(lane, 0.0);
    if (!behind) {
      for (auto pred : predecessors_[lane]) scan_behind(pred, -net.lane(pred).length());
    }

    auto fill = [&](std::size_t row, const BackgroundVehicle* bv, double dx) {
      if (!bv) return;
      double* r = obs.values.data() + row * Observation::kFeatures;
      r[0] = 1.0;
      r[1] = dx;
      r[2] = lane_d - ego_.d;
      r[3] = bv->v - ego_.vs;
      r[4] = -ego_.vd;
    };
    fill(2 * slot, ahead, ahead_dx);
    fill(2 * slot + 1, behind, behind_dx);
  }
  return obs;
}

void Environment::render_frame() {
  if (!trace_) return;
  const auto pose = ego_pose();
  *trace_ << fmt::format("{},ego,{},{},{},{}\n", step_, pose.x, pose.y, pose.heading,
                         std::hypot(ego_.vs, ego_.vd));
  for (const auto& bv : active_) {
    const auto p = vehicle_pose(bv);
    *trace_ << fmt::format("{},{},{},{},{},{}\n", step_, bv.id, p.x, p.y, p.heading, bv.v);
  }
  if (!*trace_) throw IoError("trace sink write failed");
}

StepResult Environment::step(const Action& action) {
  if (!is_reset_) throw UsageError("step called before reset");
  if (terminated()) throw UsageError("step called after the episode terminated");
  if (!std::isfinite(action.a_long) || !std::isfinite(action.a_lat)) {
    throw InputDomainError("action accelerations must be finite");
  }

  // Synchronous update: every background vehicle reacts to the same snapshot.
  std::vector<double> accels;
  accels.reserve(active_.size());
  for (const auto& bv : active_) accels.push_back(bv_acceleration(bv));

  advance_ego(action);
  advance_background(accels);
  ++step_;
  spawn_pending();
  log_background_collisions();

  if (check_collision()) {
    cause_ = Cause::collision;
  } else if (ego_off_road_) {
    cause_ = Cause::off_road;
  } else if (step_ >= scenario_.config.max_steps) {
    cause_ = Cause::max_steps;
  }

  StepResult result;
  result.observation = build_observation();
  result.reward = reward_hook_ ? reward_hook_(*this, action) : 0.0;
  result.terminated = terminated();
  result.info = StepInfo{cause_, step_, ego_pose()};
  render_frame();
  return result;
}

std::string Environment::episode_summary_json() const {
  using detail::ojson;
  const auto pose = ego_pose();
  ojson root = ojson::object();
  root["cause"] = std::string(to_string(cause_));
  root["steps"] = step_;
  root["ego_final"] = {{"x", pose.x}, {"y", pose.y}, {"v", std::hypot(ego_.vs, ego_.vd)}};
  root["collisions_logged"] = collisions_.size();
  return root.dump(2) + "\n";
}

}  // namespace idmgym
