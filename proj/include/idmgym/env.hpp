#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "idmgym/model.hpp"
#include "idmgym/network.hpp"
#include "idmgym/scenario.hpp"

namespace idmgym {

/// V x 5 neighbor matrix, row-major. Columns: presence, x, y, vx, vy, all
/// relative to the ego in the road-aligned frame of its current lane.
struct Observation {
  static constexpr std::size_t kFeatures = 5;
  std::size_t rows = 0;
  std::vector<double> values;

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return values.at(r * kFeatures + c); }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * kFeatures, kFeatures);
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Ego accelerations in the road frame. Not clipped by the environment.
struct Action {
  double a_long = 0.0;
  double a_lat = 0.0;
};

enum class Cause { running, collision, off_road, max_steps, protocol_error };
std::string_view to_string(Cause cause) noexcept;

struct StepInfo {
  Cause cause = Cause::running;
  std::size_t step = 0;
  Pose ego_pose;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  StepInfo info;
};

/// Ego kinematics in the frame of its reference lane.
struct EgoState {
  std::size_t lane = 0;
  double s = 0.0;   ///< front bumper
  double d = 0.0;
  double vs = 0.0;  ///< never negative
  double vd = 0.0;
  double length = kDefaultVehicleLength;
  double width = kDefaultVehicleWidth;
};

struct BackgroundVehicle {
  std::string id;
  ParamSet params;
  double length = kDefaultVehicleLength;
  double width = kDefaultVehicleWidth;
  std::vector<std::size_t> route;  ///< lane indices
  std::size_t route_pos = 0;
  double s = 0.0;  ///< front bumper on route[route_pos]
  double v = 0.0;

  [[nodiscard]] std::size_t lane() const { return route[route_pos]; }
};

struct CollisionRecord {
  std::size_t step = 0;
  std::string follower;
  std::string leader;
};

/// Single-owner simulation state machine. Construct, reset, then step until
/// terminated. Two instances never share mutable state.
class Environment {
 public:
  using RewardHook = std::function<double(const Environment&, const Action&)>;

  explicit Environment(Scenario scenario);

  Observation reset();
  StepResult step(const Action& action);

  [[nodiscard]] Observation build_observation() const;
  /// Ego against every background vehicle.
  [[nodiscard]] bool check_collision() const;
  /// One `step,id,x,y,heading,v` line per vehicle to the trace sink.
  void render_frame();

  /// Trace output; the CSV header is written on every reset. Pass nullptr to
  /// disable tracing.
  void set_trace_sink(std::ostream* sink) { trace_ = sink; }
  /// Replaces the default reward of 0.
  void set_reward_hook(RewardHook hook) { reward_hook_ = std::move(hook); }

  [[nodiscard]] const Scenario& scenario() const noexcept { return scenario_; }
  [[nodiscard]] std::size_t observation_rows() const noexcept { return rows_; }
  [[nodiscard]] const EgoState& ego() const noexcept { return ego_; }
  [[nodiscard]] Pose ego_pose() const;
  /// Position of the ego's lane within its segment (0 = rightmost).
  [[nodiscard]] std::size_t ego_lane_slot() const;
  [[nodiscard]] const std::vector<BackgroundVehicle>& vehicles() const noexcept { return active_; }
  [[nodiscard]] Pose vehicle_pose(const BackgroundVehicle& bv) const;
  [[nodiscard]] std::size_t step_index() const noexcept { return step_; }
  [[nodiscard]] double time() const noexcept { return static_cast<double>(step_) * scenario_.config.dt; }
  [[nodiscard]] bool terminated() const noexcept { return cause_ != Cause::running; }
  [[nodiscard]] Cause cause() const noexcept { return cause_; }
  [[nodiscard]] const std::vector<CollisionRecord>& collisions() const noexcept { return collisions_; }

  /// Marks the episode finished for a reason found outside the environment
  /// (e.g. a misbehaving external policy).
  void terminate(Cause cause);

  /// {cause, steps, ego_final:{x,y,v}, collisions_logged}
  [[nodiscard]] std::string episode_summary_json() const;

 private:
  struct Leader {
    double gap = kNoLeader;
    double v = 0.0;
    const BackgroundVehicle* bv = nullptr;  ///< null when the leader is the ego
  };

  [[nodiscard]] std::optional<std::size_t> next_lane(std::size_t lane) const;
  [[nodiscard]] std::optional<Leader> find_leader(std::span<const std::size_t> route, std::size_t pos,
                                                  double s, const BackgroundVehicle* self) const;
  [[nodiscard]] double bv_acceleration(const BackgroundVehicle& bv) const;
  [[nodiscard]] Pose lane_pose(std::size_t lane, double s, double d) const;
  void advance_ego(const Action& action);
  void advance_background(std::span<const double> accels);
  void spawn_pending();
  bool try_insert(std::size_t demand_index);
  void log_background_collisions();

  Scenario scenario_;
  std::size_t rows_ = 0;
  std::vector<std::size_t> ego_route_;
  std::vector<std::vector<std::size_t>> predecessors_;
  std::vector<std::vector<std::size_t>> demand_routes_;  ///< per demand vehicle
  std::vector<std::size_t> departure_order_;

  EgoState ego_;
  bool ego_off_road_ = false;
  std::vector<BackgroundVehicle> active_;
  std::vector<std::size_t> waiting_;  ///< demand indices due but not yet inserted
  std::size_t next_departure_ = 0;
  std::set<std::pair<std::string, std::string>> logged_pairs_;
  std::vector<CollisionRecord> collisions_;
  std::size_t step_ = 0;
  Cause cause_ = Cause::running;
  bool is_reset_ = false;

  std::ostream* trace_ = nullptr;
  RewardHook reward_hook_;
};

}  // namespace idmgym
