#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace idmgym {

/// The six Intelligent Driver Model parameters of one driver.
///
/// a_comf is a positive deceleration magnitude. All fields must be strictly
/// positive and finite; use validate() before trusting values from outside.
struct ParamSet {
  double a_max = 0.0;   ///< maximum acceleration [m/s^2]
  double a_comf = 0.0;  ///< comfortable deceleration [m/s^2]
  double v_des = 0.0;   ///< desired speed [m/s]
  double d_min = 0.0;   ///< minimum bumper-to-bumper gap [m]
  double T = 0.0;       ///< minimum time headway [s]
  double delta = 4.0;   ///< free-road acceleration exponent

  static constexpr std::size_t kSize = 6;
  static constexpr std::array<std::string_view, kSize> kNames = {
      "a_max", "a_comf", "v_des", "d_min", "T", "delta"};

  [[nodiscard]] std::array<double, kSize> to_array() const {
    return {a_max, a_comf, v_des, d_min, T, delta};
  }
  static ParamSet from_array(std::span<const double, kSize> v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }

  [[nodiscard]] bool is_valid() const noexcept;
  /// Throws InputDomainError naming the first offending field.
  void validate() const;

  /// Index of a parameter by name, or kSize when unknown.
  static std::size_t index_of(std::string_view name) noexcept;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Synthetic ground truth used for recovery experiments.
inline constexpr ParamSet kSyntheticTruth{3.0, 5.0, 35.0, 10.0, 2.0, 4.0};

/// Mean highway posterior from naturalistic data; the default background
/// vehicle prior and the built-in ego driver.
inline constexpr ParamSet kHighwayMeans{1.2, 2.0, 29.7, 63.9, 2.0, 4.0};

inline constexpr double kNoLeader = std::numeric_limits<double>::infinity();

/// Follower state relative to its leader. d_front is bumper-to-bumper;
/// kNoLeader encodes free road.
struct FollowingState {
  double v = 0.0;
  double delta_v = 0.0;  ///< v_ego - v_leader (positive when closing in)
  double d_front = kNoLeader;
};

/// Desired gap d_min + v*T + v*dv / (2 sqrt(a_max a_comf)). Unclamped.
double desired_gap(const ParamSet& p, double v, double delta_v);

/// IDM acceleration. The interaction term uses max(desired_gap, 0) and
/// vanishes exactly when there is no leader.
double idm_acceleration(const ParamSet& p, const FollowingState& s);

struct TrajectorySample {
  double t = 0.0;
  double v_ego = 0.0;
  double v_leader = 0.0;
  double gap = 0.0;
  double a_obs = 0.0;

  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

/// Uniformly sampled follower/leader record.
struct Trajectory {
  double dt = 0.1;
  std::vector<TrajectorySample> samples;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

  /// Checks dt > 0, finite fields, gap > 0 and uniform timestamps.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct RolloutResult {
  Trajectory trajectory;
  /// Set when the gap reached zero; the trajectory then holds the samples
  /// before the collapse.
  bool gap_collapsed = false;
};

/// Forward-Euler follower rollout behind a leader with the given speed
/// profile (one entry per step; the last entry is held if the profile is
/// shorter than n_steps).
///
/// Positions are tracked explicitly: the follower front starts at 0 and the
/// leader front at init.d_front + leader_length, and every step the gap is
/// recomputed as (leader_front - leader_length) - follower_front. The
/// environment advances background vehicles with the same arithmetic.
RolloutResult rollout_follower(const ParamSet& p, std::span<const double> leader_speeds,
                               const FollowingState& init, double dt, std::size_t n_steps,
                               double leader_length = 0.0);

/// One explicit Euler step of a longitudinal state. The speed is floored at 0.
struct Longitudinal {
  double s = 0.0;
  double v = 0.0;
};
inline Longitudinal euler_step(Longitudinal x, double accel, double dt) noexcept {
  const double v_next = x.v + accel * dt;
  return {x.s + x.v * dt, v_next > 0.0 ? v_next : 0.0};
}

/// RMSE between observed accelerations and one-step IDM predictions at the
/// observed states. Reference (scalar) implementation.
double rmse_objective(const Trajectory& obs, const ParamSet& p);

/// RMSE between observed accelerations and those of a full rollout driven
/// by the observed leader speeds from the first observed state. Returns
/// +inf if the rollout collapses.
double rollout_rmse_objective(const Trajectory& obs, const ParamSet& p);

// Trajectory CSV: header `t,v_ego,v_leader,gap,a_obs`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in, std::string_view source_name = "<stream>");
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace idmgym
