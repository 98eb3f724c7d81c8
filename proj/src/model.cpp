#include "idmgym/model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "idmgym/errors.hpp"

namespace idmgym {

bool ParamSet::is_valid() const noexcept {
  for (double x : to_array()) {
    if (!std::isfinite(x) || x <= 0.0) return false;
  }
  return true;
}

void ParamSet::validate() const {
  const auto values = to_array();
  for (std::size_t i = 0; i < kSize; ++i) {
    if (!std::isfinite(values[i]) || values[i] <= 0.0) {
      throw InputDomainError(
          fmt::format("parameter {} must be finite and > 0 (got {})", kNames[i], values[i]));
    }
  }
}

std::size_t ParamSet::index_of(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kSize; ++i) {
    if (kNames[i] == name) return i;
  }
  return kSize;
}

double desired_gap(const ParamSet& p, double v, double delta_v) {
  if (!std::isfinite(v) || !std::isfinite(delta_v)) {
    throw InputDomainError(fmt::format("desired_gap: non-finite state v={} dv={}", v, delta_v));
  }
  p.validate();
  if (v < 0.0) throw InputDomainError(fmt::format("desired_gap: negative speed {}", v));
  return p.d_min + v * p.T + v * delta_v / (2.0 * std::sqrt(p.a_max * p.a_comf));
}

double idm_acceleration(const ParamSet& p, const FollowingState& s) {
  if (std::isnan(s.d_front) || (std::isinf(s.d_front) && s.d_front < 0.0)) {
    throw InputDomainError(fmt::format("idm_acceleration: invalid gap {}", s.d_front));
  }
  if (s.d_front <= 0.0) {
    throw SingularGapError(fmt::format("idm_acceleration: gap {} <= 0", s.d_front));
  }
  const double d_des = std::max(desired_gap(p, s.v, s.delta_v), 0.0);
  const double free_term = std::pow(s.v / p.v_des, p.delta);
  // d_des / inf == 0, so the free-road case needs no branch.
  const double ratio = d_des / s.d_front;
  return p.a_max * (1.0 - free_term - ratio * ratio);
}

void Trajectory::validate() const {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw InputDomainError(fmt::format("trajectory dt must be > 0 (got {})", dt));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.v_ego) || !std::isfinite(s.v_leader) ||
        !std::isfinite(s.gap) || !std::isfinite(s.a_obs)) {
      throw InputDomainError(fmt::format("trajectory sample {} has a non-finite field", i));
    }
    if (s.v_ego < 0.0) {
      throw InputDomainError(fmt::format("trajectory sample {}: negative ego speed", i));
    }
    if (s.gap <= 0.0) {
      throw InputDomainError(fmt::format("trajectory sample {}: gap {} <= 0", i, s.gap));
    }
    if (i > 0) {
      const double step = s.t - samples[i - 1].t;
      // Timestamps come from text, so allow a relative rounding slack.
      if (std::abs(step - dt) > 1e-6 * std::max(1.0, std::abs(s.t))) {
        throw InputDomainError(
            fmt::format("trajectory sample {}: spacing {} differs from dt {}", i, step, dt));
      }
    }
  }
}

RolloutResult rollout_follower(const ParamSet& p, std::span<const double> leader_speeds,
                               const FollowingState& init, double dt, std::size_t n_steps,
                               double leader_length) {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw InputDomainError(fmt::format("rollout_follower: dt must be > 0 (got {})", dt));
  }
  if (n_steps == 0) throw InputDomainError("rollout_follower: n_steps must be >= 1");
  if (leader_speeds.empty()) throw InputDomainError("rollout_follower: empty leader profile");
  if (!std::isfinite(init.v) || init.v < 0.0) {
    throw InputDomainError(fmt::format("rollout_follower: invalid initial speed {}", init.v));
  }
  if (!std::isfinite(init.d_front) || init.d_front <= 0.0) {
    throw InputDomainError(fmt::format("rollout_follower: invalid initial gap {}", init.d_front));
  }
  if (!std::isfinite(leader_length) || leader_length < 0.0) {
    throw InputDomainError("rollout_follower: leader_length must be >= 0");
  }
  p.validate();

  RolloutResult out;
  out.trajectory.dt = dt;
  out.trajectory.samples.reserve(n_steps);

  Longitudinal follower{0.0, init.v};
  double leader_front = init.d_front + leader_length;
  double gap = init.d_front;

  for (std::size_t k = 0; k < n_steps; ++k) {
    if (gap <= 0.0) {
      out.gap_collapsed = true;
      break;
    }
    const double v_lead = leader_speeds[std::min(k, leader_speeds.size() - 1)];
    const double a = idm_acceleration(p, {follower.v, follower.v - v_lead, gap});
    out.trajectory.samples.push_back(
        {static_cast<double>(k) * dt, follower.v, v_lead, gap, a});

    follower = euler_step(follower, a, dt);
    leader_front += v_lead * dt;
    gap = (leader_front - leader_length) - follower.s;
  }
  return out;
}

double rmse_objective(const Trajectory& obs, const ParamSet& p) {
  if (obs.empty()) throw InputDomainError("rmse_objective: empty trajectory");
  double sum_sq = 0.0;
  for (const auto& s : obs.samples) {
    const double r = idm_acceleration(p, {s.v_ego, s.v_ego - s.v_leader, s.gap}) - s.a_obs;
    sum_sq += r * r;
  }
  return std::sqrt(sum_sq / static_cast<double>(obs.size()));
}

double rollout_rmse_objective(const Trajectory& obs, const ParamSet& p) {
  if (obs.empty()) throw InputDomainError("rollout_rmse_objective: empty trajectory");
  std::vector<double> leader(obs.size());
  std::transform(obs.samples.begin(), obs.samples.end(), leader.begin(),
                 [](const TrajectorySample& s) { return s.v_leader; });
  const auto& first = obs.samples.front();
  const auto sim = rollout_follower(p, leader, {first.v_ego, first.v_ego - first.v_leader, first.gap},
                                    obs.dt, obs.size());
  if (sim.gap_collapsed) return std::numeric_limits<double>::infinity();
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double r = sim.trajectory.samples[i].a_obs - obs.samples[i].a_obs;
    sum_sq += r * r;
  }
  return std::sqrt(sum_sq / static_cast<double>(obs.size()));
}

}  // namespace idmgym
