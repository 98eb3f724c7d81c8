#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "commands.hpp"
#include "idmgym/env.hpp"
#include "idmgym/errors.hpp"
#include "test_support.hpp"

namespace idmgym {
namespace {

using testing::data_dir;
using testing::fixture;
using testing::lane_routes;
using testing::make_test_scenario;
using testing::placed_vehicle;
using testing::straight_road;

EgoSpawn ego_at(const std::string& lane, double s, double speed) {
  EgoSpawn e;
  e.lane = lane;
  e.s = s;
  e.speed = speed;
  return e;
}

int manifest_rows(const std::string& network) {
  std::ifstream in(fixture("manifest.json"));
  return nlohmann::json::parse(in).at(network).at("observation_rows").get<int>();
}

void expect_well_formed(const Observation& obs, std::size_t rows) {
  ASSERT_EQ(obs.rows, rows);
  ASSERT_EQ(obs.values.size(), rows * Observation::kFeatures);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = obs.row(r);
    if (row[0] == 0.0) {
      for (double v : row) EXPECT_EQ(v, 0.0) << "row " << r;
    } else {
      EXPECT_EQ(row[0], 1.0);
    }
  }
}

TEST(EnvInit, RowsFollowSegmentWidth) {
  const Environment highway(load_scenario(data_dir() / "scenarios" / "highway_straight.json"));
  EXPECT_EQ(highway.observation_rows(), 6u);
  EXPECT_EQ(static_cast<int>(highway.observation_rows()), manifest_rows("highway_straight"));
  const Environment urban(load_scenario(data_dir() / "scenarios" / "urban_light.json"));
  EXPECT_EQ(static_cast<int>(urban.observation_rows()), manifest_rows("urban_grid"));
}

TEST(EnvInit, HandlesAreIndependent) {
  const auto sc = load_scenario(data_dir() / "scenarios" / "highway_straight.json");
  Environment a(sc), b(sc);
  a.reset();
  b.reset();
  for (int i = 0; i < 20; ++i) a.step({1.0, 0.0});
  EXPECT_EQ(a.step_index(), 20u);
  EXPECT_EQ(b.step_index(), 0u);
  EXPECT_EQ(b.ego().s, sc.ego.s);
}

TEST(EnvReset, Reproducible) {
  Environment env(load_scenario(data_dir() / "scenarios" / "urban_dense.json"));
  const auto first = env.reset();
  for (int i = 0; i < 50; ++i) env.step({0.5, 0.0});
  EXPECT_EQ(env.reset(), first);
  EXPECT_EQ(env.step_index(), 0u);
}

TEST(EnvReset, EmptyDemandAllZero) {
  Environment env(make_test_scenario(straight_road(3), {}, ego_at("L1", 50.0, 10.0)));
  const auto obs = env.reset();
  EXPECT_EQ(obs.rows, 6u);
  for (double v : obs.values) EXPECT_EQ(v, 0.0);
}

TEST(EnvReset, LeaderFiftyMetresAhead) {
  const auto net = straight_road(1);
  auto demand = lane_routes(net);
  demand.vehicles.push_back(placed_vehicle("lead", "r_L0", 100.0, 25.0));
  Environment env(make_test_scenario(net, demand, ego_at("L0", 50.0, 0.0)));
  const auto obs = env.reset();
  ASSERT_EQ(obs.rows, 2u);
  EXPECT_EQ(obs.at(0, 0), 1.0);
  EXPECT_NEAR(obs.at(0, 1), 50.0, 1e-12);
  EXPECT_NEAR(obs.at(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(obs.at(0, 3), 25.0, 1e-12);
  EXPECT_EQ(obs.at(0, 4), 0.0);
  EXPECT_EQ(obs.at(1, 0), 0.0);
}

TEST(EnvStep, BallisticEgo) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 12.0)));
  env.reset();
  const auto r = env.step({0.0, 0.0});
  EXPECT_FALSE(r.terminated);
  EXPECT_EQ(r.info.cause, Cause::running);
  EXPECT_NEAR(env.ego().s, 50.0 + 12.0 * 0.1, 1e-12);
  EXPECT_NEAR(r.info.ego_pose.x, 51.2, 1e-12);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(EnvStep, OffRoadFiresAtThreshold) {
  constexpr double dt = 0.1, a_lat = 0.7, half_width = 1.75;
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 10.0), 5000, dt));
  env.reset();
  // Hand-stepped lateral kinematics.
  double d = 0.0, vd = 0.0;
  std::size_t expected = 0;
  for (std::size_t k = 1; expected == 0; ++k) {
    d += vd * dt;
    vd += a_lat * dt;
    if (d > half_width) expected = k;
  }
  StepResult r;
  do {
    r = env.step({0.0, a_lat});
  } while (!r.terminated);
  EXPECT_EQ(r.info.cause, Cause::off_road);
  EXPECT_EQ(r.info.step, expected);
  EXPECT_TRUE(is_off_road(env.scenario().network, r.info.ego_pose.x, r.info.ego_pose.y));
}

TEST(EnvStep, CollisionFiresAtFirstNonPositiveGap) {
  const auto net = straight_road(1);
  auto demand = lane_routes(net);
  ParamSet slow = kHighwayMeans;
  slow.v_des = 2.0;
  demand.vehicles.push_back(placed_vehicle("slow", "r_L0", 120.0, 0.0, slow));
  Environment env(make_test_scenario(net, demand, ego_at("L0", 50.0, 5.0)));
  env.reset();
  double prev_gap = 0.0;
  StepResult r;
  for (;;) {
    const auto& bv = env.vehicles().front();
    prev_gap = (bv.s - bv.length) - env.ego().s;
    r = env.step({2.0, 0.0});
    if (r.terminated) break;
  }
  ASSERT_EQ(r.info.cause, Cause::collision);
  const auto& bv = env.vehicles().front();
  const double gap = (bv.s - bv.length) - env.ego().s;
  EXPECT_LE(gap, 0.0);
  EXPECT_GT(prev_gap, 0.0);
}

TEST(EnvCollision, PositiveGapSameLaneIsSafe) {
  const auto net = straight_road(1);
  auto demand = lane_routes(net);
  demand.vehicles.push_back(placed_vehicle("bv", "r_L0", 55.01, 10.0));
  Environment env(make_test_scenario(net, demand, ego_at("L0", 50.0, 10.0)));
  env.reset();
  ASSERT_EQ(env.vehicles().size(), 1u);
  EXPECT_FALSE(env.check_collision());
}

TEST(EnvCollision, AdjacentLaneOverlapIsSafe) {
  const auto net = straight_road(2);
  auto demand = lane_routes(net);
  demand.vehicles.push_back(placed_vehicle("bv", "r_L0", 52.0, 10.0));
  Environment env(make_test_scenario(net, demand, ego_at("L1", 50.0, 10.0)));
  env.reset();
  ASSERT_EQ(env.vehicles().size(), 1u);
  EXPECT_FALSE(env.check_collision());
}

TEST(EnvCollision, LateralThreshold) {
  // BV overlaps the ego by 0.1 m longitudinally one lane to the right; the
  // ego drifts right until the centres are within (1.8 + 1.8) / 2.
  constexpr double dt = 0.1, a_lat = -0.4, lane_gap = 3.5, threshold = 1.8;
  const auto net = straight_road(2, 5000.0, lane_gap);
  auto demand = lane_routes(net);
  ParamSet cruise = kHighwayMeans;
  cruise.v_des = 10.0;  // cruises at exactly 10 m/s with zero acceleration
  demand.vehicles.push_back(placed_vehicle("bv", "r_L0", 54.9, 10.0, cruise));
  Environment env(make_test_scenario(net, demand, ego_at("L1", 50.0, 10.0)));
  env.reset();
  double d = 0.0, vd = 0.0;
  std::size_t expected = 0;
  for (std::size_t k = 1; expected == 0; ++k) {
    d += vd * dt;
    vd += a_lat * dt;
    const double lat = lane_gap + d;
    ASSERT_GT(std::abs(lat - threshold), 1e-9);
    if (std::abs(lat) <= threshold) expected = k;
  }
  StepResult r;
  do {
    r = env.step({0.0, a_lat});
  } while (!r.terminated);
  EXPECT_EQ(r.info.cause, Cause::collision);
  EXPECT_EQ(r.info.step, expected);
}

TEST(EnvCollision, LateralThresholdNotReachedWithPositiveGap) {
  const auto net = straight_road(2);
  auto demand = lane_routes(net);
  ParamSet cruise = kHighwayMeans;
  cruise.v_des = 10.0;
  demand.vehicles.push_back(placed_vehicle("bv", "r_L0", 55.01, 10.0, cruise));
  Environment env(make_test_scenario(net, demand, ego_at("L1", 50.0, 10.0)));
  env.reset();
  StepResult r;
  do {
    r = env.step({0.0, -0.4});
  } while (!r.terminated);
  EXPECT_EQ(r.info.cause, Cause::off_road);
}

TEST(EnvObservation, NearestOfTwoLeaders) {
  const auto net = straight_road(2);
  auto demand = lane_routes(net);
  demand.vehicles.push_back(placed_vehicle("far", "r_L0", 200.0, 20.0));
  demand.vehicles.push_back(placed_vehicle("near", "r_L0", 90.0, 15.0));
  demand.vehicles.push_back(placed_vehicle("back", "r_L1", 10.0, 12.0));
  Environment env(make_test_scenario(net, demand, ego_at("L0", 50.0, 10.0)));
  const auto obs = env.reset();
  expect_well_formed(obs, 4);
  // Brute-force nearest scan over the vehicles on the ego lane.
  double nearest = 1e300;
  for (const auto& bv : env.vehicles()) {
    if (bv.lane() == 0 && bv.s > env.ego().s) nearest = std::min(nearest, bv.s - env.ego().s);
  }
  EXPECT_EQ(obs.at(0, 0), 1.0);
  EXPECT_EQ(obs.at(0, 1), nearest);
  EXPECT_EQ(obs.at(0, 3), 5.0);
  EXPECT_EQ(obs.at(1, 0), 0.0);
  EXPECT_EQ(obs.at(2, 0), 0.0);
  EXPECT_EQ(obs.at(3, 0), 1.0);  // lane 1 follower
  EXPECT_EQ(obs.at(3, 1), -40.0);
  EXPECT_EQ(obs.at(3, 2), 3.5);
  EXPECT_EQ(env.ego_lane_slot(), 0u);
}

TEST(EnvObservation, ShapeConstantOverEpisode) {
  Environment env(load_scenario(data_dir() / "scenarios" / "urban_dense.json"));
  expect_well_formed(env.reset(), env.observation_rows());
  cli::ZeroActionPolicy policy;
  for (int i = 0; i < 400 && !env.terminated(); ++i) {
    const auto r = env.step({0.3, 0.0});
    expect_well_formed(r.observation, env.observation_rows());
  }
}

TEST(EnvStep, ErrorsAfterTerminationAndOnBadInput) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 10.0), 3));
  EXPECT_THROW(env.step({}), UsageError);
  env.reset();
  EXPECT_THROW(env.step({std::nan(""), 0.0}), InputDomainError);
  EXPECT_THROW(env.step({0.0, std::numeric_limits<double>::infinity()}), InputDomainError);
  StepResult r;
  for (int i = 0; i < 3; ++i) r = env.step({});
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(r.info.cause, Cause::max_steps);
  EXPECT_THROW(env.step({}), UsageError);
}

TEST(EnvStep, ActionNotClipped) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 10.0)));
  env.reset();
  env.step({100.0, 0.0});
  EXPECT_NEAR(env.ego().vs, 20.0, 1e-12);
}

TEST(EnvStep, RewardHook) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 10.0)));
  env.set_reward_hook([](const Environment& e, const Action& a) { return e.ego().vs - a.a_long; });
  env.reset();
  EXPECT_NEAR(env.step({1.0, 0.0}).reward, 10.1 - 1.0, 1e-12);
}

TEST(EnvBackground, MatchesRolloutBitForBit) {
  constexpr double dt = 0.1, gap0 = 40.0, v0 = 22.0, ego_v0 = 20.0;
  constexpr std::size_t kSteps = 500;
  const ParamSet p{1.5, 2.5, 30.0, 8.0, 1.4, 4.0};
  const auto net = straight_road(1, 20000.0);
  auto demand = lane_routes(net);
  demand.vehicles.push_back(placed_vehicle("bv", "r_L0", 0.0, v0, p));
  Environment env(make_test_scenario(net, demand, ego_at("L0", gap0 + kDefaultVehicleLength, ego_v0), kSteps + 1));
  env.reset();

  std::vector<double> ego_speeds;
  std::vector<double> bv_v, bv_gap;
  for (std::size_t k = 0; k < kSteps; ++k) {
    const auto& bv = env.vehicles().at(0);
    ego_speeds.push_back(env.ego().vs);
    bv_v.push_back(bv.v);
    bv_gap.push_back((env.ego().s - env.ego().length) - bv.s);
    const double a = 1.5 * std::sin(0.02 * double(k));
    ASSERT_FALSE(env.step({a, 0.0}).terminated);
  }
  const auto ref = rollout_follower(p, ego_speeds, {v0, v0 - ego_v0, gap0}, dt, kSteps, kDefaultVehicleLength);
  ASSERT_FALSE(ref.gap_collapsed);
  ASSERT_EQ(ref.trajectory.size(), kSteps);
  for (std::size_t k = 0; k < kSteps; ++k) {
    ASSERT_EQ(ref.trajectory.samples[k].v_ego, bv_v[k]) << k;
    ASSERT_EQ(ref.trajectory.samples[k].gap, bv_gap[k]) << k;
  }
}

TEST(EnvBackground, ArrivalsRemoveAndIdsNeverReturn) {
  const auto net = straight_road(2, 300.0);
  auto demand = lane_routes(net);
  for (int i = 0; i < 5; ++i) {
    VehicleSpec v;
    v.id = "bv_" + std::to_string(i);
    v.route = "r_L0";
    v.depart = 2.0 * i;
    v.params = kHighwayMeans;
    demand.vehicles.push_back(v);
  }
  Environment env(make_test_scenario(net, demand, ego_at("L1", 5.0, 0.0), 1500));
  env.reset();
  std::set<std::string> gone, seen;
  std::set<std::string> prev;
  bool empty_after_all = false;
  for (int k = 0; k < 1500 && !env.terminated(); ++k) {
    env.step({0.0, 0.0});
    std::set<std::string> now;
    for (const auto& bv : env.vehicles()) {
      now.insert(bv.id);
      EXPECT_FALSE(gone.count(bv.id)) << bv.id << " reappeared";
    }
    for (const auto& id : prev) if (!now.count(id)) gone.insert(id);
    seen.insert(now.begin(), now.end());
    prev = now;
    if (seen.size() == 5 && now.empty()) empty_after_all = true;
  }
  EXPECT_TRUE(empty_after_all);
}

TEST(EnvTrace, FramesAndDeterminism) {
  auto run = [] {
    Environment env(load_scenario(data_dir() / "scenarios" / "highway_straight.json"));
    std::ostringstream trace;
    env.set_trace_sink(&trace);
    env.reset();
    for (int i = 0; i < 100; ++i) env.step({0.2, 0.0});
    return trace.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  std::istringstream in(a);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,id,x,y,heading,v");
  std::set<std::string> steps;
  while (std::getline(in, line)) steps.insert(line.substr(0, line.find(',')));
  EXPECT_EQ(steps.size(), 100u);
}

TEST(EnvTrace, LoneEgoSingleRecord) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 10.0)));
  std::ostringstream trace;
  env.set_trace_sink(&trace);
  env.reset();
  env.step({});
  EXPECT_EQ(trace.str(), "step,id,x,y,heading,v\n1,ego,51,0,0,10\n");
}

TEST(EnvSummary, Fields) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 10.0), 2));
  env.reset();
  env.step({});
  env.step({});
  const auto j = nlohmann::json::parse(env.episode_summary_json());
  EXPECT_EQ(j.at("cause"), "max_steps");
  EXPECT_EQ(j.at("steps"), 2);
  EXPECT_NEAR(j.at("ego_final").at("x").get<double>(), 52.0, 1e-12);
  EXPECT_EQ(j.at("collisions_logged"), 0);
}

TEST(BuiltinPolicy, NoCollisionBehindSlowerLeader) {
  Environment env(load_scenario(fixture("custom_scenario.json")));
  cli::BuiltinIdmPolicy policy;
  cli::run_episode(env, policy);
  EXPECT_EQ(env.cause(), Cause::max_steps);
  EXPECT_EQ(env.step_index(), 1000u);
  ASSERT_EQ(env.vehicles().size(), 1u);
  EXPECT_GT(env.vehicles()[0].s - env.vehicles()[0].length - env.ego().s, 0.0);
}

TEST(ZeroPolicy, RunsToMaxSteps) {
  Environment env(make_test_scenario(straight_road(1), {}, ego_at("L0", 50.0, 20.0), 500));
  cli::ZeroActionPolicy policy;
  cli::run_episode(env, policy);
  EXPECT_EQ(env.cause(), Cause::max_steps);
}

}  // namespace
}  // namespace idmgym
