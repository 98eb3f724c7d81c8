#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "idmgym/errors.hpp"
#include "idmgym/population.hpp"
#include "stats_support.hpp"
#include "test_support.hpp"

namespace idmgym {
namespace {

using testing::chi_square_sf;
using testing::chi_square_stat;
using testing::fixture;

Histogram two_bins() { return Histogram{{{0.0, 1.0, 0.25}, {1.0, 2.0, 0.75}}}; }

ParamHistograms single_bins_at(const ParamSet& p, double half_width) {
  ParamHistograms h;
  const auto v = p.to_array();
  for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
    h[std::string(ParamSet::kNames[k])] = Histogram{{{v[k] - half_width, v[k] + half_width, 1.0}}};
  }
  return h;
}

ParamHistograms two_bin_params() {
  ParamHistograms h;
  const auto v = kHighwayMeans.to_array();
  for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
    const double c = v[k];
    h[std::string(ParamSet::kNames[k])] = Histogram{{{0.8 * c, c, 0.4}, {c, 1.2 * c, 0.6}}};
  }
  return h;
}

TEST(ChiSquareOracle, KnownValues) {
  // Reference tail probabilities from a statistics package.
  EXPECT_NEAR(chi_square_sf(21.666, 9), 0.0099999799, 1e-8);
  EXPECT_NEAR(chi_square_sf(3.0, 2), 0.2231301601, 1e-9);
  EXPECT_NEAR(chi_square_sf(40.0, 30), 0.1048642811, 1e-9);
}

TEST(SampleFromHistogram, SingleBin) {
  Rng rng(1);
  const Histogram h{{{2.0, 3.0, 1.0}}};
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_from_histogram(h, rng);
    EXPECT_GE(x, 2.0);
    EXPECT_LT(x, 3.0);
  }
}

TEST(SampleFromHistogram, TwoBinBinomial) {
  Rng rng(2);
  constexpr int kN = 10000;
  int upper = 0;
  for (int i = 0; i < kN; ++i) upper += sample_from_histogram(two_bins(), rng) >= 1.0;
  // 99% binomial interval half-width is 2.576 * sqrt(.75*.25/1e4) = 0.011.
  EXPECT_NEAR(double(upper) / kN, 0.75, 0.02);
}

TEST(SampleFromHistogram, Deterministic) {
  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_from_histogram(two_bins(), a), sample_from_histogram(two_bins(), b));
}

TEST(SampleFromHistogram, ChiSquareGoodnessOfFit) {
  Rng gen(4);
  Histogram h;
  std::vector<double> probs;
  double total = 0.0;
  for (int i = 0; i < 10; ++i) probs.push_back(0.05 + uniform01(gen)), total += probs.back();
  for (int i = 0; i < 10; ++i) {
    probs[i] /= total;
    h.bins.push_back({double(i), double(i + 1), probs[i]});
  }
  double mass = 0.0;
  for (const auto& b : h.bins) mass += b.mass;
  h.bins.back().mass += 1.0 - mass;
  probs.back() = h.bins.back().mass;

  Rng rng(5);
  constexpr int kN = 10000;
  std::vector<double> counts(10, 0.0);
  for (int i = 0; i < kN; ++i) {
    const double x = sample_from_histogram(h, rng);
    counts[static_cast<std::size_t>(x)] += 1.0;
  }
  EXPECT_GT(chi_square_sf(chi_square_stat(counts, probs, kN), 9), 0.01);
}

TEST(SampleFromHistogram, ZeroMassBinsNeverDrawn) {
  const Histogram h{{{0.0, 1.0, 0.0}, {1.0, 1.0 + 1e-12, 0.5}, {1.0 + 1e-12, 3.0, 0.0}, {3.0, 4.0, 0.5}}};
  Rng rng(6);
  for (int i = 0; i < 5000; ++i) {
    const double x = sample_from_histogram(h, rng);
    const bool in_second = x >= 1.0 && x < 1.0 + 1e-12;
    const bool in_fourth = x >= 3.0 && x < 4.0;
    EXPECT_TRUE(in_second || in_fourth) << x;
  }
}

TEST(SampleFromHistogram, AllZeroMassThrows) {
  Rng rng(7);
  const Histogram h{{{0.0, 1.0, 0.0}, {1.0, 2.0, 0.0}}};
  EXPECT_THROW(sample_from_histogram(h, rng), Error);
}

TEST(SampleParamSet, SingleBinsAtHighwayMeans) {
  Rng rng(8);
  const auto p = sample_param_set(single_bins_at(kHighwayMeans, 0.05), rng);
  const auto got = p.to_array();
  const auto want = kHighwayMeans.to_array();
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 0.05);
  EXPECT_NEAR(p.v_des, 29.7, 0.05);
}

TEST(SampleParamSet, MarginalMeans) {
  const auto hists = two_bin_params();
  Rng rng(9);
  constexpr int kN = 10000;
  std::array<double, ParamSet::kSize> sum{}, sum_sq{};
  for (int i = 0; i < kN; ++i) {
    const auto v = sample_param_set(hists, rng).to_array();
    for (std::size_t k = 0; k < v.size(); ++k) sum[k] += v[k], sum_sq[k] += v[k] * v[k];
  }
  for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
    const double mean = sum[k] / kN;
    const double sd = std::sqrt(sum_sq[k] / kN - mean * mean);
    const double expected = hists.at(std::string(ParamSet::kNames[k])).mean();
    EXPECT_LT(std::abs(mean - expected), 3 * sd / std::sqrt(double(kN))) << ParamSet::kNames[k];
  }
}

TEST(SampleParamSet, MissingHistogram) {
  auto hists = two_bin_params();
  hists.erase("T");
  Rng rng(10);
  EXPECT_THROW(sample_param_set(hists, rng), ConfigError);
  hists = two_bin_params();
  hists.erase("delta");
  EXPECT_THROW(sample_param_set(hists, rng), ConfigError);
  EXPECT_EQ(sample_param_set(hists, rng, 4.0).delta, 4.0);
}

TEST(RandomTrips, SingleStraightRoad) {
  const auto net = load_network(fixture("single_lane.json"));
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    const auto routes = generate_random_trips(net, 1, rng);
    ASSERT_EQ(routes.size(), 1u);
    EXPECT_EQ(routes[0].lanes, std::vector<std::string>{"road"});
  }
}

TEST(RandomTrips, ForkReachesBothSinks) {
  const auto net = load_network(fixture("fork.json"));
  Rng rng(12);
  std::set<std::vector<std::string>> seen;
  for (int i = 0; i < 1000; ++i) {
    for (const auto& r : generate_random_trips(net, 1, rng)) seen.insert(r.lanes);
  }
  // Reachability enumeration: trunk -> up and trunk -> down are the only paths.
  const std::set<std::vector<std::string>> expected{{"trunk", "up"}, {"trunk", "down"}};
  EXPECT_EQ(seen, expected);
}

TEST(RandomTrips, ZeroRoutes) {
  const auto net = load_network(fixture("fork.json"));
  Rng rng(13);
  EXPECT_TRUE(generate_random_trips(net, 0, rng).empty());
}

TEST(RandomTrips, DisconnectedIsGenerationError) {
  std::vector<Lane> lanes(2);
  lanes[0].id = "a";
  lanes[0].centerline = {{0, 0}, {10, 0}};
  lanes[1].id = "b";
  lanes[1].centerline = {{0, 10}, {10, 10}};
  const auto net = RoadNetwork::build(lanes, {"a"}, {"b"});
  Rng rng(14);
  EXPECT_THROW(generate_random_trips(net, 1, rng), GenerationError);
}

TEST(RandomTrips, RoutesFollowSuccessors) {
  const auto net = load_network(testing::data_dir() / "networks" / "urban_grid.json");
  Rng rng(15);
  for (const auto& r : generate_random_trips(net, 20, rng)) {
    for (std::size_t i = 1; i < r.lanes.size(); ++i) {
      const auto& succ = net.successors(net.index_of(r.lanes[i - 1]));
      EXPECT_NE(std::find(succ.begin(), succ.end(), net.index_of(r.lanes[i])), succ.end());
    }
    const auto& sinks = net.sinks();
    EXPECT_NE(std::find(sinks.begin(), sinks.end(), net.index_of(r.lanes.back())), sinks.end());
  }
}

TEST(BuildDemand, Empty) {
  const auto net = load_network(fixture("fork.json"));
  Rng rng(16);
  const auto d = build_demand(net, two_bin_params(), 0, {}, rng);
  EXPECT_TRUE(d.vehicles.empty());
  EXPECT_TRUE(d.routes.empty());
}

TEST(BuildDemand, FiftyVehicles) {
  const auto net = load_network(testing::data_dir() / "networks" / "urban_grid.json");
  Rng rng(17);
  const auto d = build_demand(net, two_bin_params(), 50, {}, rng);
  EXPECT_NO_THROW(d.validate(net));
  ASSERT_EQ(d.vehicles.size(), 50u);
  std::set<std::string> ids;
  std::map<std::string, double> last_depart;
  for (const auto& v : d.vehicles) {
    ids.insert(v.id);
    EXPECT_TRUE(v.params.is_valid());
    EXPECT_NE(d.find_route(v.route), nullptr);
    auto [it, fresh] = last_depart.emplace(v.route, v.depart);
    if (!fresh) {
      EXPECT_GE(v.depart, it->second);
      it->second = v.depart;
    }
  }
  EXPECT_EQ(ids.size(), 50u);
  // Independent draws from multi-bin histograms never coincide.
  for (std::size_t i = 0; i < d.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < d.vehicles.size(); ++j) EXPECT_NE(d.vehicles[i].params, d.vehicles[j].params);
  }
}

TEST(BuildDemand, HeadwayMean) {
  const auto net = load_network(fixture("single_lane.json"));
  Rng rng(18);
  FlowSpec flow;
  flow.n_routes = 1;
  const auto d = build_demand(net, two_bin_params(), 4001, flow, rng);
  const double mean_gap = d.vehicles.back().depart / 4000.0;
  // Exponential with mean 4: standard error 4 / sqrt(4000) = 0.063.
  EXPECT_NEAR(mean_gap, kDefaultMeanHeadway, 4 * 0.0633);
}

TEST(BuildDemand, SeededJsonIsIdentical) {
  const auto net = load_network(testing::data_dir() / "networks" / "highway_straight.json");
  Rng a(19), b(19);
  const auto ja = demand_to_json(build_demand(net, two_bin_params(), 30, {}, a));
  const auto jb = demand_to_json(build_demand(net, two_bin_params(), 30, {}, b));
  EXPECT_EQ(ja, jb);
}

TEST(DemandJson, RoundTrip) {
  const auto net = load_network(testing::data_dir() / "networks" / "highway_straight.json");
  Rng rng(20);
  auto d = build_demand(net, two_bin_params(), 10, {}, rng);
  d.vehicles[3].depart_pos = 42.5;
  d.vehicles[3].depart_speed = 12.0;
  EXPECT_EQ(demand_from_json(demand_to_json(d)), d);
}

TEST(DemandValidation, Rejections) {
  const auto net = load_network(fixture("fork.json"));
  DemandSpec d;
  d.routes = {{"r", {"trunk", "up"}}};
  VehicleSpec v;
  v.id = "x";
  v.route = "r";
  v.params = kHighwayMeans;
  d.vehicles = {v};
  EXPECT_NO_THROW(d.validate(net));

  auto bad = d;
  bad.routes[0].lanes = {"up", "trunk"};
  EXPECT_THROW(bad.validate(net), ValidationError);
  bad = d;
  bad.vehicles[0].route = "nope";
  EXPECT_THROW(bad.validate(net), ValidationError);
  bad = d;
  bad.vehicles[0].depart = -1.0;
  EXPECT_THROW(bad.validate(net), ValidationError);
  bad = d;
  bad.vehicles.push_back(v);
  EXPECT_THROW(bad.validate(net), ValidationError);
}

TEST(BundledHistograms, SchemaValid) {
  for (const char* name : {"highway.json", "urban.json"}) {
    const auto hists = read_histograms_json(testing::data_dir() / "histograms" / name);
    ASSERT_EQ(hists.size(), ParamSet::kSize) << name;
    for (const auto& [param, h] : hists) EXPECT_NO_THROW(h.validate()) << name << " " << param;
  }
  const auto highway = read_histograms_json(testing::data_dir() / "histograms" / "highway.json");
  const auto means = kHighwayMeans.to_array();
  for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
    EXPECT_NEAR(highway.at(std::string(ParamSet::kNames[k])).mean(), means[k], 1e-9);
  }
}

}  // namespace
}  // namespace idmgym
