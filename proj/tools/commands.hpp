#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idmgym/calibration.hpp"
#include "idmgym/env.hpp"
#include "idmgym/model.hpp"
#include "idmgym/rng.hpp"

namespace idmgym::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Synthetic follower data ----------------------------------------------------

struct SyntheticConfig {
  ParamSet params = kSyntheticTruth;
  std::size_t n_vehicles = 50;
  std::size_t n_obs = 200;
  double dt = 0.5;          ///< spacing of recorded observations
  double sim_dt = 0.1;      ///< integration step; dt must be a whole multiple
  double noise_sigma = 0.0; ///< Gaussian noise added to a_obs
  double leader_period = 20.0;
  double leader_v_min = 10.0;
  double leader_v_max = 30.0;
  double init_v_min = 10.0;
  double init_v_max = 30.0;
  double init_gap_min = 50.0;
  double init_gap_max = 250.0;
};

/// One follower behind a piecewise-constant leader. Initial conditions that
/// lead to a collapsed gap are redrawn.
Trajectory generate_synthetic_trajectory(const SyntheticConfig& cfg, Rng& rng);

struct GenSyntheticOptions {
  SyntheticConfig synth;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
/// Writes vehicle_NNN.csv (stream i seeded with derive_seed(seed, i)).
std::vector<std::filesystem::path> cmd_gen_synthetic(const GenSyntheticOptions& opt);

// Calibration ----------------------------------------------------------------

struct CalibrateOptions {
  std::vector<std::filesystem::path> inputs;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::size_t iterations = 20000;
  std::optional<std::size_t> burn_in;  ///< default 20% of iterations
  std::size_t thin = 1;
  double noise_sigma = 0.3;
  double proposal_fraction = 0.02;
  std::size_t bins = 30;
  std::size_t max_lag = 100;
  Objective objective = Objective::one_step;
  std::optional<double> pin_delta;
  std::size_t jobs = 1;
};

struct CalibrationRun {
  std::filesystem::path input;
  Chain chain;
};

/// Runs one chain per input (chain i seeded with derive_seed(seed, i)),
/// possibly on several threads. Results are in input order.
std::vector<CalibrationRun> run_calibration(const CalibrateOptions& opt);
/// Writes chains/, histograms.json, acf.csv and summary.json.
void cmd_calibrate(const CalibrateOptions& opt);

// Population -----------------------------------------------------------------

struct SampleParamsOptions {
  std::filesystem::path histograms;
  std::size_t n = 100;
  std::optional<double> pin_delta;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
void cmd_sample_params(const SampleParamsOptions& opt);

struct BuildDemandOptions {
  std::filesystem::path network;
  std::filesystem::path histograms;
  std::size_t n_vehicles = 50;
  std::size_t n_routes = 4;
  double mean_headway = kDefaultMeanHeadway;
  std::optional<double> pin_delta;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
void cmd_build_demand(const BuildDemandOptions& opt);

// Simulation -----------------------------------------------------------------

/// Decides the ego action from the current observation. nullopt signals a
/// policy failure that ends the episode.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::optional<Action> act(const Environment& env, const Observation& obs) = 0;
};

/// Drives the ego with IDM at the highway mean parameters against the leader
/// in its own lane (assumed 5 m long). Never steers.
class BuiltinIdmPolicy final : public Policy {
 public:
  std::optional<Action> act(const Environment& env, const Observation& obs) override;
};

class ZeroActionPolicy final : public Policy {
 public:
  std::optional<Action> act(const Environment&, const Observation&) override { return Action{}; }
};

/// Child process speaking the line protocol: one observation line in, one
/// `a_long,a_lat` line out.
class StdioPolicy final : public Policy {
 public:
  explicit StdioPolicy(const std::string& command);
  ~StdioPolicy() override;
  StdioPolicy(const StdioPolicy&) = delete;
  StdioPolicy& operator=(const StdioPolicy&) = delete;

  std::optional<Action> act(const Environment& env, const Observation& obs) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Observation as one protocol line (no terminator).
std::string format_observation_line(const Observation& obs);
/// Parses `a_long,a_lat`; nullopt when malformed or non-finite.
std::optional<Action> parse_action_line(std::string_view line);

/// Steps until termination. A failed policy ends the episode with
/// Cause::protocol_error.
void run_episode(Environment& env, Policy& policy);

enum class PolicyKind { builtin_idm_ego, zero_action, external_stdio };
PolicyKind parse_policy_kind(std::string_view text);

struct SimulateOptions {
  std::optional<std::filesystem::path> scenario;
  std::optional<ScenarioKind> kind;
  std::filesystem::path library;
  PolicyKind policy = PolicyKind::builtin_idm_ego;
  std::string policy_command;
  std::optional<std::size_t> max_steps;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
/// Writes trace.csv and summary.json.
void cmd_simulate(const SimulateOptions& opt);

// Manifest -------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::vector<std::pair<std::string, std::string>> options;  ///< remaining settings, as text
};
/// manifest.json in the output directory. Contains no timestamps, so seeded
/// reruns are byte-identical.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace idmgym::cli
