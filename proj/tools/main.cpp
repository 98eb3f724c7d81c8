#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "idmgym/errors.hpp"

#ifndef IDMGYM_DATA_DIR
#define IDMGYM_DATA_DIR "data"
#endif

using namespace idmgym;
using namespace idmgym::cli;

namespace {

template <typename T>
void add_common(CLI::App* cmd, T& opt) {
  cmd->add_option("--seed", opt.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--out", opt.out, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IDM traffic gym: synthetic data, calibration, demand and simulation"};
  app.set_config("--config", "", "Read options from an INI/TOML file");
  app.require_subcommand(1);

  GenSyntheticOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write synthetic follower trajectories");
  add_common(gen_cmd, gen);
  auto& sp = gen.synth;
  gen_cmd->add_option("--a-max", sp.params.a_max)->capture_default_str();
  gen_cmd->add_option("--a-comf", sp.params.a_comf)->capture_default_str();
  gen_cmd->add_option("--v-des", sp.params.v_des)->capture_default_str();
  gen_cmd->add_option("--d-min", sp.params.d_min)->capture_default_str();
  gen_cmd->add_option("--T", sp.params.T)->capture_default_str();
  gen_cmd->add_option("--delta", sp.params.delta)->capture_default_str();
  gen_cmd->add_option("--n-vehicles", sp.n_vehicles)->capture_default_str();
  gen_cmd->add_option("--n-obs", sp.n_obs)->capture_default_str();
  gen_cmd->add_option("--dt", sp.dt, "Observation spacing (s)")->capture_default_str();
  gen_cmd->add_option("--sim-dt", sp.sim_dt, "Integration step (s)")->capture_default_str();
  gen_cmd->add_option("--noise-sigma", sp.noise_sigma, "Acceleration noise (m/s^2)")->capture_default_str();

  CalibrateOptions cal;
  std::string objective = "one-step";
  double cal_pin = 0.0;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit IDM parameters by Metropolis-Hastings");
  add_common(cal_cmd, cal);
  cal_cmd->add_option("inputs", cal.inputs, "Trajectory CSV files")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--iterations", cal.iterations)->capture_default_str();
  cal_cmd->add_option("--burn-in", cal.burn_in, "Default: 20% of iterations");
  cal_cmd->add_option("--thin", cal.thin)->capture_default_str();
  cal_cmd->add_option("--noise-sigma", cal.noise_sigma)->capture_default_str();
  cal_cmd->add_option("--proposal-fraction", cal.proposal_fraction, "Step size as a fraction of the prior width")
      ->capture_default_str();
  cal_cmd->add_option("--bins", cal.bins)->capture_default_str();
  cal_cmd->add_option("--max-lag", cal.max_lag)->capture_default_str();
  cal_cmd->add_option("--objective", objective)->check(CLI::IsMember({"one-step", "rollout"}))->capture_default_str();
  auto* cal_pin_opt = cal_cmd->add_option("--pin-delta", cal_pin, "Hold delta fixed");
  cal_cmd->add_option("--jobs", cal.jobs, "Chains run in parallel")->capture_default_str();

  SampleParamsOptions samp;
  double samp_pin = 0.0;
  auto* samp_cmd = app.add_subcommand("sample-params", "Draw parameter sets from histograms");
  add_common(samp_cmd, samp);
  samp_cmd->add_option("--histograms", samp.histograms)->required()->check(CLI::ExistingFile);
  samp_cmd->add_option("-n", samp.n)->capture_default_str();
  auto* samp_pin_opt = samp_cmd->add_option("--pin-delta", samp_pin, "Delta when the file has no histogram");

  BuildDemandOptions dem;
  double dem_pin = 0.0;
  auto* dem_cmd = app.add_subcommand("build-demand", "Generate background traffic for a network");
  add_common(dem_cmd, dem);
  dem_cmd->add_option("--network", dem.network)->required()->check(CLI::ExistingFile);
  dem_cmd->add_option("--histograms", dem.histograms)->required()->check(CLI::ExistingFile);
  dem_cmd->add_option("-n,--n-vehicles", dem.n_vehicles)->capture_default_str();
  dem_cmd->add_option("--routes", dem.n_routes)->capture_default_str();
  dem_cmd->add_option("--mean-headway", dem.mean_headway)->capture_default_str();
  auto* dem_pin_opt = dem_cmd->add_option("--pin-delta", dem_pin, "Delta when the file has no histogram");

  SimulateOptions sim;
  std::string policy = "builtin-idm-ego";
  std::string kind;
  std::string library = std::string(IDMGYM_DATA_DIR) + "/scenarios";
  auto* sim_cmd = app.add_subcommand("simulate", "Run one headless episode");
  add_common(sim_cmd, sim);
  auto* scen_opt = sim_cmd->add_option("--scenario", sim.scenario, "Scenario file")->check(CLI::ExistingFile);
  sim_cmd->add_option("--kind", kind, "Pick a random scenario of this kind")
      ->check(CLI::IsMember({"highway", "urban"}))
      ->excludes(scen_opt);
  sim_cmd->add_option("--library", library, "Scenario directory for --kind")->capture_default_str();
  sim_cmd->add_option("--policy", policy)
      ->check(CLI::IsMember({"builtin-idm-ego", "zero-action", "external-stdio"}))
      ->capture_default_str();
  sim_cmd->add_option("--policy-cmd", sim.policy_command, "Shell command for external-stdio");
  sim_cmd->add_option("--max-steps", sim.max_steps, "Override the scenario's step limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) {
      cmd_gen_synthetic(gen);
    } else if (*cal_cmd) {
      cal.objective = objective == "rollout" ? Objective::rollout : Objective::one_step;
      if (*cal_pin_opt) cal.pin_delta = cal_pin;
      cmd_calibrate(cal);
    } else if (*samp_cmd) {
      if (*samp_pin_opt) samp.pin_delta = samp_pin;
      cmd_sample_params(samp);
    } else if (*dem_cmd) {
      if (*dem_pin_opt) dem.pin_delta = dem_pin;
      cmd_build_demand(dem);
    } else if (*sim_cmd) {
      sim.policy = parse_policy_kind(policy);
      if (!kind.empty()) sim.kind = parse_scenario_kind(kind);
      sim.library = library;
      cmd_simulate(sim);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
