#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "idmgym/errors.hpp"
#include "idmgym/histogram.hpp"
#include "idmgym/population.hpp"
#include "idmgym/scenario.hpp"

namespace idmgym::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

std::string params_csv_row(const ParamSet& p) {
  const auto v = p.to_array();
  return fmt::format("{}", fmt::join(v, ","));
}

std::string params_csv_header() { return fmt::format("{}", fmt::join(ParamSet::kNames, ",")); }

std::string opt_text(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "none"; }

}  // namespace

// ---------------------------------------------------------------------------

Trajectory generate_synthetic_trajectory(const SyntheticConfig& cfg, Rng& rng) {
  cfg.params.validate();
  if (!(cfg.dt > 0.0) || !(cfg.sim_dt > 0.0)) throw ConfigError("dt and sim_dt must be > 0");
  const double ratio = cfg.dt / cfg.sim_dt;
  const auto sub = static_cast<std::size_t>(std::llround(ratio));
  if (sub == 0 || std::abs(ratio - static_cast<double>(sub)) > 1e-9 * ratio) {
    throw ConfigError(fmt::format("dt {} is not a whole multiple of sim_dt {}", cfg.dt, cfg.sim_dt));
  }
  if (cfg.n_obs == 0) throw ConfigError("n_obs must be >= 1");
  const auto period = static_cast<std::size_t>(std::llround(cfg.leader_period / cfg.sim_dt));
  if (period == 0) throw ConfigError("leader period shorter than sim_dt");

  const std::size_t n_steps = (cfg.n_obs - 1) * sub + 1;
  std::uniform_real_distribution<double> leader_v(cfg.leader_v_min, cfg.leader_v_max);
  std::uniform_real_distribution<double> init_v(cfg.init_v_min, cfg.init_v_max);
  std::uniform_real_distribution<double> init_gap(cfg.init_gap_min, cfg.init_gap_max);
  std::normal_distribution<double> noise(0.0, 1.0);

  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const double v0 = init_v(rng);
    const double gap0 = init_gap(rng);
    std::vector<double> leader(n_steps);
    double vl = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      if (k % period == 0) vl = leader_v(rng);
      leader[k] = vl;
    }
    const auto sim = rollout_follower(cfg.params, leader, {v0, v0 - leader[0], gap0}, cfg.sim_dt, n_steps);
    if (sim.gap_collapsed) continue;

    Trajectory traj;
    traj.dt = cfg.dt;
    for (std::size_t i = 0; i < cfg.n_obs; ++i) {
      auto s = sim.trajectory.samples[i * sub];
      s.t = static_cast<double>(i) * cfg.dt;
      if (cfg.noise_sigma > 0.0) s.a_obs += cfg.noise_sigma * noise(rng);
      traj.samples.push_back(s);
    }
    return traj;
  }
  throw GenerationError("synthetic follower kept colliding with its leader");
}

std::vector<fs::path> cmd_gen_synthetic(const GenSyntheticOptions& opt) {
  if (opt.synth.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  ensure_dir(opt.out);
  std::vector<fs::path> files;
  for (std::size_t i = 0; i < opt.synth.n_vehicles; ++i) {
    Rng rng(derive_seed(opt.seed, i));
    const auto traj = generate_synthetic_trajectory(opt.synth, rng);
    auto path = opt.out / fmt::format("vehicle_{:03}.csv", i);
    write_trajectory_csv(path, traj);
    files.push_back(std::move(path));
  }
  const auto& s = opt.synth;
  write_manifest(opt.out, {"gen-synthetic",
                           {},
                           opt.seed,
                           opt.out.string(),
                           {{"params", params_csv_row(s.params)},
                            {"n_vehicles", fmt::format("{}", s.n_vehicles)},
                            {"n_obs", fmt::format("{}", s.n_obs)},
                            {"dt", fmt::format("{}", s.dt)},
                            {"sim_dt", fmt::format("{}", s.sim_dt)},
                            {"noise_sigma", fmt::format("{}", s.noise_sigma)}}});
  return files;
}

// ---------------------------------------------------------------------------

std::vector<CalibrationRun> run_calibration(const CalibrateOptions& opt) {
  if (opt.inputs.empty()) throw UsageError("calibrate needs at least one trajectory file");
  if (opt.iterations == 0) throw ConfigError("iterations must be >= 1");

  // Parse everything up front so input errors surface before any sampling.
  std::vector<Trajectory> data;
  for (const auto& path : opt.inputs) data.push_back(read_trajectory_csv(path));

  const PriorBounds prior;
  std::vector<CalibrationRun> runs(data.size());
  auto run_one = [&](std::size_t i) {
    TargetDensity td(data[i], opt.noise_sigma, prior, opt.objective);
    auto cfg = default_proposal(prior, opt.iterations, derive_seed(opt.seed, i), opt.proposal_fraction);
    if (opt.burn_in) cfg.burn_in = *opt.burn_in;
    cfg.thin = opt.thin;
    auto init = prior.center();
    if (opt.pin_delta) {
      td.pin_delta(*opt.pin_delta);
      init.delta = *opt.pin_delta;
    }
    runs[i] = CalibrationRun{opt.inputs[i], run_chain(td, cfg, init)};
  };

  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, data.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < data.size(); ++i) run_one(i);
    return runs;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < data.size(); i = next++) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return runs;
}

void cmd_calibrate(const CalibrateOptions& opt) {
  ensure_dir(opt.out);
  const auto runs = run_calibration(opt);
  if (opt.bins == 0) throw ConfigError("bins must be >= 1");

  const auto chain_dir = opt.out / "chains";
  ensure_dir(chain_dir);
  for (const auto& run : runs) {
    write_chain_csv(chain_dir / (run.input.stem().string() + ".csv"), run.chain);
  }

  // Pooled posterior: all retained samples of all chains.
  ParamHistograms hists;
  for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
    std::vector<double> pooled;
    for (const auto& run : runs) {
      const auto c = run.chain.coordinate(k);
      pooled.insert(pooled.end(), c.begin(), c.end());
    }
    hists.emplace(std::string(ParamSet::kNames[k]), histogram_from_samples(pooled, opt.bins));
  }
  write_histograms_json(opt.out / "histograms.json", hists);

  auto acf_out = open_out(opt.out / "acf.csv");
  acf_out << "file,lag," << params_csv_header() << "\n";
  for (const auto& run : runs) {
    const auto n = run.chain.samples.size();
    const std::size_t max_lag = n == 0 ? 0 : std::min(opt.max_lag, n - 1);
    std::vector<std::vector<double>> acf(ParamSet::kSize);
    for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
      const auto series = run.chain.coordinate(k);
      try {
        acf[k] = autocorrelation(series, max_lag);
      } catch (const DegenerateSeriesError&) {
        acf[k].clear();  // constant coordinate (e.g. pinned): left blank
      }
    }
    for (std::size_t lag = 0; lag <= max_lag && n > 0; ++lag) {
      acf_out << run.input.filename().string() << ',' << lag;
      for (std::size_t k = 0; k < ParamSet::kSize; ++k) {
        acf_out << ',';
        if (!acf[k].empty()) acf_out << fmt::format("{}", acf[k][lag]);
      }
      acf_out << '\n';
    }
  }
  if (!acf_out) throw IoError("writing acf.csv failed");

  ojson summary = ojson::object();
  ojson chains = ojson::array();
  for (const auto& run : runs) {
    ojson mean = ojson::object();
    const auto m = run.chain.mean().to_array();
    for (std::size_t k = 0; k < ParamSet::kSize; ++k) mean[std::string(ParamSet::kNames[k])] = m[k];
    chains.push_back({{"file", run.input.filename().string()},
                      {"iterations", run.chain.config.n_iter},
                      {"samples", run.chain.samples.size()},
                      {"acceptance_rate", run.chain.acceptance_rate()},
                      {"posterior_mean", mean}});
  }
  summary["chains"] = std::move(chains);
  write_file(opt.out / "summary.json", summary.dump(2) + "\n");

  RunManifest m{"calibrate", {}, opt.seed, opt.out.string(), {}};
  for (const auto& p : opt.inputs) m.inputs.push_back(p.string());
  m.options = {{"iterations", fmt::format("{}", opt.iterations)},
               {"burn_in", opt.burn_in ? fmt::format("{}", *opt.burn_in) : "default"},
               {"thin", fmt::format("{}", opt.thin)},
               {"noise_sigma", fmt::format("{}", opt.noise_sigma)},
               {"proposal_fraction", fmt::format("{}", opt.proposal_fraction)},
               {"bins", fmt::format("{}", opt.bins)},
               {"max_lag", fmt::format("{}", opt.max_lag)},
               {"objective", opt.objective == Objective::one_step ? "one_step" : "rollout"},
               {"pin_delta", opt_text(opt.pin_delta)}};
  write_manifest(opt.out, m);
}

// ---------------------------------------------------------------------------

void cmd_sample_params(const SampleParamsOptions& opt) {
  const auto hists = read_histograms_json(opt.histograms);
  ensure_dir(opt.out);
  Rng rng(opt.seed);
  auto out = open_out(opt.out / "params.csv");
  out << params_csv_header() << '\n';
  for (std::size_t i = 0; i < opt.n; ++i) out << params_csv_row(sample_param_set(hists, rng, opt.pin_delta)) << '\n';
  if (!out) throw IoError("writing params.csv failed");
  write_manifest(opt.out, {"sample-params",
                           {opt.histograms.string()},
                           opt.seed,
                           opt.out.string(),
                           {{"n", fmt::format("{}", opt.n)}, {"pin_delta", opt_text(opt.pin_delta)}}});
}

void cmd_build_demand(const BuildDemandOptions& opt) {
  const auto net = load_network(opt.network);
  const auto hists = read_histograms_json(opt.histograms);
  ensure_dir(opt.out);
  Rng rng(opt.seed);
  FlowSpec flow;
  flow.mean_headway = opt.mean_headway;
  flow.n_routes = opt.n_routes;
  flow.pinned_delta = opt.pin_delta;
  const auto demand = build_demand(net, hists, opt.n_vehicles, flow, rng);
  write_demand(opt.out / "demand.json", demand);
  write_manifest(opt.out, {"build-demand",
                           {opt.network.string(), opt.histograms.string()},
                           opt.seed,
                           opt.out.string(),
                           {{"n_vehicles", fmt::format("{}", opt.n_vehicles)},
                            {"n_routes", fmt::format("{}", opt.n_routes)},
                            {"mean_headway", fmt::format("{}", opt.mean_headway)},
                            {"pin_delta", opt_text(opt.pin_delta)}}});
}

// ---------------------------------------------------------------------------

std::optional<Action> BuiltinIdmPolicy::act(const Environment& env, const Observation& obs) {
  constexpr double kAssumedLeaderLength = 5.0;
  const auto& ego = env.ego();
  const auto row = 2 * env.ego_lane_slot();
  FollowingState state{ego.vs, 0.0, kNoLeader};
  if (row < obs.rows && obs.at(row, 0) == 1.0) {
    const double gap = obs.at(row, 1) - kAssumedLeaderLength;
    const double v_lead = ego.vs + obs.at(row, 3);
    if (gap <= 0.0) return Action{-ego.vs / env.scenario().config.dt, 0.0};
    state = {ego.vs, ego.vs - v_lead, gap};
  }
  return Action{idm_acceleration(kHighwayMeans, state), 0.0};
}

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "builtin-idm-ego") return PolicyKind::builtin_idm_ego;
  if (text == "zero-action") return PolicyKind::zero_action;
  if (text == "external-stdio") return PolicyKind::external_stdio;
  throw UsageError(fmt::format("unknown policy '{}'", text));
}

void run_episode(Environment& env, Policy& policy) {
  auto obs = env.reset();
  while (!env.terminated()) {
    const auto action = policy.act(env, obs);
    if (!action) {
      env.terminate(Cause::protocol_error);
      break;
    }
    obs = env.step(*action).observation;
  }
}

void cmd_simulate(const SimulateOptions& opt) {
  Rng rng(opt.seed);
  Scenario scenario = opt.scenario ? load_scenario(*opt.scenario)
                      : opt.kind  ? load_scenario(*opt.kind, opt.library, rng)
                                  : throw UsageError("simulate needs --scenario or --kind");
  if (opt.max_steps) {
    if (*opt.max_steps == 0) throw ConfigError("max_steps must be >= 1");
    scenario.config.max_steps = *opt.max_steps;
  }
  const auto scenario_path = scenario.source.string();

  std::unique_ptr<Policy> policy;
  switch (opt.policy) {
    case PolicyKind::builtin_idm_ego: policy = std::make_unique<BuiltinIdmPolicy>(); break;
    case PolicyKind::zero_action: policy = std::make_unique<ZeroActionPolicy>(); break;
    case PolicyKind::external_stdio:
      if (opt.policy_command.empty()) throw UsageError("external-stdio needs --policy-cmd");
      policy = std::make_unique<StdioPolicy>(opt.policy_command);
      break;
  }

  ensure_dir(opt.out);
  Environment env(std::move(scenario));
  auto trace = open_out(opt.out / "trace.csv");
  env.set_trace_sink(&trace);
  run_episode(env, *policy);
  trace.close();
  if (!trace) throw IoError("writing trace.csv failed");
  write_file(opt.out / "summary.json", env.episode_summary_json());

  static constexpr const char* kPolicyNames[] = {"builtin-idm-ego", "zero-action", "external-stdio"};
  RunManifest m{"simulate", {scenario_path}, opt.seed, opt.out.string(), {}};
  m.options = {{"policy", kPolicyNames[static_cast<int>(opt.policy)]},
               {"max_steps", fmt::format("{}", env.scenario().config.max_steps)},
               {"dt", fmt::format("{}", env.scenario().config.dt)}};
  if (opt.policy == PolicyKind::external_stdio) m.options.emplace_back("policy_cmd", opt.policy_command);
  write_manifest(opt.out, m);
}

// ---------------------------------------------------------------------------

void write_manifest(const fs::path& dir, const RunManifest& m) {
  ojson root = ojson::object();
  root["command"] = m.command;
  root["tool_version"] = kToolVersion;
  root["seed"] = m.seed;
  root["inputs"] = m.inputs;
  root["output_dir"] = m.output_dir;
  ojson options = ojson::object();
  for (const auto& [k, v] : m.options) options[k] = v;
  root["options"] = std::move(options);
  write_file(dir / "manifest.json", root.dump(2) + "\n");
}

}  // namespace idmgym::cli
