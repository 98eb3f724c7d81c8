#include "idmgym/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "idmgym/errors.hpp"
#include "idmgym/kernels.hpp"

namespace idmgym {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void ProposalConfig::validate() const {
  if (sigma.empty()) throw InputDomainError("proposal: sigma is empty");
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!std::isfinite(sigma[i]) || sigma[i] <= 0.0) {
      throw InputDomainError(fmt::format("proposal: sigma[{}] must be > 0 (got {})", i, sigma[i]));
    }
  }
  if (n_iter <= burn_in) {
    throw InputDomainError(
        fmt::format("proposal: n_iter ({}) must exceed burn_in ({})", n_iter, burn_in));
  }
  if (thin == 0) throw InputDomainError("proposal: thin must be >= 1");
}

// ---------------------------------------------------------------------------
// Generic core

std::vector<double> propose(std::span<const double> curr, std::span<const double> sigma, Rng& rng) {
  if (curr.size() != sigma.size()) throw InputDomainError("propose: dimension mismatch");
  std::vector<double> out(curr.begin(), curr.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma[i] * standard_normal(rng);
  return out;
}

double transition_log_density(std::span<const double> to, std::span<const double> from,
                              std::span<const double> sigma) {
  if (to.size() != from.size() || to.size() != sigma.size()) {
    throw InputDomainError("transition_log_density: dimension mismatch");
  }
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lq = 0.0;
  for (std::size_t i = 0; i < to.size(); ++i) {
    const double z = (to[i] - from[i]) / sigma[i];
    lq += -half_log_two_pi - std::log(sigma[i]) - 0.5 * z * z;
  }
  return lq;
}

double log_acceptance(double log_target_prop, double log_target_curr, double log_q_reverse,
                      double log_q_forward) {
  if (std::isnan(log_target_prop) || log_target_prop == kNegInf) return kNegInf;
  const double ratio = (log_target_prop + log_q_reverse) - (log_target_curr + log_q_forward);
  return std::min(0.0, ratio);
}

bool mh_step(MhState& state, const LogDensityFn& target, std::span<const double> sigma, Rng& rng) {
  auto prop = propose(state.x, sigma, rng);
  const double lp = target(prop);
  const double u = uniform01(rng);
  const double la = log_acceptance(lp, state.log_target, transition_log_density(state.x, prop, sigma),
                                   transition_log_density(prop, state.x, sigma));
  // u in [0, 1): la == 0 always accepts, la == -inf never does.
  if (!(std::log(u) < la)) return false;
  state.x = std::move(prop);
  state.log_target = lp;
  return true;
}

std::vector<double> SampleChain::coordinate(std::size_t k) const {
  if (k >= dim) throw InputDomainError("SampleChain::coordinate: index out of range");
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i * dim + k];
  return out;
}

SampleChain run_chain(const LogDensityFn& target, const ProposalConfig& cfg,
                      std::span<const double> init) {
  cfg.validate();
  if (init.size() != cfg.sigma.size()) throw InputDomainError("run_chain: init/sigma dimension mismatch");

  MhState state{{init.begin(), init.end()}, target(init)};
  if (!(state.log_target > kNegInf)) {
    throw InputDomainError("run_chain: initial point has zero target density");
  }

  SampleChain chain;
  chain.dim = init.size();
  chain.config = cfg;
  const std::size_t kept = (cfg.n_iter - cfg.burn_in + cfg.thin - 1) / cfg.thin;
  chain.values.reserve(kept * chain.dim);
  chain.log_targets.reserve(kept);

  Rng rng(cfg.seed);
  for (std::size_t it = 0; it < cfg.n_iter; ++it) {
    const bool accepted = mh_step(state, target, cfg.sigma, rng);
    if (accepted) ++chain.accept_count;
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      chain.values.insert(chain.values.end(), state.x.begin(), state.x.end());
      chain.log_targets.push_back(state.log_target);
      chain.iters.push_back(it);
      chain.accepted.push_back(accepted ? 1 : 0);
    }
  }
  return chain;
}

LogDensityFn gaussian_log_density(double mean, double sd) {
  if (!(sd > 0.0)) throw InputDomainError("gaussian_log_density: sd must be > 0");
  return [mean, sd](std::span<const double> x) {
    const double z = (x[0] - mean) / sd;
    return -0.5 * z * z;
  };
}

LogDensityFn discrete_log_density(std::vector<double> masses) {
  if (masses.empty()) throw InputDomainError("discrete_log_density: no states");
  for (double m : masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw InputDomainError("discrete_log_density: bad mass");
  }
  return [masses = std::move(masses)](std::span<const double> x) {
    const double k = std::floor(x[0]);
    if (!(k >= 0.0) || k >= static_cast<double>(masses.size())) return kNegInf;
    const double m = masses[static_cast<std::size_t>(k)];
    return m > 0.0 ? std::log(m) : kNegInf;
  };
}

// ---------------------------------------------------------------------------
// IDM calibration

bool PriorBounds::contains(const ParamSet& p) const noexcept {
  const auto v = p.to_array();
  for (std::size_t i = 0; i < ParamSet::kSize; ++i) {
    if (!(v[i] > lower[i] && v[i] <= upper[i])) return false;
  }
  return true;
}

ParamSet PriorBounds::center() const noexcept {
  std::array<double, ParamSet::kSize> c{};
  for (std::size_t i = 0; i < ParamSet::kSize; ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return ParamSet::from_array(c);
}

void PriorBounds::validate() const {
  for (std::size_t i = 0; i < ParamSet::kSize; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] < 0.0 ||
        !(upper[i] > lower[i])) {
      throw ConfigError(fmt::format("prior bounds for {}: need 0 <= lower < upper",
                                    ParamSet::kNames[i]));
    }
  }
}

ProposalConfig default_proposal(const PriorBounds& prior, std::size_t n_iter, std::uint64_t seed,
                                double width_fraction) {
  ProposalConfig cfg;
  cfg.sigma.resize(ParamSet::kSize);
  for (std::size_t i = 0; i < ParamSet::kSize; ++i) {
    cfg.sigma[i] = width_fraction * (prior.upper[i] - prior.lower[i]);
  }
  cfg.seed = seed;
  cfg.n_iter = n_iter;
  cfg.burn_in = n_iter / 5;
  cfg.thin = 1;
  return cfg;
}

TargetDensity::TargetDensity(Trajectory obs, double noise_sigma, PriorBounds prior,
                             Objective objective)
    : obs_(std::move(obs)), noise_sigma_(noise_sigma), prior_(prior), objective_(objective) {
  if (obs_.empty()) throw InputDomainError("TargetDensity: empty trajectory");
  obs_.validate();
  if (!std::isfinite(noise_sigma_) || noise_sigma_ <= 0.0) {
    throw InputDomainError(fmt::format("TargetDensity: noise_sigma must be > 0 (got {})", noise_sigma_));
  }
  prior_.validate();
  const auto n = obs_.size();
  v_.resize(n);
  dv_.resize(n);
  gap_.resize(n);
  a_obs_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = obs_.samples[i];
    v_[i] = s.v_ego;
    dv_[i] = s.v_ego - s.v_leader;
    gap_[i] = s.gap;
    a_obs_[i] = s.a_obs;
  }
}

void TargetDensity::pin_delta(double value) {
  if (!std::isfinite(value) || value <= prior_.lower[5] || value > prior_.upper[5]) {
    throw ConfigError(fmt::format("pinned delta {} lies outside the prior box", value));
  }
  pinned_delta_ = value;
}

double TargetDensity::operator()(const ParamSet& p) const {
  if (!p.is_valid() || !prior_.contains(p)) return kNegInf;
  if (pinned_delta_ && p.delta != *pinned_delta_) return kNegInf;
  double sum_sq = 0.0;
  if (objective_ == Objective::one_step) {
    sum_sq = kernels::idm_residual_sum_sq({p.a_max, p.a_comf, p.v_des, p.d_min, p.T, p.delta},
                                          {v_, dv_, gap_, a_obs_});
  } else {
    const double rmse = rollout_rmse_objective(obs_, p);
    sum_sq = static_cast<double>(obs_.size()) * rmse * rmse;
  }
  if (!std::isfinite(sum_sq)) return kNegInf;
  return -sum_sq / (2.0 * noise_sigma_ * noise_sigma_);
}

std::vector<double> TargetDensity::predictions(const ParamSet& p) const {
  std::vector<double> out(v_.size());
  kernels::idm_predict({p.a_max, p.a_comf, p.v_des, p.d_min, p.T, p.delta}, {v_, dv_, gap_, {}},
                       out);
  return out;
}

double log_target(const TargetDensity& td, const ParamSet& p) { return td(p); }

ParamSet propose(const ParamSet& curr, const ProposalConfig& cfg, Rng& rng) {
  if (cfg.sigma.size() != ParamSet::kSize) throw InputDomainError("propose: need 6 sigmas");
  const auto x = curr.to_array();
  const auto y = propose(x, cfg.sigma, rng);
  return ParamSet::from_array(std::span<const double, ParamSet::kSize>(y.data(), ParamSet::kSize));
}

double transition_log_density(const ParamSet& to, const ParamSet& from, const ProposalConfig& cfg) {
  if (cfg.sigma.size() != ParamSet::kSize) {
    throw InputDomainError("transition_log_density: need 6 sigmas");
  }
  return transition_log_density(to.to_array(), from.to_array(), cfg.sigma);
}

namespace {

// Maps the free coordinates of a ParamSet (all six, or five with delta
// pinned) to and from the flat vectors the generic core works on.
struct FreeCoordinates {
  std::size_t dim;
  std::optional<double> pinned_delta;

  explicit FreeCoordinates(const TargetDensity& td)
      : dim(td.pinned_delta() ? ParamSet::kSize - 1 : ParamSet::kSize),
        pinned_delta(td.pinned_delta()) {}

  [[nodiscard]] std::vector<double> pack(const ParamSet& p) const {
    const auto a = p.to_array();
    return {a.begin(), a.begin() + static_cast<std::ptrdiff_t>(dim)};
  }
  [[nodiscard]] ParamSet unpack(std::span<const double> x) const {
    std::array<double, ParamSet::kSize> a{};
    std::copy(x.begin(), x.end(), a.begin());
    if (pinned_delta) a[5] = *pinned_delta;
    return ParamSet::from_array(a);
  }
  [[nodiscard]] std::vector<double> sigma(const ProposalConfig& cfg) const {
    if (cfg.sigma.size() != ParamSet::kSize) throw InputDomainError("IDM proposal needs 6 sigmas");
    return {cfg.sigma.begin(), cfg.sigma.begin() + static_cast<std::ptrdiff_t>(dim)};
  }
  [[nodiscard]] LogDensityFn density(const TargetDensity& td) const {
    return [this, &td](std::span<const double> x) { return td(unpack(x)); };
  }
};

}  // namespace

ParamStep mh_step(const ParamSet& curr, double curr_log_target, const TargetDensity& td,
                  const ProposalConfig& cfg, Rng& rng) {
  const FreeCoordinates free(td);
  MhState state{free.pack(curr), curr_log_target};
  const bool accepted = mh_step(state, free.density(td), free.sigma(cfg), rng);
  return {free.unpack(state.x), state.log_target, accepted};
}

Chain run_chain(const TargetDensity& td, const ProposalConfig& cfg, const ParamSet& init) {
  cfg.validate();
  const FreeCoordinates free(td);
  if (free.pinned_delta && init.delta != *free.pinned_delta) {
    throw InputDomainError("run_chain: initial delta differs from the pinned value");
  }
  if (!init.is_valid() || !td.prior().contains(init)) {
    throw InputDomainError("run_chain: initial parameters lie outside the prior box");
  }
  ProposalConfig inner = cfg;
  inner.sigma = free.sigma(cfg);
  const auto generic = run_chain(free.density(td), inner, free.pack(init));

  Chain chain;
  chain.config = cfg;
  chain.accept_count = generic.accept_count;
  chain.samples.reserve(generic.size());
  for (std::size_t i = 0; i < generic.size(); ++i) {
    chain.samples.push_back({generic.iters[i], free.unpack(generic.row(i)), generic.log_targets[i],
                             generic.accepted[i] != 0});
  }
  return chain;
}

std::vector<double> Chain::coordinate(std::size_t param_index) const {
  if (param_index >= ParamSet::kSize) throw InputDomainError("Chain::coordinate: bad index");
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.params.to_array()[param_index]);
  return out;
}

ParamSet Chain::mean() const {
  if (samples.empty()) throw InputDomainError("Chain::mean: empty chain");
  std::array<double, ParamSet::kSize> acc{};
  for (const auto& s : samples) {
    const auto a = s.params.to_array();
    for (std::size_t i = 0; i < ParamSet::kSize; ++i) acc[i] += a[i];
  }
  for (auto& x : acc) x /= static_cast<double>(samples.size());
  return ParamSet::from_array(acc);
}

// ---------------------------------------------------------------------------
// Diagnostics

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) {
    throw InputDomainError(fmt::format("autocorrelation: series length {} <= max_lag {}", n, max_lag));
  }
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) throw DegenerateSeriesError("autocorrelation: constant series");

  double sum = 0.0;
  for (double x : series) sum += x;
  const double mean = sum / static_cast<double>(n);
  const double c0 = kernels::centered_lag_product(series, 0, mean);

  std::vector<double> acf(max_lag + 1);
  acf[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    acf[k] = kernels::centered_lag_product(series, k, mean) / c0;
  }
  return acf;
}

Histogram posterior_histogram(const Chain& chain, std::size_t param_index, std::size_t n_bins) {
  if (chain.samples.empty()) throw InputDomainError("posterior_histogram: empty chain");
  return histogram_from_samples(chain.coordinate(param_index), n_bins);
}

void write_chain_csv(std::ostream& out, const Chain& chain) {
  out << "iter,a_max,a_comf,v_des,d_min,T,delta,log_target,accepted\n";
  for (const auto& s : chain.samples) {
    const auto& p = s.params;
    fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", s.iter, p.a_max, p.a_comf, p.v_des, p.d_min,
               p.T, p.delta, s.log_target, s.accepted ? 1 : 0);
  }
}

void write_chain_csv(const std::filesystem::path& path, const Chain& chain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  write_chain_csv(out, chain);
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

}  // namespace idmgym
