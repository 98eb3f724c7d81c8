#pragma once

// Random-walk Metropolis-Hastings calibration of IDM parameters against an
// observed follower trajectory, plus chain diagnostics.
//
// The sampler core works on plain coordinate vectors and any log-density
// callable, so it can be checked against targets with known moments. The
// ParamSet layer on top binds it to the trajectory likelihood.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "idmgym/histogram.hpp"
#include "idmgym/model.hpp"
#include "idmgym/rng.hpp"

namespace idmgym {

/// Unnormalized log density over a coordinate vector. Returns -inf for
/// points with zero mass.
using LogDensityFn = std::function<double(std::span<const double>)>;

struct ProposalConfig {
  std::vector<double> sigma;  ///< per-coordinate random-walk std deviation
  std::uint64_t seed = 0;
  std::size_t n_iter = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;

  /// sigma entries > 0, n_iter > burn_in, thin >= 1.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Generic sampler core

/// curr + N(0, diag(sigma^2)). May leave the target's support.
std::vector<double> propose(std::span<const double> curr, std::span<const double> sigma, Rng& rng);

/// log prod_i N(to_i - from_i; 0, sigma_i). Symmetric in (to, from).
double transition_log_density(std::span<const double> to, std::span<const double> from,
                              std::span<const double> sigma);

/// log of the acceptance probability, min(0, forward ratio in log space).
double log_acceptance(double log_target_prop, double log_target_curr, double log_q_reverse,
                      double log_q_forward);

struct MhState {
  std::vector<double> x;
  double log_target = 0.0;
};

/// One Metropolis-Hastings transition. Returns true when the proposal was
/// accepted (state updated in place).
bool mh_step(MhState& state, const LogDensityFn& target, std::span<const double> sigma, Rng& rng);

/// Post-burn-in, thinned record of a generic chain. Values are row-major,
/// one row of `dim` coordinates per stored sample.
struct SampleChain {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<double> log_targets;
  std::vector<std::size_t> iters;
  std::vector<std::uint8_t> accepted;
  std::size_t accept_count = 0;  ///< over all n_iter steps, burn-in included
  ProposalConfig config;

  [[nodiscard]] std::size_t size() const noexcept { return log_targets.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  /// Copy of coordinate `k` across stored samples.
  [[nodiscard]] std::vector<double> coordinate(std::size_t k) const;
};

SampleChain run_chain(const LogDensityFn& target, const ProposalConfig& cfg,
                      std::span<const double> init);

// Density adapters with analytically known answers.
LogDensityFn gaussian_log_density(double mean, double sd);
/// States k = 0..n-1 occupy [k, k+1) on the real line with density masses[k].
LogDensityFn discrete_log_density(std::vector<double> masses);

// ---------------------------------------------------------------------------
// IDM calibration

/// Flat prior on lower < x <= upper per parameter.
struct PriorBounds {
  std::array<double, ParamSet::kSize> lower{0, 0, 0, 0, 0, 0};
  std::array<double, ParamSet::kSize> upper{6, 8, 60, 100, 5, 10};

  [[nodiscard]] bool contains(const ParamSet& p) const noexcept;
  [[nodiscard]] ParamSet center() const noexcept;
  /// lower >= 0, upper > lower, all finite.
  void validate() const;
};

enum class Objective { one_step, rollout };

/// Random-walk sigmas as a fraction of each prior-box width.
ProposalConfig default_proposal(const PriorBounds& prior, std::size_t n_iter, std::uint64_t seed,
                                double width_fraction = 0.02);

/// Gaussian residual likelihood times a flat box prior:
/// log pi(p) = -sum_i r_i^2 / (2 noise_sigma^2) with r_i the acceleration
/// residuals, i.e. -N rmse^2 / (2 noise_sigma^2).
class TargetDensity {
 public:
  explicit TargetDensity(Trajectory obs, double noise_sigma = 0.3, PriorBounds prior = {},
                         Objective objective = Objective::one_step);

  [[nodiscard]] double operator()(const ParamSet& p) const;

  [[nodiscard]] const Trajectory& observations() const noexcept { return obs_; }
  [[nodiscard]] double noise_sigma() const noexcept { return noise_sigma_; }
  [[nodiscard]] const PriorBounds& prior() const noexcept { return prior_; }
  [[nodiscard]] Objective objective() const noexcept { return objective_; }

  /// Hold delta at `value`; the sampler then moves only the other five.
  void pin_delta(double value);
  [[nodiscard]] std::optional<double> pinned_delta() const noexcept { return pinned_delta_; }

  /// One-step IDM predictions at the observed states (dispatched kernel).
  [[nodiscard]] std::vector<double> predictions(const ParamSet& p) const;

 private:
  Trajectory obs_;
  double noise_sigma_;
  PriorBounds prior_;
  Objective objective_;
  std::optional<double> pinned_delta_;
  std::vector<double> v_, dv_, gap_, a_obs_;
};

double log_target(const TargetDensity& td, const ParamSet& p);

ParamSet propose(const ParamSet& curr, const ProposalConfig& cfg, Rng& rng);
double transition_log_density(const ParamSet& to, const ParamSet& from, const ProposalConfig& cfg);

struct ChainSample {
  std::size_t iter = 0;
  ParamSet params;
  double log_target = 0.0;
  bool accepted = false;
};

struct Chain {
  std::vector<ChainSample> samples;
  std::size_t accept_count = 0;
  ProposalConfig config;

  [[nodiscard]] double acceptance_rate() const noexcept {
    return config.n_iter == 0 ? 0.0
                              : static_cast<double>(accept_count) / static_cast<double>(config.n_iter);
  }
  [[nodiscard]] std::vector<double> coordinate(std::size_t param_index) const;
  [[nodiscard]] ParamSet mean() const;
};

struct ParamStep {
  ParamSet next;
  double log_target = 0.0;
  bool accepted = false;
};

/// Requires td(curr) > -inf. `curr_log_target` is td(curr), passed in so
/// callers do not re-evaluate it.
ParamStep mh_step(const ParamSet& curr, double curr_log_target, const TargetDensity& td,
                  const ProposalConfig& cfg, Rng& rng);

/// Throws InputDomainError when init is outside the prior box (or, with a
/// pinned delta, disagrees with the pinned value).
Chain run_chain(const TargetDensity& td, const ProposalConfig& cfg, const ParamSet& init);

// ---------------------------------------------------------------------------
// Diagnostics

/// Biased ACF, lags 0..max_lag. Lag 0 is exactly 1.
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

Histogram posterior_histogram(const Chain& chain, std::size_t param_index, std::size_t n_bins);

/// CSV `iter,a_max,a_comf,v_des,d_min,T,delta,log_target,accepted`.
void write_chain_csv(std::ostream& out, const Chain& chain);
void write_chain_csv(const std::filesystem::path& path, const Chain& chain);

}  // namespace idmgym
