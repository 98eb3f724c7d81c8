#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference and, on
// x86-64, an AVX2+FMA variant picked at runtime. Variants agree to a few
// ulp, not bit-for-bit: code that needs bit reproducibility across machines
// should pin the ISA with set_isa(Isa::scalar) or IDMGYM_ISA=scalar.

#include <cstddef>
#include <span>
#include <string_view>

namespace idmgym::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

/// IDM parameters as plain numbers; kernels do no validation.
struct IdmCoefficients {
  double a_max;
  double a_comf;
  double v_des;
  double d_min;
  double T;
  double delta;
};

/// Structure-of-arrays view of observed follower states.
struct ObservationColumns {
  std::span<const double> v;
  std::span<const double> delta_v;
  std::span<const double> gap;
  std::span<const double> a_obs;  ///< may be empty for idm_predict

  [[nodiscard]] std::size_t size() const noexcept { return v.size(); }
};

bool isa_supported(Isa isa) noexcept;
/// Best supported ISA, unless overridden by set_isa or IDMGYM_ISA.
Isa active_isa() noexcept;
/// Throws UsageError when the ISA is not available on this CPU/build.
void set_isa(Isa isa);

/// Sum over i of (idm(v_i, dv_i, gap_i) - a_obs_i)^2.
double idm_residual_sum_sq(const IdmCoefficients& c, const ObservationColumns& obs);
double idm_residual_sum_sq(Isa isa, const IdmCoefficients& c, const ObservationColumns& obs);

/// out_i = idm(v_i, dv_i, gap_i).
void idm_predict(const IdmCoefficients& c, const ObservationColumns& obs, std::span<double> out);
void idm_predict(Isa isa, const IdmCoefficients& c, const ObservationColumns& obs,
                 std::span<double> out);

/// Sum over i < n - lag of (x_i - mean)(x_{i+lag} - mean).
double centered_lag_product(std::span<const double> x, std::size_t lag, double mean);
double centered_lag_product(Isa isa, std::span<const double> x, std::size_t lag, double mean);

}  // namespace idmgym::kernels
