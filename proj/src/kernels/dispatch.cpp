#include <atomic>
#include <cstdlib>
#include <string_view>

#include <fmt/format.h>

#include "idmgym/errors.hpp"
#include "kernels_impl.hpp"

namespace idmgym::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(IDMGYM_HAVE_AVX2)
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

void require(Isa isa) {
  if (isa != Isa::scalar && !cpu_has_avx2()) {
    throw UsageError(fmt::format("kernel ISA {} is not available here", to_string(isa)));
  }
}

Isa initial_isa() noexcept {
  if (const char* forced = std::getenv("IDMGYM_ISA")) {
    const std::string_view name(forced);
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2" && cpu_has_avx2()) return Isa::avx2;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& active() noexcept {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

void check_columns(const ObservationColumns& obs, bool need_obs) {
  const auto n = obs.v.size();
  if (obs.delta_v.size() != n || obs.gap.size() != n || (need_obs && obs.a_obs.size() != n)) {
    throw InputDomainError("kernel columns have mismatched lengths");
  }
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  require(isa);
  active().store(isa, std::memory_order_relaxed);
}

double idm_residual_sum_sq(Isa isa, const IdmCoefficients& c, const ObservationColumns& obs) {
  require(isa);
  check_columns(obs, true);
#if defined(IDMGYM_HAVE_AVX2)
  if (isa == Isa::avx2) {
    return detail::idm_residual_sum_sq_avx2(c, obs.v.data(), obs.delta_v.data(), obs.gap.data(),
                                            obs.a_obs.data(), obs.size());
  }
#endif
  (void)isa;
  return detail::idm_residual_sum_sq_scalar(c, obs.v.data(), obs.delta_v.data(), obs.gap.data(),
                                            obs.a_obs.data(), obs.size());
}

double idm_residual_sum_sq(const IdmCoefficients& c, const ObservationColumns& obs) {
  return idm_residual_sum_sq(active_isa(), c, obs);
}

void idm_predict(Isa isa, const IdmCoefficients& c, const ObservationColumns& obs,
                 std::span<double> out) {
  require(isa);
  check_columns(obs, false);
  if (out.size() != obs.size()) throw InputDomainError("idm_predict: output size mismatch");
#if defined(IDMGYM_HAVE_AVX2)
  if (isa == Isa::avx2) {
    detail::idm_predict_avx2(c, obs.v.data(), obs.delta_v.data(), obs.gap.data(), out.data(),
                             obs.size());
    return;
  }
#endif
  (void)isa;
  detail::idm_predict_scalar(c, obs.v.data(), obs.delta_v.data(), obs.gap.data(), out.data(),
                             obs.size());
}

void idm_predict(const IdmCoefficients& c, const ObservationColumns& obs, std::span<double> out) {
  idm_predict(active_isa(), c, obs, out);
}

double centered_lag_product(Isa isa, std::span<const double> x, std::size_t lag, double mean) {
  require(isa);
#if defined(IDMGYM_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::centered_lag_product_avx2(x.data(), x.size(), lag, mean);
#endif
  (void)isa;
  return detail::centered_lag_product_scalar(x.data(), x.size(), lag, mean);
}

double centered_lag_product(std::span<const double> x, std::size_t lag, double mean) {
  return centered_lag_product(active_isa(), x, lag, mean);
}

}  // namespace idmgym::kernels
