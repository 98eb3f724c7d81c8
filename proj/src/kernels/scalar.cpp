#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace idmgym::kernels::detail {

namespace {
// Same operation order as idm_acceleration so results match it exactly.
inline double idm_one(const IdmCoefficients& c, double two_sqrt_ab, double v, double dv,
                      double gap) {
  const double d_des = std::max(c.d_min + v * c.T + v * dv / two_sqrt_ab, 0.0);
  const double free_term = std::pow(v / c.v_des, c.delta);
  const double ratio = d_des / gap;
  return c.a_max * (1.0 - free_term - ratio * ratio);
}
}  // namespace

double idm_residual_sum_sq_scalar(const IdmCoefficients& c, const double* v, const double* dv,
                                  const double* gap, const double* a_obs, std::size_t n) {
  const double two_sqrt_ab = 2.0 * std::sqrt(c.a_max * c.a_comf);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = idm_one(c, two_sqrt_ab, v[i], dv[i], gap[i]) - a_obs[i];
    sum += r * r;
  }
  return sum;
}

void idm_predict_scalar(const IdmCoefficients& c, const double* v, const double* dv,
                        const double* gap, double* out, std::size_t n) {
  const double two_sqrt_ab = 2.0 * std::sqrt(c.a_max * c.a_comf);
  for (std::size_t i = 0; i < n; ++i) out[i] = idm_one(c, two_sqrt_ab, v[i], dv[i], gap[i]);
}

double centered_lag_product_scalar(const double* x, std::size_t n, std::size_t lag, double mean) {
  double sum = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) sum += (x[i] - mean) * (x[i + lag] - mean);
  return sum;
}

}  // namespace idmgym::kernels::detail
