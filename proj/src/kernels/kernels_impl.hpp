#pragma once

// Raw-pointer entry points of each ISA variant. Kept free of templates so
// the AVX2 translation unit does not emit inline code other units could
// pick up.

#include <cstddef>

#include "idmgym/kernels.hpp"

namespace idmgym::kernels::detail {

double idm_residual_sum_sq_scalar(const IdmCoefficients& c, const double* v, const double* dv,
                                  const double* gap, const double* a_obs, std::size_t n);
void idm_predict_scalar(const IdmCoefficients& c, const double* v, const double* dv,
                        const double* gap, double* out, std::size_t n);
double centered_lag_product_scalar(const double* x, std::size_t n, std::size_t lag, double mean);

#if defined(IDMGYM_HAVE_AVX2)
double idm_residual_sum_sq_avx2(const IdmCoefficients& c, const double* v, const double* dv,
                                const double* gap, const double* a_obs, std::size_t n);
void idm_predict_avx2(const IdmCoefficients& c, const double* v, const double* dv,
                      const double* gap, double* out, std::size_t n);
double centered_lag_product_avx2(const double* x, std::size_t n, std::size_t lag, double mean);
#endif

}  // namespace idmgym::kernels::detail
