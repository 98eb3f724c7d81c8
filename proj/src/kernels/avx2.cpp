// Compiled with -mavx2 -mfma. Only reached through the runtime dispatcher.

#include <immintrin.h>

#include <cstddef>
#include <cstdint>

#include "kernels_impl.hpp"

namespace idmgym::kernels::detail {

namespace {

// Cephes-style exp and log on four doubles. Accurate to about 1 ulp over
// the ranges used here (positive normal log arguments, exp >= -708).

inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_floor_pd(
      _mm256_add_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                    _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), x);
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009e0));
  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(r, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // 2^n through the exponent field; n is in [-1021, 1023] after clamping.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                      _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(bits));
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
}

inline __m256d log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256d two52 = _mm256_set1_pd(4503599627370496.0);
  const __m256i raw_exp = _mm256_srli_epi64(bits, 52);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(raw_exp, _mm256_castpd_si256(two52))), two52);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1022.0));

  // Mantissa in [0.5, 1).
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
                      _mm256_set1_epi64x(0x3FE0000000000000LL)));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, one));
  m = _mm256_blendv_pd(_mm256_sub_pd(m, one), _mm256_sub_pd(_mm256_add_pd(m, m), one), small);

  const __m256d z = _mm256_mul_pd(m, m);
  __m256d p = _mm256_set1_pd(1.01875663804580931796e-4);
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(4.97494994976747001425e-1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(4.70579119878881725854e0));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(1.44989225341610930846e1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(1.79368678507819816313e1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(7.70838733755885391666e0));
  __m256d q = _mm256_add_pd(m, _mm256_set1_pd(1.12873587189167450590e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(4.52279145837532221105e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(8.29875266912776603211e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(7.11544750618563894466e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(2.31251620126765340583e1));

  __m256d y = _mm256_mul_pd(m, _mm256_div_pd(_mm256_mul_pd(z, p), q));
  y = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(z, _mm256_set1_pd(0.5), y);
  __m256d res = _mm256_add_pd(m, y);
  return _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), res);
}

struct IdmVec {
  __m256d a_max, v_des, d_min, T, delta, two_sqrt_ab;
};

inline IdmVec broadcast(const IdmCoefficients& c) {
  // Scalar sqrt on purpose: the same value the reference path divides by.
  const __m128d ab = _mm_sqrt_sd(_mm_setzero_pd(), _mm_set_sd(c.a_max * c.a_comf));
  const double two_sqrt_ab = 2.0 * _mm_cvtsd_f64(ab);
  return {_mm256_set1_pd(c.a_max), _mm256_set1_pd(c.v_des), _mm256_set1_pd(c.d_min),
          _mm256_set1_pd(c.T),     _mm256_set1_pd(c.delta), _mm256_set1_pd(two_sqrt_ab)};
}

inline __m256d idm4(const IdmVec& k, __m256d v, __m256d dv, __m256d gap) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d d_des = _mm256_add_pd(_mm256_add_pd(k.d_min, _mm256_mul_pd(v, k.T)),
                                _mm256_div_pd(_mm256_mul_pd(v, dv), k.two_sqrt_ab));
  d_des = _mm256_max_pd(d_des, zero);

  const __m256d ratio_v = _mm256_div_pd(v, k.v_des);
  // pow(r, delta) = exp(delta * log r); r below the normal range is treated as 0.
  const __m256d tiny = _mm256_cmp_pd(ratio_v, _mm256_set1_pd(2.2250738585072014e-308), _CMP_LT_OQ);
  const __m256d safe = _mm256_blendv_pd(ratio_v, _mm256_set1_pd(1.0), tiny);
  __m256d free_term = exp_pd(_mm256_mul_pd(k.delta, log_pd(safe)));
  free_term = _mm256_blendv_pd(free_term, zero, tiny);

  const __m256d ratio = _mm256_div_pd(d_des, gap);
  const __m256d inner =
      _mm256_sub_pd(_mm256_sub_pd(_mm256_set1_pd(1.0), free_term), _mm256_mul_pd(ratio, ratio));
  return _mm256_mul_pd(k.a_max, inner);
}

inline __m256i tail_mask(std::size_t remaining) {
  const __m256i lane = _mm256_set_epi64x(3, 2, 1, 0);
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(remaining)), lane);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double idm_residual_sum_sq_avx2(const IdmCoefficients& c, const double* v, const double* dv,
                                const double* gap, const double* a_obs, std::size_t n) {
  const IdmVec k = broadcast(c);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = idm4(k, _mm256_loadu_pd(v + i), _mm256_loadu_pd(dv + i),
                           _mm256_loadu_pd(gap + i));
    const __m256d r = _mm256_sub_pd(a, _mm256_loadu_pd(a_obs + i));
    acc = _mm256_fmadd_pd(r, r, acc);
  }
  if (i < n) {
    const __m256i m = tail_mask(n - i);
    const __m256d a = idm4(k, _mm256_maskload_pd(v + i, m), _mm256_maskload_pd(dv + i, m),
                           _mm256_maskload_pd(gap + i, m));
    __m256d r = _mm256_sub_pd(a, _mm256_maskload_pd(a_obs + i, m));
    r = _mm256_blendv_pd(_mm256_setzero_pd(), r, _mm256_castsi256_pd(m));
    acc = _mm256_fmadd_pd(r, r, acc);
  }
  return hsum(acc);
}

void idm_predict_avx2(const IdmCoefficients& c, const double* v, const double* dv,
                      const double* gap, double* out, std::size_t n) {
  const IdmVec k = broadcast(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, idm4(k, _mm256_loadu_pd(v + i), _mm256_loadu_pd(dv + i),
                                   _mm256_loadu_pd(gap + i)));
  }
  if (i < n) {
    const __m256i m = tail_mask(n - i);
    _mm256_maskstore_pd(out + i, m,
                        idm4(k, _mm256_maskload_pd(v + i, m), _mm256_maskload_pd(dv + i, m),
                             _mm256_maskload_pd(gap + i, m)));
  }
}

double centered_lag_product_avx2(const double* x, std::size_t n, std::size_t lag, double mean) {
  if (lag >= n) return 0.0;
  const std::size_t count = n - lag;
  const __m256d mu = _mm256_set1_pd(mean);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= count; i += 8) {
    const __m256d a0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), mu);
    const __m256d b0 = _mm256_sub_pd(_mm256_loadu_pd(x + i + lag), mu);
    const __m256d a1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), mu);
    const __m256d b1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + lag + 4), mu);
    acc0 = _mm256_fmadd_pd(a0, b0, acc0);
    acc1 = _mm256_fmadd_pd(a1, b1, acc1);
  }
  for (; i < count; i += 4) {
    const __m256i m = tail_mask(count - i);
    const __m256d md = _mm256_castsi256_pd(m);
    const __m256d a = _mm256_and_pd(_mm256_sub_pd(_mm256_maskload_pd(x + i, m), mu), md);
    const __m256d b = _mm256_and_pd(_mm256_sub_pd(_mm256_maskload_pd(x + i + lag, m), mu), md);
    acc0 = _mm256_fmadd_pd(a, b, acc0);
  }
  return hsum(_mm256_add_pd(acc0, acc1));
}

}  // namespace idmgym::kernels::detail
