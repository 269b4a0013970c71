// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers must only reach it through the runtime dispatch.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace ctmove::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

double ar1_gauss_deviance_avx2(const double* x, const double* decay, const double* offset,
                               const double* inv_var, const double* log_var, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d x0 = _mm256_loadu_pd(x + i);
    __m256d x0n = _mm256_loadu_pd(x + i + 1);
    __m256d r0 = _mm256_sub_pd(x0n, _mm256_fmadd_pd(_mm256_loadu_pd(decay + i), x0,
                                                    _mm256_loadu_pd(offset + i)));
    acc0 = _mm256_add_pd(acc0, _mm256_fmadd_pd(_mm256_mul_pd(r0, r0),
                                               _mm256_loadu_pd(inv_var + i),
                                               _mm256_loadu_pd(log_var + i)));
    __m256d x1 = _mm256_loadu_pd(x + i + 4);
    __m256d x1n = _mm256_loadu_pd(x + i + 5);
    __m256d r1 = _mm256_sub_pd(x1n, _mm256_fmadd_pd(_mm256_loadu_pd(decay + i + 4), x1,
                                                    _mm256_loadu_pd(offset + i + 4)));
    acc1 = _mm256_add_pd(acc1, _mm256_fmadd_pd(_mm256_mul_pd(r1, r1),
                                               _mm256_loadu_pd(inv_var + i + 4),
                                               _mm256_loadu_pd(log_var + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    __m256d xn = _mm256_loadu_pd(x + i + 1);
    __m256d r = _mm256_sub_pd(xn, _mm256_fmadd_pd(_mm256_loadu_pd(decay + i), xv,
                                                  _mm256_loadu_pd(offset + i)));
    acc0 = _mm256_add_pd(acc0, _mm256_fmadd_pd(_mm256_mul_pd(r, r),
                                               _mm256_loadu_pd(inv_var + i),
                                               _mm256_loadu_pd(log_var + i)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double r = x[i + 1] - decay[i] * x[i] - offset[i];
    acc += r * r * inv_var[i] + log_var[i];
  }
  return acc;
}

double shifted_dot_avx2(const double* x, std::size_t n, std::size_t lag) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(x + i + lag), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(x + i + 4 + lag), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(x + i + lag), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * x[i + lag];
  return acc;
}

}  // namespace ctmove::kernels::detail

#endif  // x86_64
