// NEON kernel variants for aarch64. Baseline on that target, so no runtime
// feature probe is needed beyond the architecture itself.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstddef>

namespace ctmove::kernels::detail {

double ar1_gauss_deviance_neon(const double* x, const double* decay, const double* offset,
                               const double* inv_var, const double* log_var, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float64x2_t r0 = vsubq_f64(vld1q_f64(x + i + 1),
                               vfmaq_f64(vld1q_f64(offset + i), vld1q_f64(decay + i),
                                         vld1q_f64(x + i)));
    acc0 = vaddq_f64(acc0, vfmaq_f64(vld1q_f64(log_var + i), vmulq_f64(r0, r0),
                                     vld1q_f64(inv_var + i)));
    float64x2_t r1 = vsubq_f64(vld1q_f64(x + i + 3),
                               vfmaq_f64(vld1q_f64(offset + i + 2), vld1q_f64(decay + i + 2),
                                         vld1q_f64(x + i + 2)));
    acc1 = vaddq_f64(acc1, vfmaq_f64(vld1q_f64(log_var + i + 2), vmulq_f64(r1, r1),
                                     vld1q_f64(inv_var + i + 2)));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) {
    const double r = x[i + 1] - decay[i] * x[i] - offset[i];
    acc += r * r * inv_var[i] + log_var[i];
  }
  return acc;
}

double shifted_dot_neon(const double* x, std::size_t n, std::size_t lag) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(x + i + lag));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(x + i + 2 + lag));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += x[i] * x[i + lag];
  return acc;
}

}  // namespace ctmove::kernels::detail

#endif  // __aarch64__
