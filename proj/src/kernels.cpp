#include "ctmove/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace ctmove::kernels {

namespace detail {

double ar1_gauss_deviance_scalar(const double* x, const double* decay, const double* offset,
                                 const double* inv_var, const double* log_var, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = x[i + 1] - decay[i] * x[i] - offset[i];
    acc += r * r * inv_var[i] + log_var[i];
  }
  return acc;
}

double shifted_dot_scalar(const double* x, std::size_t n, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i + lag];
  return acc;
}

}  // namespace detail

namespace {

Backend detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
#endif
#if defined(__aarch64__)
  return Backend::neon;
#endif
  return Backend::scalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("CTMOVE_KERNELS")) {
    const std::string_view v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && backend_supported(Backend::avx2)) return Backend::avx2;
    if (v == "neon" && backend_supported(Backend::neon)) return Backend::neon;
  }
  return detect_best();
}

std::atomic<Backend>& active_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

bool set_backend(Backend b) {
  if (!backend_supported(b)) return false;
  active_slot().store(b, std::memory_order_relaxed);
  return true;
}

Backend active_backend() { return active_slot().load(std::memory_order_relaxed); }

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "scalar";
}

bool set_backend_by_name(std::string_view name) {
  if (name == "auto") {
    active_slot().store(detect_best(), std::memory_order_relaxed);
    return true;
  }
  if (name == "scalar") return set_backend(Backend::scalar);
  if (name == "avx2") return set_backend(Backend::avx2);
  if (name == "neon") return set_backend(Backend::neon);
  return false;
}

double ar1_gauss_deviance(const double* x, const double* decay, const double* offset,
                          const double* inv_var, const double* log_var, std::size_t n) {
  switch (active_backend()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2:
      return detail::ar1_gauss_deviance_avx2(x, decay, offset, inv_var, log_var, n);
#endif
#if defined(__aarch64__)
    case Backend::neon:
      return detail::ar1_gauss_deviance_neon(x, decay, offset, inv_var, log_var, n);
#endif
    default:
      return detail::ar1_gauss_deviance_scalar(x, decay, offset, inv_var, log_var, n);
  }
}

double shifted_dot(const double* x, std::size_t n, std::size_t lag) {
  switch (active_backend()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2:
      return detail::shifted_dot_avx2(x, n, lag);
#endif
#if defined(__aarch64__)
    case Backend::neon:
      return detail::shifted_dot_neon(x, n, lag);
#endif
    default:
      return detail::shifted_dot_scalar(x, n, lag);
  }
}

}  // namespace ctmove::kernels
