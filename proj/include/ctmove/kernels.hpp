#pragma once

#include <cstddef>
#include <string_view>

namespace ctmove::kernels {

// Hot arithmetic loops of the likelihood and diagnostics code, provided as a
// scalar reference implementation plus SIMD variants selected at runtime.
// The active backend can be forced through set_backend() or the
// CTMOVE_KERNELS environment variable (scalar | avx2 | neon | auto); by
// default the best supported variant is picked once at first use.
//
// All variants compute the same sums up to summation order, so results agree
// to roundoff but are not bit-identical across backends. Within one backend
// the output is deterministic.

enum class Backend { scalar, avx2, neon };

bool backend_supported(Backend b);
// Returns false (and leaves the dispatch unchanged) if unsupported.
bool set_backend(Backend b);
Backend active_backend();
std::string_view backend_name(Backend b);
// Parses "scalar" / "avx2" / "neon" / "auto"; auto re-runs detection.
bool set_backend_by_name(std::string_view name);

// Sum over i < n of (x[i+1] - decay[i]*x[i] - offset[i])^2 * inv_var[i]
//                   + log_var[i].
// x must have n+1 entries. This is the -2 log-likelihood of a Gaussian AR(1)
// sequence up to the n*log(2*pi) constant; bearings use decay = 1, offset = 0.
double ar1_gauss_deviance(const double* x, const double* decay, const double* offset,
                          const double* inv_var, const double* log_var, std::size_t n);

// Sum over i < n of x[i] * x[i + lag]; x must have n + lag entries.
// lag = 0 gives the sum of squares. Used for autocovariances.
double shifted_dot(const double* x, std::size_t n, std::size_t lag);

namespace detail {
double ar1_gauss_deviance_scalar(const double* x, const double* decay, const double* offset,
                                 const double* inv_var, const double* log_var, std::size_t n);
double shifted_dot_scalar(const double* x, std::size_t n, std::size_t lag);
#if defined(__x86_64__) || defined(_M_X64)
double ar1_gauss_deviance_avx2(const double* x, const double* decay, const double* offset,
                               const double* inv_var, const double* log_var, std::size_t n);
double shifted_dot_avx2(const double* x, std::size_t n, std::size_t lag);
#endif
#if defined(__aarch64__)
double ar1_gauss_deviance_neon(const double* x, const double* decay, const double* offset,
                               const double* inv_var, const double* log_var, std::size_t n);
double shifted_dot_neon(const double* x, std::size_t n, std::size_t lag);
#endif
}  // namespace detail

}  // namespace ctmove::kernels
