#include "ctmove/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctmove/kernels.hpp"

namespace ctmove {

namespace {

// Initial-positive-sequence autocovariance sum: gamma_0 + 2 sum gamma_k with
// the tail cut at the first negative (gamma_{2m-1} + gamma_{2m}) pair.
// Returns {gamma_0, tail_sum}.
std::pair<double, double> ips_autocov(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> centred(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = x[i] - mean;

  auto gamma = [&](std::size_t lag) {
    return kernels::shifted_dot(centred.data(), n - lag, lag) / static_cast<double>(n);
  };
  const double g0 = gamma(0);
  if (!(g0 > 0.0)) return {g0, 0.0};

  double tail = 0.0;
  for (std::size_t k = 1; k + 1 < n; k += 2) {
    const double pair = gamma(k) + gamma(k + 1);
    if (pair < 0.0) break;
    tail += pair;
  }
  return {g0, tail};
}

}  // namespace

double empirical_quantile(std::span<const double> samples, double p) {
  if (samples.size() < 1) throw std::invalid_argument("empirical_quantile: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

SummaryRow quantile_summary(std::span<const double> samples, std::string name) {
  if (samples.size() < 2) throw std::invalid_argument("quantile_summary: need >= 2 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[hi] * w;
  };
  return {std::move(name), q(0.05), q(0.50), q(0.95)};
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw std::invalid_argument("effective_sample_size: chain too short");
  const auto [g0, tail] = ips_autocov(chain);
  if (!(g0 > 0.0)) return 1.0;  // constant chain
  const double tau = 1.0 + 2.0 * tail / g0;
  const double ess = static_cast<double>(n) / tau;
  return std::clamp(ess, 1.0, static_cast<double>(n));
}

HeidelbergerWelch heidelberger_welch(std::span<const double> chain, double alpha) {
  const std::size_t n_full = chain.size();
  if (n_full < 100) throw std::invalid_argument("heidelberger_welch: chain too short");

  // Cramer-von Mises asymptotic critical values (upper tail).
  struct Crit {
    double alpha, value;
  };
  static constexpr Crit table[] = {{0.10, 0.347}, {0.05, 0.461}, {0.025, 0.581}, {0.01, 0.743}};
  double crit = table[0].value;
  double best = 1e9;
  for (const Crit& c : table) {
    if (std::abs(c.alpha - alpha) < best) {
      best = std::abs(c.alpha - alpha);
      crit = c.value;
    }
  }

  // Spectral density at zero from the final half of the full chain, through
  // a lag-1 autoregressive fit: p0 = g0 (1 + rho) / (1 - rho). An
  // autocovariance-sum estimator would blow up under the very trends this
  // test must detect.
  const std::span<const double> half = chain.subspan(n_full / 2);
  double p0 = 0.0;
  {
    const std::size_t n = half.size();
    std::vector<double> centred(n);
    double mean = 0.0;
    for (double v : half) mean += v;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centred[i] = half[i] - mean;
    const double g0 = kernels::shifted_dot(centred.data(), n, 0) / static_cast<double>(n);
    const double g1 = kernels::shifted_dot(centred.data(), n - 1, 1) / static_cast<double>(n);
    const double rho = g0 > 0.0 ? std::clamp(g1 / g0, 0.0, 0.99) : 0.0;
    p0 = g0 * (1.0 + rho) / (1.0 - rho);
  }

  HeidelbergerWelch out;
  if (!(p0 > 0.0)) {  // constant chain is trivially stationary
    out.stationary = true;
    out.trim = 0.0;
    out.usable_fraction = 1.0;
    return out;
  }

  for (int t = 0; t <= 5; ++t) {
    const double trim = 0.1 * t;
    const auto start = static_cast<std::size_t>(trim * static_cast<double>(n_full));
    const std::span<const double> sub = chain.subspan(start);
    const std::size_t n = sub.size();

    double mean = 0.0;
    for (double v : sub) mean += v;
    mean /= static_cast<double>(n);

    double stat = 0.0, cum = 0.0;
    const double scale = static_cast<double>(n) * p0;
    for (std::size_t k = 0; k < n; ++k) {
      cum += sub[k] - mean;
      stat += cum * cum / scale;
    }
    stat /= static_cast<double>(n);

    if (stat < crit) {
      out.stationary = true;
      out.trim = trim;
      out.usable_fraction = 1.0 - trim;
      out.statistic = stat;
      return out;
    }
    out.statistic = stat;
  }
  out.stationary = false;
  out.trim = 1.0;
  out.usable_fraction = 0.0;
  return out;
}

StateProbabilitySeries state_probability_series(std::span<const RefinedPath> snapshots,
                                                std::span<const double> grid, int n_states) {
  if (snapshots.empty())
    throw std::invalid_argument("state_probability_series: need at least one snapshot");

  StateProbabilitySeries out;
  out.times.assign(grid.begin(), grid.end());
  out.probs.setZero(static_cast<int>(grid.size()), n_states);

  std::vector<int> counts(static_cast<std::size_t>(n_states));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const RefinedPath& path : snapshots) {
      const double t = grid[g];
      auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
      std::size_t i = it == path.times.begin()
                          ? 0
                          : static_cast<std::size_t>(it - path.times.begin()) - 1;
      if (i >= path.n_intervals()) i = path.n_intervals() - 1;
      counts[static_cast<std::size_t>(path.behaviour[i])] += 1;
    }
    // Last state's probability is the complement, so each row sums to one.
    double partial = 0.0;
    for (int s = 0; s + 1 < n_states; ++s) {
      out.probs(static_cast<int>(g), s) =
          static_cast<double>(counts[static_cast<std::size_t>(s)]) /
          static_cast<double>(snapshots.size());
      partial += out.probs(static_cast<int>(g), s);
    }
    out.probs(static_cast<int>(g), n_states - 1) = 1.0 - partial;
  }
  return out;
}

}  // namespace ctmove
