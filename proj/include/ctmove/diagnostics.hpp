#pragma once

#include <span>
#include <string>
#include <vector>

#include "ctmove/types.hpp"

namespace ctmove {

// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::span<const double> samples, double p);

struct SummaryRow {
  std::string name;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
};

SummaryRow quantile_summary(std::span<const double> samples, std::string name = {});

// Autocorrelation-adjusted sample count: N / (1 + 2 sum rho_k), the
// autocovariance sum truncated at the first negative pairwise sum. A constant
// chain reports 1 by convention; the estimate is clamped to [1, N].
double effective_sample_size(std::span<const double> chain);

struct HeidelbergerWelch {
  bool stationary = false;
  double trim = 1.0;             // first passing trim fraction
  double usable_fraction = 0.0;  // 1 - trim when stationary
  double statistic = 0.0;        // Cramer-von Mises statistic at that trim
};

// Stationarity half of the Heidelberger-Welch diagnostic: a Cramer-von Mises
// test applied to the chain trimmed by 0%, 10%, .., 50%, with the spectral
// density at zero estimated from the final half of the full chain. alpha is
// matched to the nearest of {0.1, 0.05, 0.025, 0.01}. The halfwidth half of
// the classic diagnostic is intentionally omitted.
HeidelbergerWelch heidelberger_welch(std::span<const double> chain, double alpha);

struct StateProbabilitySeries {
  std::vector<double> times;
  Eigen::MatrixXd probs;  // times x states, rows sum to 1
};

// Fraction of stored path snapshots occupying each state at each grid time.
StateProbabilitySeries state_probability_series(std::span<const RefinedPath> snapshots,
                                                std::span<const double> grid, int n_states);

}  // namespace ctmove
