#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ctmove/rng.hpp"
#include "ctmove/types.hpp"

namespace ctmove {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// One-interval transition of the Ornstein-Uhlenbeck speed process:
// psi' | psi ~ N(mu + decay * (psi - mu), var).
struct OuStep {
  double decay = 0.0;
  double var = 0.0;
};

inline OuStep ou_step(const MovementParams& p, double dt) {
  const double a = std::exp(-p.beta * dt);
  return {a, p.long_term_speed_var() * -std::expm1(-2.0 * p.beta * dt)};
}

// Stationary distribution of the behaviour chain (solves pi Q = 0 for the
// generator built from lambda and q). Throws if the chain is reducible.
Eigen::VectorXd ctmc_stationary(const BehaviourParams& behaviour);

// Forward simulation of the behaviour chain on [t0, t1) from state s0.
BehaviourTrajectory simulate_behaviour(const BehaviourParams& behaviour, double t0, double t1,
                                       int s0, Rng& rng);

// Refined grid over the trajectory's span: contains the start, the end,
// every switch time and every extra knot; each span between consecutive
// forced points is divided into ceil(span / delta_t) equal pieces, so no gap
// exceeds delta_t. Knots outside the span are ignored.
std::vector<double> build_refined_times(const BehaviourTrajectory& trajectory, double delta_t,
                                        std::span<const double> extra_knots = {});

// One refined-step draw of (bearing, speed) given the current state.
std::pair<double, double> simulate_movement_increment(double theta, double psi, int state,
                                                      double delta_t, const Parameters& params,
                                                      Rng& rng);

// N steps/bearings -> N+1 locations via cumulative sums from the origin.
std::vector<Vec2> integrate_locations(const Vec2& origin, std::span<const double> bearings,
                                      std::span<const double> steps);

// Forward simulation of the full refined path.
RefinedPath simulate_path(const Parameters& params, double t0, double t1, double delta_t,
                          int initial_state, double initial_theta, double initial_psi, Rng& rng);

// Exact log-density of the bearing/step components of a refined path:
// uniform initial bearing, stationary-mixture initial speed (weights from
// ctmc_stationary), then the Gaussian transition products. The behaviour
// trajectory's own density is deliberately not included; the behaviour block
// of the sampler conditions on it exactly. Throws on a non-finite result.
double path_log_density(const Parameters& params, const RefinedPath& path);

}  // namespace ctmove
