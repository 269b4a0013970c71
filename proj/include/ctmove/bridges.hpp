#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ctmove/model.hpp"

namespace ctmove {

// Everything held fixed while one section of the refined path is resampled:
// endpoint times and locations, endpoint behaviours, the flanking bearing and
// step on each side (the refined interval immediately before a and the one
// starting at b), and any observation knots strictly inside (a, b) that the
// proposal must also hit. Sections touching the path's first (last) refined
// point have no left (right) flank; the corresponding fields are ignored.
struct SectionFixture {
  double a = 0.0, b = 0.0;
  Vec2 Z_a, Z_b;
  int s_a = 0, s_b = 0;  // B(a), B(b)

  bool has_left = true;
  double theta_0 = 0.0, nu_0 = 0.0, dt_0 = 0.0;
  int s_pre = 0;  // state of the flanking interval ending at a

  bool has_right = true;
  double theta_n = 0.0, nu_n = 0.0, dt_n = 0.0;

  std::vector<double> obs_times;  // strictly inside (a, b)
  std::vector<Vec2> obs_locs;

  void validate() const;
};

struct SectionProposal {
  BehaviourTrajectory behaviour;  // on [a, b]
  std::vector<double> times;      // refined grid u_0 = a .. u_m = b
  std::vector<int> states;        // per interval, length m
  std::vector<double> bearings;   // length m (empty when behaviour_only)
  std::vector<double> steps;      // length m
  double log_marginal_Zb = 0.0;   // log density of the constrained locations
  bool behaviour_only = false;    // single-interval degenerate section
};

// Forward-simulates the behaviour chain across the section from B(a) (drawn
// from the stationary law when the section starts the path) and rejects the
// draw when a right endpoint exists and is missed. No internal retry: one
// attempt per MH proposal.
std::optional<BehaviourTrajectory> propose_behaviour_bridge(const BehaviourParams& behaviour,
                                                            const SectionFixture& fixture,
                                                            Rng& rng);

// Brownian bridge for bearings with state-dependent volatility, simulated
// sequentially on the volatility-rescaled clock. times has n+1 points with
// anchors at both ends; states gives the n per-interval states; the n-1
// interior values are returned.
std::vector<double> bearing_bridge(double theta_0, double theta_n, std::span<const double> times,
                                   std::span<const int> states,
                                   const std::vector<MovementParams>& movement, Rng& rng);

// Mean and covariance of the free steps nu_1..nu_{n-1} of an interior
// section: the inhomogeneous OU speed chain started from the left flank
// speed, conditioned on the right flank speed, rescaled to steps.
void ou_bridge_step_moments(const SectionFixture& fixture, std::span<const double> times,
                            std::span<const int> states, const Parameters& params,
                            Eigen::VectorXd& m1, Eigen::MatrixXd& S1);

// Joint moments of the endpoint location implied by steps ~ N(m1, S1) along
// fixed bearings: m2 = Z_a + A m1, S2 = A S1 A^T, S12 = S1 A^T.
void step_location_joint(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                         std::span<const double> bearings, const SectionFixture& fixture,
                         Eigen::Vector2d& m2, Eigen::Matrix2d& S2, Eigen::MatrixXd& S12);

// Draws steps subject to the endpoint constraint by conditioning-by-kriging:
// x ~ N(m1, S1) through a PSD square root, then
// nu = x - S12 S2^{-1} (A x - (Z_b - Z_a)). Fails (MH rejection) when S2 is
// numerically singular beyond the jitter policy or the constraint residual
// survives.
std::optional<Eigen::VectorXd> kriging_step_draw(const Eigen::VectorXd& m1,
                                                 const Eigen::MatrixXd& S1,
                                                 const Eigen::MatrixXd& S12,
                                                 const Eigen::Matrix2d& S2,
                                                 const Eigen::Matrix2Xd& A,
                                                 const SectionFixture& fixture, Rng& rng);

// Full section proposal: behaviour bridge, refined grid (observation knots
// forced in), bearing bridge, OU step moments, location joint, kriging draw.
// Sections spanning interior observations are constrained to hit all of
// them. Returns nullopt when any stage rejects.
std::optional<SectionProposal> propose_section(const Parameters& params,
                                               const SectionFixture& fixture, double delta_t,
                                               Rng& rng);

// Log marginal density of the section's constrained locations under given
// behaviours and bearings (the moment pipeline only; no sampling). Used for
// the current path side of the MH ratio. Returns -inf when the conditioning
// is numerically singular.
double section_log_marginal(const Parameters& params, const SectionFixture& fixture,
                            std::span<const double> times, std::span<const int> states,
                            std::span<const double> bearings);

}  // namespace ctmove
