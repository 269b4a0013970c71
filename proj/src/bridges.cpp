#include "ctmove/bridges.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctmove/normal.hpp"

namespace ctmove {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kCondLimit = 1e12;
constexpr double kResidualTol = 1e-8;

// Moments of the free steps of a section. The speed chain runs over the
// values psi(u_0)..psi(u_{m-1}) (plus psi(u_m) when an end condition
// applies), started either from the known flanking speed across the flanking
// interval or at the equilibrium of one component state.
struct StepMoments {
  Eigen::VectorXd m1;
  Eigen::MatrixXd S1;
};

StepMoments speed_step_moments(const Parameters& params, std::span<const double> times,
                               std::span<const int> states, bool given_start, double psi_start,
                               double dt0, int s_pre, int eq_component, bool condition_end,
                               double psi_end) {
  const int m = static_cast<int>(states.size());
  const int n_vals = condition_end ? m + 1 : m;
  Eigen::VectorXd mean(n_vals);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_vals, n_vals);

  if (given_start) {
    const MovementParams& p = params.movement[static_cast<std::size_t>(s_pre)];
    const OuStep st = ou_step(p, dt0);
    mean(0) = p.mu + st.decay * (psi_start - p.mu);
    cov(0, 0) = st.var;
  } else {
    const MovementParams& p = params.movement[static_cast<std::size_t>(eq_component)];
    mean(0) = p.mu;
    cov(0, 0) = p.long_term_speed_var();
  }

  for (int j = 1; j < n_vals; ++j) {
    const MovementParams& p = params.movement[static_cast<std::size_t>(states[j - 1])];
    const OuStep st = ou_step(p, times[j] - times[j - 1]);
    mean(j) = p.mu + st.decay * (mean(j - 1) - p.mu);
    for (int i = 0; i < j; ++i) {
      cov(i, j) = cov(i, j - 1) * st.decay;
      cov(j, i) = cov(i, j);
    }
    cov(j, j) = st.decay * st.decay * cov(j - 1, j - 1) + st.var;
  }

  StepMoments out;
  if (condition_end) {
    const Eigen::VectorXd c = cov.block(0, m, m, 1);
    const double d = cov(m, m);
    if (!(d > 0.0))
      throw std::runtime_error("ou_bridge_step_moments: degenerate end-speed variance");
    out.m1 = mean.head(m) + c * ((psi_end - mean(m)) / d);
    out.S1 = cov.topLeftCorner(m, m) - (c * c.transpose()) / d;
  } else {
    out.m1 = std::move(mean);
    out.S1 = std::move(cov);
  }

  for (int i = 0; i < m; ++i) {
    const double dt_i = times[i + 1] - times[i];
    out.m1(i) *= dt_i;
    for (int j = 0; j < m; ++j) out.S1(i, j) *= dt_i;
    for (int j = 0; j < m; ++j) out.S1(j, i) *= dt_i;
  }
  if (!out.m1.allFinite() || !out.S1.allFinite())
    throw std::runtime_error("ou_bridge_step_moments: non-finite moments");
  return out;
}

// Stacked linear constraint over the free steps: one 2-row block per
// observation knot inside the section plus the endpoint. r holds the target
// displacements from Z_a.
void build_constraint(std::span<const double> bearings, std::span<const double> times,
                      const SectionFixture& fx, Eigen::MatrixXd& C, Eigen::VectorXd& r) {
  const int m = static_cast<int>(bearings.size());
  const int k = static_cast<int>(fx.obs_times.size()) + 1;
  C.setZero(2 * k, m);
  r.resize(2 * k);

  std::vector<double> cs(m), sn(m);
  for (int i = 0; i < m; ++i) {
    cs[i] = std::cos(bearings[i]);
    sn[i] = std::sin(bearings[i]);
  }

  for (int g = 0; g < k; ++g) {
    const bool last = g == k - 1;
    const double knot = last ? fx.b : fx.obs_times[static_cast<std::size_t>(g)];
    const auto it = std::lower_bound(times.begin(), times.end(), knot - 1e-9);
    const int limit = static_cast<int>(it - times.begin());
    if (it == times.end() || std::abs(*it - knot) > 1e-6 || limit > m)
      throw std::logic_error(last ? "section grid does not end at the fixture endpoint"
                                  : "section grid is missing an observation knot");
    for (int i = 0; i < limit; ++i) {
      C(2 * g, i) = cs[i];
      C(2 * g + 1, i) = sn[i];
    }
    const Vec2 target = (last ? fx.Z_b : fx.obs_locs[static_cast<std::size_t>(g)]) - fx.Z_a;
    r(2 * g) = target.x;
    r(2 * g + 1) = target.y;
  }
}

struct ConstraintEval {
  bool ok = false;
  double logdens = kNegInf;  // evaluated with the jittered eigenvalues
  Eigen::MatrixXd S12;
  Eigen::MatrixXd S2_inv;  // exact eigen-inverse, used for the draw
};

ConstraintEval eval_constraint(const Eigen::MatrixXd& C, const Eigen::VectorXd& r,
                               const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1) {
  ConstraintEval ev;
  ev.S12 = S1 * C.transpose();
  const Eigen::MatrixXd S2 = C * ev.S12;
  const int d = static_cast<int>(S2.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S2);
  if (es.info() != Eigen::Success) return ev;
  const Eigen::VectorXd& vals = es.eigenvalues();
  if (!(vals(0) > 0.0) || vals(d - 1) / vals(0) > kCondLimit) return ev;

  // Density under the jittered matrix; the draw uses the exact inverse so
  // the hard constraint survives near the condition limit.
  const double jitter = 1e-10 * S2.trace() / d;
  const Eigen::VectorXd resid = es.eigenvectors().transpose() * (r - C * m1);
  double quad = 0.0, logdet = 0.0;
  for (int i = 0; i < d; ++i) {
    quad += resid(i) * resid(i) / (vals(i) + jitter);
    logdet += std::log(vals(i) + jitter);
  }
  ev.logdens = -0.5 * (d * kLogTwoPi + logdet + quad);
  ev.S2_inv = es.eigenvectors() * vals.cwiseInverse().asDiagonal() *
              es.eigenvectors().transpose();
  ev.ok = std::isfinite(ev.logdens);
  return ev;
}

Eigen::VectorXd constrained_draw(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                                 const ConstraintEval& ev, const Eigen::MatrixXd& C,
                                 const Eigen::VectorXd& r, Rng& rng) {
  // PSD square root tolerant of zero eigenvalues (the conditioned chain
  // covariance is often singular).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S1);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("kriging_step_draw: eigendecomposition failed");
  const int m = static_cast<int>(m1.size());
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z(i) = rng.normal();
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd nu = m1 + es.eigenvectors() * root.cwiseProduct(z);
  // Iterative refinement absorbs the O(cond * eps) error of the inverse.
  for (int pass = 0; pass < 4; ++pass) {
    const Eigen::VectorXd d = C * nu - r;
    if (d.norm() <= 1e-12 * (1.0 + r.norm())) break;
    nu -= ev.S12 * (ev.S2_inv * d);
  }
  return nu;
}

bool constraint_satisfied(const Eigen::MatrixXd& C, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& nu) {
  return (C * nu - r).norm() <= kResidualTol * (1.0 + r.norm());
}

std::vector<int> interval_states(const BehaviourTrajectory& traj, std::span<const double> times) {
  std::vector<int> states(times.size() - 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) states[i] = traj.state_at(times[i]);
  return states;
}

double logsumexp2(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

void SectionFixture::validate() const {
  if (!(a < b)) throw std::invalid_argument("SectionFixture: a must precede b");
  if (has_left && !(dt_0 > 0.0)) throw std::invalid_argument("SectionFixture: dt_0 must be > 0");
  if (has_right && !(dt_n > 0.0)) throw std::invalid_argument("SectionFixture: dt_n must be > 0");
  if (obs_times.size() != obs_locs.size())
    throw std::invalid_argument("SectionFixture: ragged observation knots");
  for (std::size_t g = 0; g < obs_times.size(); ++g) {
    if (!(obs_times[g] > a && obs_times[g] < b))
      throw std::invalid_argument("SectionFixture: observation knot outside (a, b)");
    if (g > 0 && !(obs_times[g] > obs_times[g - 1]))
      throw std::invalid_argument("SectionFixture: observation knots must increase");
  }
}

std::optional<BehaviourTrajectory> propose_behaviour_bridge(const BehaviourParams& behaviour,
                                                            const SectionFixture& fixture,
                                                            Rng& rng) {
  int start = fixture.s_a;
  if (!fixture.has_left) {
    const Eigen::VectorXd pi = ctmc_stationary(behaviour);
    const std::vector<double> w(pi.begin(), pi.end());
    start = rng.categorical(w);
  }
  BehaviourTrajectory traj = simulate_behaviour(behaviour, fixture.a, fixture.b, start, rng);
  if (fixture.has_right && traj.segments.back().state != fixture.s_b) return std::nullopt;
  return traj;
}

std::vector<double> bearing_bridge(double theta_0, double theta_n, std::span<const double> times,
                                   std::span<const int> states,
                                   const std::vector<MovementParams>& movement, Rng& rng) {
  const std::size_t n = states.size();
  if (times.size() != n + 1) throw std::invalid_argument("bearing_bridge: ragged inputs");

  // Volatility-rescaled clock; the bridge has unit volatility there.
  std::vector<double> tau(n + 1);
  tau[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tau[i + 1] =
        tau[i] + movement[static_cast<std::size_t>(states[i])].sigma_theta_sq *
                     (times[i + 1] - times[i]);
  }
  if (!(tau[n] > 0.0)) throw std::invalid_argument("bearing_bridge: zero transformed span");

  std::vector<double> out(n >= 1 ? n - 1 : 0);
  double cur = theta_0;
  for (std::size_t i = 1; i < n; ++i) {
    const double w = tau[i] - tau[i - 1];
    const double rem = tau[n] - tau[i - 1];
    const double mean = cur + (theta_n - cur) * w / rem;
    const double var = w * (tau[n] - tau[i]) / rem;
    cur = rng.normal(mean, std::sqrt(var));
    out[i - 1] = cur;
  }
  return out;
}

void ou_bridge_step_moments(const SectionFixture& fixture, std::span<const double> times,
                            std::span<const int> states, const Parameters& params,
                            Eigen::VectorXd& m1, Eigen::MatrixXd& S1) {
  StepMoments sm =
      speed_step_moments(params, times, states, true, fixture.nu_0 / fixture.dt_0, fixture.dt_0,
                         fixture.s_pre, -1, true, fixture.nu_n / fixture.dt_n);
  m1 = std::move(sm.m1);
  S1 = std::move(sm.S1);
}

void step_location_joint(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                         std::span<const double> bearings, const SectionFixture& fixture,
                         Eigen::Vector2d& m2, Eigen::Matrix2d& S2, Eigen::MatrixXd& S12) {
  const int m = static_cast<int>(bearings.size());
  Eigen::Matrix2Xd A(2, m);
  for (int i = 0; i < m; ++i) {
    A(0, i) = std::cos(bearings[i]);
    A(1, i) = std::sin(bearings[i]);
  }
  m2 = Eigen::Vector2d(fixture.Z_a.x, fixture.Z_a.y) + A * m1;
  S12 = S1 * A.transpose();
  S2 = A * S12;
}

std::optional<Eigen::VectorXd> kriging_step_draw(const Eigen::VectorXd& m1,
                                                 const Eigen::MatrixXd& S1,
                                                 const Eigen::MatrixXd& S12,
                                                 const Eigen::Matrix2d& S2,
                                                 const Eigen::Matrix2Xd& A,
                                                 const SectionFixture& fixture, Rng& rng) {
  Eigen::MatrixXd C = A;
  Eigen::VectorXd r(2);
  r << fixture.Z_b.x - fixture.Z_a.x, fixture.Z_b.y - fixture.Z_a.y;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S2);
  if (es.info() != Eigen::Success) return std::nullopt;
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(1);
  if (!(lo > 0.0) || hi / lo > kCondLimit) return std::nullopt;

  ConstraintEval ev;
  ev.S12 = S12;
  ev.S2_inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
              es.eigenvectors().transpose();
  Eigen::VectorXd nu = constrained_draw(m1, S1, ev, C, r, rng);
  if (!constraint_satisfied(C, r, nu)) return std::nullopt;
  return nu;
}

namespace {

// Shared moment pipeline for a section under given behaviours/bearings.
// Returns the log marginal of the constrained locations; fills draw state
// when sampling.
struct SectionEval {
  double log_marginal = kNegInf;
  bool ok = false;
  // component moments (one entry when the left flank fixes the start)
  std::vector<StepMoments> moments;
  std::vector<ConstraintEval> evals;
  std::vector<double> log_weights;  // log pi_s + logdens_s (mixture case)
  Eigen::MatrixXd C;
  Eigen::VectorXd r;
};

SectionEval eval_section(const Parameters& params, const SectionFixture& fx,
                         std::span<const double> times, std::span<const int> states,
                         std::span<const double> bearings) {
  SectionEval out;
  build_constraint(bearings, times, fx, out.C, out.r);

  if (fx.has_left) {
    StepMoments sm = speed_step_moments(params, times, states, true, fx.nu_0 / fx.dt_0, fx.dt_0,
                                        fx.s_pre, -1, fx.has_right,
                                        fx.has_right ? fx.nu_n / fx.dt_n : 0.0);
    ConstraintEval ev = eval_constraint(out.C, out.r, sm.m1, sm.S1);
    if (!ev.ok) return out;
    out.log_marginal = ev.logdens;
    out.moments.push_back(std::move(sm));
    out.evals.push_back(std::move(ev));
    out.ok = true;
    return out;
  }

  // Section starts the path: the initial speed follows the equilibrium
  // mixture with stationary weights, so the marginal is the weight-mixed one.
  const Eigen::VectorXd pi = ctmc_stationary(params.behaviour);
  const int n_states = params.behaviour.n_states();
  out.moments.reserve(static_cast<std::size_t>(n_states));
  out.evals.reserve(static_cast<std::size_t>(n_states));
  out.log_weights.resize(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s) {
    StepMoments sm = speed_step_moments(params, times, states, false, 0.0, 0.0, -1, s,
                                        fx.has_right, fx.has_right ? fx.nu_n / fx.dt_n : 0.0);
    ConstraintEval ev = eval_constraint(out.C, out.r, sm.m1, sm.S1);
    if (!ev.ok) return out;
    out.log_weights[static_cast<std::size_t>(s)] = std::log(pi(s)) + ev.logdens;
    out.moments.push_back(std::move(sm));
    out.evals.push_back(std::move(ev));
  }
  out.log_marginal = logsumexp2(out.log_weights);
  out.ok = std::isfinite(out.log_marginal);
  return out;
}

}  // namespace

std::optional<SectionProposal> propose_section(const Parameters& params,
                                               const SectionFixture& fixture, double delta_t,
                                               Rng& rng) {
  fixture.validate();

  auto traj = propose_behaviour_bridge(params.behaviour, fixture, rng);
  if (!traj) return std::nullopt;

  SectionProposal prop;
  prop.behaviour = std::move(*traj);
  prop.times = build_refined_times(prop.behaviour, delta_t, fixture.obs_times);
  const std::size_t m = prop.times.size() - 1;
  prop.states = interval_states(prop.behaviour, prop.times);

  if (m == 1) {
    // Single-interval window: the bearing/step at a stay fixed and only the
    // behaviour is exchanged; both marginals are the value implied by the
    // fixed step, so the acceptance reduces to the behaviour stage.
    prop.behaviour_only = true;
    prop.log_marginal_Zb = 0.0;
    return prop;
  }

  // Bearings.
  const auto& movement = params.movement;
  prop.bearings.resize(m);
  if (fixture.has_left && fixture.has_right) {
    std::vector<double> ext_times(prop.times.size() + 1);
    ext_times[0] = fixture.a - fixture.dt_0;
    std::copy(prop.times.begin(), prop.times.end(), ext_times.begin() + 1);
    std::vector<int> ext_states(m + 1);
    ext_states[0] = fixture.s_pre;
    std::copy(prop.states.begin(), prop.states.end(), ext_states.begin() + 1);
    prop.bearings = bearing_bridge(fixture.theta_0, fixture.theta_n, ext_times, ext_states,
                                   movement, rng);
  } else if (fixture.has_left) {
    const MovementParams& pre = movement[static_cast<std::size_t>(fixture.s_pre)];
    double cur = rng.normal(fixture.theta_0, std::sqrt(pre.sigma_theta_sq * fixture.dt_0));
    prop.bearings[0] = cur;
    for (std::size_t i = 1; i < m; ++i) {
      const MovementParams& p = movement[static_cast<std::size_t>(prop.states[i - 1])];
      cur = rng.normal(cur, std::sqrt(p.sigma_theta_sq * (prop.times[i] - prop.times[i - 1])));
      prop.bearings[i] = cur;
    }
  } else {
    double first;
    if (fixture.has_right) {
      double span_var = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        span_var += movement[static_cast<std::size_t>(prop.states[i])].sigma_theta_sq *
                    (prop.times[i + 1] - prop.times[i]);
      first = truncated_normal_two_sided(fixture.theta_n, std::sqrt(span_var), -kPi, kPi, rng);
    } else {
      first = rng.uniform(-kPi, kPi);
    }
    prop.bearings[0] = first;
    if (fixture.has_right) {
      const auto interior = bearing_bridge(first, fixture.theta_n, prop.times, prop.states,
                                           movement, rng);
      std::copy(interior.begin(), interior.end(), prop.bearings.begin() + 1);
    } else {
      double cur = first;
      for (std::size_t i = 1; i < m; ++i) {
        const MovementParams& p = movement[static_cast<std::size_t>(prop.states[i - 1])];
        cur = rng.normal(cur, std::sqrt(p.sigma_theta_sq * (prop.times[i] - prop.times[i - 1])));
        prop.bearings[i] = cur;
      }
    }
  }

  // Steps.
  SectionEval ev = eval_section(params, fixture, prop.times, prop.states, prop.bearings);
  if (!ev.ok) return std::nullopt;
  std::size_t comp = 0;
  if (!fixture.has_left) {
    std::vector<double> w(ev.log_weights.size());
    const double mx = *std::max_element(ev.log_weights.begin(), ev.log_weights.end());
    for (std::size_t s = 0; s < w.size(); ++s) w[s] = std::exp(ev.log_weights[s] - mx);
    comp = static_cast<std::size_t>(rng.categorical(w));
  }
  Eigen::VectorXd nu = constrained_draw(ev.moments[comp].m1, ev.moments[comp].S1, ev.evals[comp],
                                        ev.C, ev.r, rng);
  if (!constraint_satisfied(ev.C, ev.r, nu)) return std::nullopt;

  prop.steps.assign(nu.begin(), nu.end());
  prop.log_marginal_Zb = ev.log_marginal;
  return prop;
}

double section_log_marginal(const Parameters& params, const SectionFixture& fixture,
                            std::span<const double> times, std::span<const int> states,
                            std::span<const double> bearings) {
  if (states.size() <= 1) return 0.0;  // degenerate window, treated as exact
  const SectionEval ev = eval_section(params, fixture, times, states, bearings);
  return ev.ok ? ev.log_marginal : kNegInf;
}

}  // namespace ctmove
