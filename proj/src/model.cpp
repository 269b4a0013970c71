#include "ctmove/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctmove/kernels.hpp"

namespace ctmove {

namespace {

constexpr double kTimeEps = 1e-9;  // grid/switch coincidence tolerance, hours

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void MovementParams::validate() const {
  require(sigma_theta_sq > 0.0, "MovementParams: sigma_theta_sq must be > 0");
  require(mu > 0.0, "MovementParams: mu must be > 0");
  require(beta > 0.0, "MovementParams: beta must be > 0");
  require(sigma_psi_sq > 0.0, "MovementParams: sigma_psi_sq must be > 0");
}

void BehaviourParams::validate() const {
  const int n = n_states();
  require(n >= 2, "BehaviourParams: need at least 2 states");
  require(q.rows() == n && q.cols() == n, "BehaviourParams: q must be n x n");
  for (int i = 0; i < n; ++i) {
    require(lambda[i] > 0.0, "BehaviourParams: lambda must be > 0");
    require(q(i, i) == 0.0, "BehaviourParams: q diagonal must be 0");
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      require(q(i, j) >= 0.0, "BehaviourParams: q entries must be >= 0");
      row += q(i, j);
    }
    require(std::abs(row - 1.0) <= 1e-12, "BehaviourParams: q rows must sum to 1");
  }
}

void Parameters::validate() const {
  behaviour.validate();
  require(static_cast<int>(movement.size()) == behaviour.n_states(),
          "Parameters: one MovementParams per state required");
  for (const auto& m : movement) m.validate();
}

int BehaviourTrajectory::state_at(double t) const {
  // State of the interval containing t (cadlag; t == end_time maps to the
  // last segment).
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double v, const Segment& s) { return v < s.entry_time; });
  if (it == segments.begin()) return segments.front().state;
  return std::prev(it)->state;
}

std::vector<double> BehaviourTrajectory::switch_times() const {
  std::vector<double> out;
  out.reserve(segments.size());
  for (std::size_t i = 1; i < segments.size(); ++i) out.push_back(segments[i].entry_time);
  return out;
}

void BehaviourTrajectory::validate(int n_states) const {
  require(start_time < end_time, "BehaviourTrajectory: start must precede end");
  require(!segments.empty(), "BehaviourTrajectory: at least one segment required");
  require(segments.front().entry_time == start_time,
          "BehaviourTrajectory: first segment must enter at start_time");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    require(segments[i].state >= 0 && segments[i].state < n_states,
            "BehaviourTrajectory: state out of range");
    require(segments[i].entry_time < end_time, "BehaviourTrajectory: entry beyond end");
    if (i > 0) {
      require(segments[i].entry_time > segments[i - 1].entry_time,
              "BehaviourTrajectory: entry times must increase");
      require(segments[i].state != segments[i - 1].state,
              "BehaviourTrajectory: consecutive states must differ");
    }
  }
}

void RefinedPath::validate() const {
  const std::size_t n = n_intervals();
  require(n >= 1, "RefinedPath: at least one interval required");
  require(times.size() == n + 1, "RefinedPath: times must have one more entry than intervals");
  require(behaviour.size() == n && steps.size() == n, "RefinedPath: ragged arrays");
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    require(times[i] < times[i + 1], "RefinedPath: times must be strictly increasing");
}

void ObservationSeries::validate() const {
  require(size() >= 3, "ObservationSeries: at least 3 observations required");
  require(locations.size() == size(), "ObservationSeries: ragged arrays");
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    require(times[i] < times[i + 1], "ObservationSeries: times must be strictly increasing");
}

Eigen::VectorXd ctmc_stationary(const BehaviourParams& behaviour) {
  behaviour.validate();
  const int n = behaviour.n_states();

  // Reachability both ways on the positive-rate edge graph.
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double rate = forward ? behaviour.lambda[u] * behaviour.q(u, v)
                                    : behaviour.lambda[v] * behaviour.q(v, u);
        if (rate > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  if (!reach(true) || !reach(false))
    throw std::invalid_argument("ctmc_stationary: behaviour chain is reducible");

  // Solve pi Q = 0 with the normalization replacing the last column.
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (j != i) gen(i, j) = behaviour.lambda[i] * behaviour.q(i, j);
    gen(i, i) = -behaviour.lambda[i];
  }
  Eigen::MatrixXd sys = gen.transpose();
  sys.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::VectorXd pi = sys.fullPivLu().solve(rhs);
  for (int i = 0; i < n; ++i)
    if (!(pi[i] > 0.0)) throw std::invalid_argument("ctmc_stationary: chain is reducible");
  return pi / pi.sum();
}

BehaviourTrajectory simulate_behaviour(const BehaviourParams& behaviour, double t0, double t1,
                                       int s0, Rng& rng) {
  require(t0 < t1, "simulate_behaviour: t0 must precede t1");
  require(s0 >= 0 && s0 < behaviour.n_states(), "simulate_behaviour: s0 out of range");

  BehaviourTrajectory traj;
  traj.start_time = t0;
  traj.end_time = t1;
  traj.segments.push_back({t0, s0});
  double t = t0;
  int state = s0;
  for (;;) {
    t += rng.exponential(behaviour.lambda[state]);
    if (t >= t1) break;
    const auto& row = behaviour.q.row(state);
    std::vector<double> w(row.begin(), row.end());
    state = rng.categorical(w);
    traj.segments.push_back({t, state});
  }
  return traj;
}

std::vector<double> build_refined_times(const BehaviourTrajectory& trajectory, double delta_t,
                                        std::span<const double> extra_knots) {
  require(delta_t > 0.0, "build_refined_times: delta_t must be > 0");

  std::vector<double> forced;
  forced.push_back(trajectory.start_time);
  for (const double s : trajectory.switch_times()) forced.push_back(s);
  for (const double k : extra_knots)
    if (k > trajectory.start_time && k < trajectory.end_time) forced.push_back(k);
  forced.push_back(trajectory.end_time);
  std::sort(forced.begin(), forced.end());
  forced.erase(std::unique(forced.begin(), forced.end(),
                           [](double a, double b) { return std::abs(a - b) <= kTimeEps; }),
               forced.end());

  std::vector<double> grid;
  grid.push_back(forced.front());
  for (std::size_t k = 0; k + 1 < forced.size(); ++k) {
    const double span = forced[k + 1] - forced[k];
    const auto pieces = static_cast<std::size_t>(std::ceil(span / delta_t - kTimeEps));
    for (std::size_t j = 1; j < pieces; ++j)
      grid.push_back(forced[k] + span * static_cast<double>(j) / static_cast<double>(pieces));
    grid.push_back(forced[k + 1]);
  }
  return grid;
}

std::pair<double, double> simulate_movement_increment(double theta, double psi, int state,
                                                      double delta_t, const Parameters& params,
                                                      Rng& rng) {
  require(delta_t > 0.0, "simulate_movement_increment: delta_t must be > 0");
  const MovementParams& p = params.movement.at(static_cast<std::size_t>(state));
  const double theta_next = rng.normal(theta, std::sqrt(p.sigma_theta_sq * delta_t));
  const OuStep s = ou_step(p, delta_t);
  const double psi_next = rng.normal(p.mu + s.decay * (psi - p.mu), std::sqrt(s.var));
  return {theta_next, psi_next};
}

std::vector<Vec2> integrate_locations(const Vec2& origin, std::span<const double> bearings,
                                      std::span<const double> steps) {
  require(bearings.size() == steps.size(), "integrate_locations: ragged arrays");
  std::vector<Vec2> out;
  out.reserve(bearings.size() + 1);
  out.push_back(origin);
  Vec2 pos = origin;
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    pos += Vec2{steps[i] * std::cos(bearings[i]), steps[i] * std::sin(bearings[i])};
    out.push_back(pos);
  }
  return out;
}

RefinedPath simulate_path(const Parameters& params, double t0, double t1, double delta_t,
                          int initial_state, double initial_theta, double initial_psi, Rng& rng) {
  params.validate();
  const BehaviourTrajectory traj =
      simulate_behaviour(params.behaviour, t0, t1, initial_state, rng);

  RefinedPath path;
  path.times = build_refined_times(traj, delta_t);
  const std::size_t n = path.times.size() - 1;
  path.behaviour.resize(n);
  path.bearings.resize(n);
  path.steps.resize(n);

  double theta = initial_theta;
  double psi = initial_psi;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = path.times[i + 1] - path.times[i];
    const int state = traj.state_at(path.times[i]);
    path.behaviour[i] = state;
    path.bearings[i] = theta;
    path.steps[i] = psi * dt;
    std::tie(theta, psi) = simulate_movement_increment(theta, psi, state, dt, params, rng);
  }
  return path;
}

double path_log_density(const Parameters& params, const RefinedPath& path) {
  path.validate();
  const std::size_t n = path.n_intervals();

  // Initial bearing ~ U(-pi, pi); by construction the stored first bearing
  // always lies inside the support, so only the constant enters.
  double logp = -std::log(kTwoPi);

  // Initial speed: stationary-weighted equilibrium mixture, with the
  // step-to-speed Jacobian.
  const Eigen::VectorXd pi = ctmc_stationary(params.behaviour);
  const double dt0 = path.dt(0);
  const double psi0 = path.steps[0] / dt0;
  double mix = 0.0;
  for (int s = 0; s < params.behaviour.n_states(); ++s) {
    const MovementParams& p = params.movement[static_cast<std::size_t>(s)];
    const double v = p.long_term_speed_var();
    const double z = psi0 - p.mu;
    mix += pi[s] * std::exp(-0.5 * z * z / v) / std::sqrt(kTwoPi * v);
  }
  logp += std::log(mix) - std::log(dt0);

  if (n >= 2) {
    // Transition terms, accumulated by the AR(1) deviance kernel. The i-th
    // transition is driven by the state and length of interval i-1; speeds
    // carry a 1/dt Jacobian per step.
    const std::size_t m = n - 1;
    std::vector<double> psi(n), decay(m), offset(m), inv_var(m), log_var(m);
    std::vector<double> ones(m, 1.0), zeros(m, 0.0), b_inv_var(m), b_log_var(m);
    double log_jac = 0.0;
    // Memoized per-state coefficients for the most recent dt; grids are
    // near-uniform so this removes almost all exp/log calls.
    const int k = params.behaviour.n_states();
    std::vector<double> memo_dt(k, -1.0), memo_decay(k), memo_ivar(k), memo_lvar(k),
        memo_bivar(k), memo_blvar(k);
    psi[0] = psi0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dt = path.dt(i);
      const int s = path.behaviour[i];
      const MovementParams& p = params.movement[static_cast<std::size_t>(s)];
      if (memo_dt[s] != dt) {
        const OuStep st = ou_step(p, dt);
        memo_dt[s] = dt;
        memo_decay[s] = st.decay;
        memo_ivar[s] = 1.0 / st.var;
        memo_lvar[s] = std::log(st.var);
        const double bv = p.sigma_theta_sq * dt;
        memo_bivar[s] = 1.0 / bv;
        memo_blvar[s] = std::log(bv);
      }
      decay[i] = memo_decay[s];
      offset[i] = p.mu * (1.0 - memo_decay[s]);
      inv_var[i] = memo_ivar[s];
      log_var[i] = memo_lvar[s];
      b_inv_var[i] = memo_bivar[s];
      b_log_var[i] = memo_blvar[s];
      psi[i + 1] = path.steps[i + 1] / path.dt(i + 1);
      log_jac += std::log(path.dt(i + 1));
    }
    const double dev_speed = kernels::ar1_gauss_deviance(psi.data(), decay.data(), offset.data(),
                                                         inv_var.data(), log_var.data(), m);
    const double dev_bearing =
        kernels::ar1_gauss_deviance(path.bearings.data(), ones.data(), zeros.data(),
                                    b_inv_var.data(), b_log_var.data(), m);
    logp += -0.5 * (dev_speed + dev_bearing + 2.0 * static_cast<double>(m) * kLogTwoPi) - log_jac;
  }

  if (!std::isfinite(logp))
    throw std::runtime_error("path_log_density: non-finite log-density (degenerate parameters)");
  return logp;
}

}  // namespace ctmove
