#include "ctmove/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "ctmove/normal.hpp"

namespace ctmove {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double& movement_field(MovementParams& p, int kind) {
  switch (kind) {
    case kSigmaThetaSq:
      return p.sigma_theta_sq;
    case kMu:
      return p.mu;
    case kBeta:
      return p.beta;
    default:
      return p.sigma_psi_sq;
  }
}

double movement_field(const MovementParams& p, int kind) {
  return movement_field(const_cast<MovementParams&>(p), kind);
}

double wrap_to_pi(double x) {
  x = std::fmod(x + kPi, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x - kPi;
}

// Natural cubic spline through (t, y); evaluated at arbitrary points.
class CubicSpline {
 public:
  CubicSpline(std::span<const double> t, std::span<const double> y)
      : t_(t.begin(), t.end()), y_(y.begin(), y.end()), m2_(t.size(), 0.0) {
    const std::size_t n = t_.size();
    if (n < 3) return;  // linear fallback handled in eval
    std::vector<double> diag(n, 2.0), off(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t_[i] - t_[i - 1];
      const double h1 = t_[i + 1] - t_[i];
      off[i] = h1 / (h0 + h1);
      const double lower = 1.0 - off[i];
      rhs[i] = 6.0 / (h0 + h1) * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
      // Thomas elimination against the already-processed row.
      const double w = i == 1 ? 0.0 : lower / diag[i - 1];
      diag[i] -= w * off[i - 1];
      rhs[i] -= w * rhs[i - 1];
      if (i == 1) {
        // natural boundary: m2_[0] = 0, nothing to eliminate
      }
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m2_[i] = (rhs[i] - off[i] * m2_[i + 1]) / diag[i];
      if (i == 1) break;
    }
  }

  double operator()(double x) const {
    const std::size_t n = t_.size();
    auto it = std::upper_bound(t_.begin(), t_.end(), x);
    std::size_t j = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    if (j >= n - 1) j = n - 2;
    const double h = t_[j + 1] - t_[j];
    const double u = (x - t_[j]) / h;
    const double a = y_[j], b = y_[j + 1];
    return a * (1.0 - u) + b * u +
           h * h / 6.0 *
               ((1.0 - u) * ((1.0 - u) * (1.0 - u) - 1.0) * m2_[j] +
                u * (u * u - 1.0) * m2_[j + 1]);
  }

 private:
  std::vector<double> t_, y_, m2_;
};

std::vector<std::size_t> locate_observation_indices(const RefinedPath& path,
                                                    const ObservationSeries& obs) {
  std::vector<std::size_t> idx(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const auto it =
        std::lower_bound(path.times.begin(), path.times.end(), obs.times[j] - 1e-9);
    if (it == path.times.end() || std::abs(*it - obs.times[j]) > 1e-6)
      throw std::logic_error("path grid is missing an observation time");
    idx[j] = static_cast<std::size_t>(it - path.times.begin());
  }
  return idx;
}

}  // namespace

void PriorSpec::validate() const {
  const int n = n_states();
  if (n < 2) throw std::invalid_argument("PriorSpec: need at least 2 states");
  if (lambda_shape.size() != n || lambda_rate.size() != n)
    throw std::invalid_argument("PriorSpec: lambda hyperparameters must match state count");
  for (int i = 0; i < n; ++i)
    if (!(lambda_shape[i] > 0.0) || !(lambda_rate[i] > 0.0))
      throw std::invalid_argument("PriorSpec: gamma hyperparameters must be positive");
  if (!(dirichlet_weight > 0.0))
    throw std::invalid_argument("PriorSpec: dirichlet weight must be positive");
  if (!(r_max > 0.0)) throw std::invalid_argument("PriorSpec: r_max must be positive");
  for (const auto& state : movement)
    for (const auto& p : state)
      if (p.kind == ParamPrior::Kind::trunc_normal && !(p.sd > 0.0))
        throw std::invalid_argument("PriorSpec: truncated-normal prior needs sd > 0");
}

PriorSpec PriorSpec::defaults(int n_states) {
  PriorSpec out;
  out.lambda_shape = Eigen::VectorXd::Constant(n_states, 0.1);
  out.lambda_rate = Eigen::VectorXd::Constant(n_states, 4.0);
  out.movement.resize(static_cast<std::size_t>(n_states));
  return out;
}

void SamplerConfig::validate() const {
  if (n_iter <= 0) throw std::invalid_argument("SamplerConfig: n_iter must be positive");
  if (thin <= 0) throw std::invalid_argument("SamplerConfig: thin must be positive");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw std::invalid_argument("SamplerConfig: burn_in_fraction must be in [0, 1)");
  if (path_updates_per_iter < 0)
    throw std::invalid_argument("SamplerConfig: path_updates_per_iter must be >= 0");
  if (section_min_points < 2 || section_max_points < section_min_points)
    throw std::invalid_argument("SamplerConfig: section length range invalid (need >= 2)");
  if (!(delta_t > 0.0)) throw std::invalid_argument("SamplerConfig: delta_t must be positive");
  if (path_store_stride <= 0)
    throw std::invalid_argument("SamplerConfig: path_store_stride must be positive");
}

std::vector<std::string> parameter_names(int n_states) {
  std::vector<std::string> names;
  for (int i = 0; i < n_states; ++i) names.push_back("lambda_" + std::to_string(i + 1));
  if (n_states > 2)
    for (int i = 0; i < n_states; ++i)
      for (int j = 0; j < n_states; ++j)
        if (i != j)
          names.push_back("q_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  const char* kinds[4] = {"sigma_theta_sq", "mu", "beta", "sigma_psi_sq"};
  for (int i = 0; i < n_states; ++i)
    for (const char* k : kinds) names.push_back(std::string(k) + "_" + std::to_string(i + 1));
  return names;
}

Eigen::VectorXd flatten_parameters(const Parameters& params) {
  const int n = params.behaviour.n_states();
  Eigen::VectorXd out(static_cast<int>(parameter_names(n).size()));
  int k = 0;
  for (int i = 0; i < n; ++i) out[k++] = params.behaviour.lambda[i];
  if (n > 2)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) out[k++] = params.behaviour.q(i, j);
  for (int i = 0; i < n; ++i) {
    const MovementParams& p = params.movement[static_cast<std::size_t>(i)];
    out[k++] = p.sigma_theta_sq;
    out[k++] = p.mu;
    out[k++] = p.beta;
    out[k++] = p.sigma_psi_sq;
  }
  return out;
}

SufficientStats behaviour_sufficient_stats(const RefinedPath& path, int n_states) {
  SufficientStats stats;
  stats.time_in_state = Eigen::VectorXd::Zero(n_states);
  stats.transitions = Eigen::MatrixXd::Zero(n_states, n_states);
  const std::size_t n = path.n_intervals();
  for (std::size_t i = 0; i < n; ++i) {
    stats.time_in_state[path.behaviour[i]] += path.dt(i);
    if (i + 1 < n && path.behaviour[i + 1] != path.behaviour[i])
      stats.transitions(path.behaviour[i], path.behaviour[i + 1]) += 1.0;
  }
  return stats;
}

BehaviourParams gibbs_behaviour(const SufficientStats& stats, const PriorSpec& priors, Rng& rng) {
  const int n = priors.n_states();
  BehaviourParams out;
  out.lambda.resize(n);
  out.q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double shape = priors.lambda_shape[i] + stats.transitions.row(i).sum();
    const double rate = priors.lambda_rate[i] + stats.time_in_state[i];
    out.lambda[i] = rng.gamma(shape, rate);
    if (n == 2) {
      out.q(i, 1 - i) = 1.0;
    } else {
      std::vector<double> alpha;
      alpha.reserve(static_cast<std::size_t>(n) - 1);
      for (int j = 0; j < n; ++j)
        if (j != i) alpha.push_back(priors.dirichlet_weight + stats.transitions(i, j));
      const std::vector<double> row = rng.dirichlet(alpha);
      int k = 0;
      for (int j = 0; j < n; ++j)
        if (j != i) out.q(i, j) = row[static_cast<std::size_t>(k++)];
    }
  }
  return out;
}

double movement_log_prior(const std::vector<MovementParams>& movement, const PriorSpec& priors) {
  double logp = 0.0;
  for (std::size_t s = 0; s < movement.size(); ++s) {
    const MovementParams& p = movement[s];
    if (!(p.sigma_theta_sq > 0.0 && p.mu > 0.0 && p.beta > 0.0 && p.sigma_psi_sq > 0.0))
      return kNegInf;
    if (std::sqrt(p.long_term_speed_var()) / p.mu > priors.r_max) return kNegInf;
    for (int k = 0; k < 4; ++k) {
      const ParamPrior& prior = priors.movement[s][static_cast<std::size_t>(k)];
      if (prior.kind == ParamPrior::Kind::trunc_normal) {
        const double x = movement_field(p, k);
        logp += norm_logpdf(x, prior.mean, prior.sd * prior.sd) -
                std::log(norm_cdf(prior.mean / prior.sd));
      }
    }
  }
  return logp;
}

bool mh_movement_update(Parameters& params, const RefinedPath& path, const PriorSpec& priors,
                        const std::vector<std::array<double, 4>>& rw_sd, Rng& rng) {
  const std::size_t n_states = params.movement.size();
  std::vector<MovementParams> proposal = params.movement;
  double log_hastings = 0.0;
  for (std::size_t s = 0; s < n_states; ++s) {
    for (int k = 0; k < 4; ++k) {
      const double sd = rw_sd[s][static_cast<std::size_t>(k)];
      if (sd == 0.0) continue;  // degenerate proposal: keep the current value
      const double cur = movement_field(params.movement[s], k);
      const double prop = rng.truncated_normal_below(cur, sd, 0.0);
      movement_field(proposal[s], k) = prop;
      log_hastings += std::log(norm_cdf(cur / sd)) - std::log(norm_cdf(prop / sd));
    }
  }

  const double prior_prop = movement_log_prior(proposal, priors);
  if (prior_prop == kNegInf) return false;
  const double prior_cur = movement_log_prior(params.movement, priors);

  Parameters prop_params = params;
  prop_params.movement = proposal;
  const double ll_cur = path_log_density(params, path);
  const double ll_prop = path_log_density(prop_params, path);

  const double log_alpha = ll_prop + prior_prop - ll_cur - prior_cur + log_hastings;
  if (std::log(rng.uniform() + 1e-300) < log_alpha) {
    params.movement = std::move(proposal);
    return true;
  }
  return false;
}

PathSection select_section(const RefinedPath& path, const ObservationSeries& obs,
                           std::span<const std::size_t> obs_grid_idx, int min_points,
                           int max_points, Rng& rng) {
  const std::size_t n_obs = obs_grid_idx.size();
  if (n_obs < 2) throw std::invalid_argument("select_section: need at least 2 observations");

  const auto j1 =
      static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_obs - 1));
  const int target = min_points +
                     static_cast<int>(rng.uniform() * static_cast<double>(
                                                          max_points - min_points + 1));

  auto interior = [&](std::size_t j2) {
    return static_cast<int>(obs_grid_idx[j2] - obs_grid_idx[j1]) - 1;
  };
  std::size_t j2 = j1 + 1;
  while (j2 + 1 < n_obs && interior(j2) < target) {
    // widen to the observation-aligned endpoint closest to the target
    if (std::abs(interior(j2 + 1) - target) >= std::abs(interior(j2) - target)) break;
    ++j2;
  }
  // Degenerate single-interval window: widen once when possible.
  if (interior(j2) < 1 && j2 + 1 < n_obs) ++j2;

  PathSection sec;
  sec.ia = obs_grid_idx[j1];
  sec.ib = obs_grid_idx[j2];

  SectionFixture& fx = sec.fixture;
  fx.a = path.times[sec.ia];
  fx.b = path.times[sec.ib];
  fx.Z_a = obs.locations[j1];
  fx.Z_b = obs.locations[j2];
  fx.s_a = path.behaviour[sec.ia];
  fx.has_left = sec.ia > 0;
  if (fx.has_left) {
    fx.theta_0 = path.bearings[sec.ia - 1];
    fx.nu_0 = path.steps[sec.ia - 1];
    fx.dt_0 = path.dt(sec.ia - 1);
    fx.s_pre = path.behaviour[sec.ia - 1];
  }
  fx.has_right = sec.ib < path.n_intervals();
  if (fx.has_right) {
    fx.s_b = path.behaviour[sec.ib];
    fx.theta_n = path.bearings[sec.ib];
    fx.nu_n = path.steps[sec.ib];
    fx.dt_n = path.dt(sec.ib);
  }
  for (std::size_t j = j1 + 1; j < j2; ++j) {
    fx.obs_times.push_back(obs.times[j]);
    fx.obs_locs.push_back(obs.locations[j]);
  }
  return sec;
}

bool mh_path_update(RefinedPath& path, std::vector<std::size_t>& obs_grid_idx,
                    const Parameters& params, const PathSection& section, double delta_t,
                    Rng& rng) {
  const SectionFixture& fx = section.fixture;
  const std::size_t ia = section.ia;
  const std::size_t ib = section.ib;
  const std::size_t m_cur = ib - ia;

  const double cur_lm = section_log_marginal(
      params, fx, std::span(path.times).subspan(ia, m_cur + 1),
      std::span(path.behaviour).subspan(ia, m_cur), std::span(path.bearings).subspan(ia, m_cur));

  auto prop = propose_section(params, fx, delta_t, rng);
  if (!prop) return false;
  if (prop->behaviour_only != (m_cur == 1)) return false;  // incompatible strata

  const double log_alpha = prop->log_marginal_Zb - cur_lm;
  if (!(std::log(rng.uniform() + 1e-300) < log_alpha)) return false;

  const std::size_t m_new = prop->times.size() - 1;
  if (prop->behaviour_only) {
    path.behaviour[ia] = prop->states[0];
    return true;
  }

  path.times.erase(path.times.begin() + static_cast<std::ptrdiff_t>(ia) + 1,
                   path.times.begin() + static_cast<std::ptrdiff_t>(ib));
  path.times.insert(path.times.begin() + static_cast<std::ptrdiff_t>(ia) + 1,
                    prop->times.begin() + 1, prop->times.end() - 1);
  auto splice = [&](auto& dst, const auto& src) {
    dst.erase(dst.begin() + static_cast<std::ptrdiff_t>(ia),
              dst.begin() + static_cast<std::ptrdiff_t>(ib));
    dst.insert(dst.begin() + static_cast<std::ptrdiff_t>(ia), src.begin(), src.end());
  };
  splice(path.behaviour, prop->states);
  splice(path.bearings, prop->bearings);
  splice(path.steps, prop->steps);

  if (m_new != m_cur) {
    const std::ptrdiff_t shift =
        static_cast<std::ptrdiff_t>(m_new) - static_cast<std::ptrdiff_t>(m_cur);
    for (auto& idx : obs_grid_idx)
      if (idx >= ib) idx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) + shift);
  }
  if (!fx.obs_times.empty()) {
    // Interior observation knots sit at new offsets in the proposed grid.
    const auto it_a = std::find(obs_grid_idx.begin(), obs_grid_idx.end(), ia);
    std::size_t j = static_cast<std::size_t>(it_a - obs_grid_idx.begin()) + 1;
    for (std::size_t g = 0; g < fx.obs_times.size(); ++g, ++j) {
      const auto it = std::lower_bound(prop->times.begin(), prop->times.end(),
                                       fx.obs_times[g] - 1e-9);
      obs_grid_idx[j] = ia + static_cast<std::size_t>(it - prop->times.begin());
    }
  }
  return true;
}

std::pair<RefinedPath, Parameters> initialize(const ObservationSeries& obs, double delta_t,
                                              double speed_threshold, const PriorSpec& priors) {
  obs.validate();
  priors.validate();
  const int n_states = priors.n_states();

  BehaviourTrajectory span;
  span.start_time = obs.times.front();
  span.end_time = obs.times.back();
  span.segments.push_back({span.start_time, 0});

  RefinedPath path;
  path.times = build_refined_times(span, delta_t, std::span(obs.times).subspan(1, obs.size() - 2));
  const std::size_t n = path.times.size() - 1;
  path.behaviour.assign(n, 0);
  path.bearings.assign(n, 0.0);
  path.steps.assign(n, 0.0);
  path.origin = obs.locations.front();

  std::vector<double> xs(obs.size()), ys(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) {
    xs[j] = obs.locations[j].x;
    ys[j] = obs.locations[j].y;
  }
  const CubicSpline sx(obs.times, xs), sy(obs.times, ys);

  std::vector<double> px(n + 1), py(n + 1), speed(n);
  for (std::size_t i = 0; i <= n; ++i) {
    px[i] = sx(path.times[i]);
    py[i] = sy(path.times[i]);
  }
  double prev_bearing = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = px[i + 1] - px[i];
    const double dy = py[i + 1] - py[i];
    const double nu = std::hypot(dx, dy);
    double theta = nu > 0.0 ? std::atan2(dy, dx) : prev_bearing;
    if (i > 0) theta = prev_bearing + wrap_to_pi(theta - prev_bearing);
    path.bearings[i] = theta;
    path.steps[i] = nu;
    speed[i] = nu / path.dt(i);
    prev_bearing = theta;
  }

  // Behaviour split: threshold for two states, equal quantile bins otherwise.
  if (n_states == 2) {
    for (std::size_t i = 0; i < n; ++i) path.behaviour[i] = speed[i] > speed_threshold ? 1 : 0;
  } else {
    std::vector<double> sorted = speed;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int s = 1; s < n_states; ++s)
      cuts.push_back(sorted[static_cast<std::size_t>(
          static_cast<double>(sorted.size()) * s / n_states)]);
    for (std::size_t i = 0; i < n; ++i) {
      int state = 0;
      while (state + 1 < n_states && speed[i] > cuts[static_cast<std::size_t>(state)]) ++state;
      path.behaviour[i] = state;
    }
  }

  // Moment-matched movement estimates per state.
  Parameters params;
  params.movement.resize(static_cast<std::size_t>(n_states));
  auto estimate = [&](int state, bool global, MovementParams& p) {
    double sum = 0.0, sum2 = 0.0, db2 = 0.0;
    std::size_t cnt = 0, cnt_db = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!global && path.behaviour[i] != state) continue;
      sum += speed[i];
      sum2 += speed[i] * speed[i];
      ++cnt;
      if (i > 0 && (global || path.behaviour[i - 1] == state)) {
        const double d = path.bearings[i] - path.bearings[i - 1];
        db2 += d * d / path.dt(i - 1);
        ++cnt_db;
      }
    }
    if (cnt == 0) return false;
    const double mean = sum / static_cast<double>(cnt);
    const double var = cnt > 1 ? std::max(sum2 / static_cast<double>(cnt) - mean * mean, 0.0)
                               : 0.0;
    p.mu = std::max(mean, 1e-3);
    p.beta = 1.0;  // no moment estimator for the reversion rate; MH corrects it
    p.sigma_psi_sq = std::max(2.0 * p.beta * var, 1e-6);
    p.sigma_theta_sq = cnt_db > 0 ? std::max(db2 / static_cast<double>(cnt_db), 1e-8) : 1e-2;
    return true;
  };
  bool fell_back = false;
  for (int s = 0; s < n_states; ++s)
    if (!estimate(s, false, params.movement[static_cast<std::size_t>(s)])) fell_back = true;
  if (fell_back) {
    std::clog << "ctmove: initialize: empty behaviour class, using global estimates\n";
    MovementParams global;
    estimate(0, true, global);
    for (auto& p : params.movement) p = global;
  }
  // Pull the starting point inside the prior support (ratio bound).
  for (auto& p : params.movement) {
    const double bound = priors.r_max * p.mu;
    if (std::sqrt(p.long_term_speed_var()) > bound) {
      p.sigma_psi_sq = 0.98 * 2.0 * p.beta * bound * bound;
      std::clog << "ctmove: initialize: shrank sigma_psi_sq into the ratio-bound support\n";
    }
  }

  // Behaviour parameters: conjugate posterior means of the thresholded path.
  const SufficientStats stats = behaviour_sufficient_stats(path, n_states);
  params.behaviour.lambda.resize(n_states);
  params.behaviour.q = Eigen::MatrixXd::Zero(n_states, n_states);
  for (int i = 0; i < n_states; ++i) {
    params.behaviour.lambda[i] = (priors.lambda_shape[i] + stats.transitions.row(i).sum()) /
                                 (priors.lambda_rate[i] + stats.time_in_state[i]);
    if (n_states == 2) {
      params.behaviour.q(i, 1 - i) = 1.0;
    } else {
      double total = 0.0;
      for (int j = 0; j < n_states; ++j)
        if (j != i) total += priors.dirichlet_weight + stats.transitions(i, j);
      for (int j = 0; j < n_states; ++j)
        if (j != i)
          params.behaviour.q(i, j) = (priors.dirichlet_weight + stats.transitions(i, j)) / total;
    }
  }
  params.validate();
  return {std::move(path), std::move(params)};
}

PosteriorSamples run_sampler(const ObservationSeries& obs, const SamplerConfig& config,
                             const PriorSpec& priors, Rng& rng) {
  config.validate();
  auto [path, params] = initialize(obs, config.delta_t, config.speed_threshold, priors);
  std::vector<std::size_t> obs_grid_idx = locate_observation_indices(path, obs);

  const int n_states = priors.n_states();
  if (config.rw_sd.size() != 1 && config.rw_sd.size() != static_cast<std::size_t>(n_states))
    throw std::invalid_argument("SamplerConfig: rw_sd needs 1 or n_states entries");
  std::vector<std::array<double, 4>> rw_sd(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s)
    for (int k = 0; k < 4; ++k) {
      const double fixed =
          config.rw_sd[config.rw_sd.size() == 1 ? 0 : static_cast<std::size_t>(s)]
                      [static_cast<std::size_t>(k)];
      rw_sd[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)] =
          fixed > 0.0
              ? fixed
              : config.rw_sd_rel *
                    movement_field(params.movement[static_cast<std::size_t>(s)], k);
    }

  const std::int64_t total_stored = config.n_iter / config.thin;
  const auto burn = static_cast<std::int64_t>(config.burn_in_fraction *
                                              static_cast<double>(total_stored));
  const std::int64_t kept = total_stored - burn;

  PosteriorSamples out;
  out.n_states = n_states;
  out.draws.resize(kept, static_cast<int>(parameter_names(n_states).size()));
  out.draw_iters.reserve(static_cast<std::size_t>(kept));

  std::int64_t stored = 0;
  for (std::int64_t iter = 0; iter < config.n_iter; ++iter) {
    try {
      const SufficientStats stats = behaviour_sufficient_stats(path, n_states);
      params.behaviour = gibbs_behaviour(stats, priors, rng);

      out.movement_acc.attempted += 1;
      if (mh_movement_update(params, path, priors, rw_sd, rng)) out.movement_acc.accepted += 1;

      for (int u = 0; u < config.path_updates_per_iter; ++u) {
        const PathSection sec = select_section(path, obs, obs_grid_idx,
                                               config.section_min_points,
                                               config.section_max_points, rng);
        out.path_acc.attempted += 1;
        if (mh_path_update(path, obs_grid_idx, params, sec, config.delta_t, rng))
          out.path_acc.accepted += 1;
      }
    } catch (const SamplerError&) {
      throw;
    } catch (const std::exception& e) {
      throw SamplerError(iter + 1, "iteration", e.what());
    }

    if ((iter + 1) % config.thin == 0) {
      ++stored;
      const std::int64_t kept_idx = stored - burn - 1;
      if (kept_idx >= 0) {
        out.draws.row(kept_idx) = flatten_parameters(params).transpose();
        out.draw_iters.push_back(iter + 1);
        if (kept_idx % config.path_store_stride == 0) {
          out.snapshot_draws.push_back(kept_idx);
          out.snapshots.push_back(path);
        }
      }
    }
  }
  return out;
}

}  // namespace ctmove
