#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctmove/bridges.hpp"

namespace ctmove {

// Prior on one positive movement parameter.
struct ParamPrior {
  enum class Kind { flat_positive, trunc_normal };
  Kind kind = Kind::flat_positive;
  double mean = 0.0;
  double sd = 1.0;
};

// Movement parameter kinds, in storage order.
enum : int { kSigmaThetaSq = 0, kMu = 1, kBeta = 2, kSigmaPsiSq = 3 };

struct PriorSpec {
  Eigen::VectorXd lambda_shape;  // gamma shape c_i per state
  Eigen::VectorXd lambda_rate;   // gamma rate d_i per state
  double dirichlet_weight = 1.0;  // exchangeable f entries for the q rows
  std::vector<std::array<ParamPrior, 4>> movement;  // [state][kind]
  // Upper bound on sqrt(long-term speed variance) / mu per state; keeps the
  // equilibrium speed mass away from negative values.
  double r_max = 1.0 / 3.0;

  int n_states() const { return static_cast<int>(movement.size()); }
  void validate() const;
  static PriorSpec defaults(int n_states);
};

struct SamplerConfig {
  std::int64_t n_iter = 1000;
  int thin = 1;
  double burn_in_fraction = 0.25;
  int path_updates_per_iter = 100;
  int section_min_points = 4;   // refined points strictly inside a section
  int section_max_points = 24;
  double delta_t = 2.0;         // hours
  // Random-walk proposal s.d. per movement parameter (absolute). One entry:
  // shared across states; n_states entries: per state. A zero value means
  // automatic: rw_sd_rel times that state's initial estimate.
  std::vector<std::array<double, 4>> rw_sd{{0.0, 0.0, 0.0, 0.0}};
  double rw_sd_rel = 0.15;
  int path_store_stride = 10;   // snapshot every k-th kept draw
  double speed_threshold = 100.0;  // m/h, behaviour initialization split
  std::uint64_t seed = 1;

  void validate() const;
};

// Occupancy times and transition counts of a fully observed behaviour chain.
struct SufficientStats {
  Eigen::VectorXd time_in_state;  // a_i, hours
  Eigen::MatrixXd transitions;    // b_ij counts, zero diagonal
};

struct AcceptanceCounter {
  std::int64_t accepted = 0;
  std::int64_t attempted = 0;
  double rate() const {
    return attempted > 0 ? static_cast<double>(accepted) / static_cast<double>(attempted) : 0.0;
  }
};

struct PosteriorSamples {
  int n_states = 0;
  std::vector<std::int64_t> draw_iters;  // 1-based sampler iteration per kept draw
  Eigen::MatrixXd draws;                 // kept draws x parameters
  std::vector<std::int64_t> snapshot_draws;  // row index into draws
  std::vector<RefinedPath> snapshots;
  AcceptanceCounter movement_acc;
  AcceptanceCounter path_acc;
};

// Column layout of a flattened parameter draw: lambda per state, q
// off-diagonals (only when n_states > 2; a 2-state q is fixed), then
// (sigma_theta_sq, mu, beta, sigma_psi_sq) per state.
std::vector<std::string> parameter_names(int n_states);
Eigen::VectorXd flatten_parameters(const Parameters& params);

class SamplerError : public std::runtime_error {
 public:
  SamplerError(std::int64_t iteration_, std::string component_, const std::string& what_)
      : std::runtime_error(what_), iteration(iteration_), component(std::move(component_)) {}
  std::int64_t iteration = 0;
  std::string component;
};

SufficientStats behaviour_sufficient_stats(const RefinedPath& path, int n_states);

// Conjugate draw of the behaviour parameters given sufficient statistics:
// gamma posteriors for the rates, Dirichlet posteriors for the switch rows
// (degenerate for two states).
BehaviourParams gibbs_behaviour(const SufficientStats& stats, const PriorSpec& priors, Rng& rng);

// Unnormalized log prior of the movement parameters; -inf when any state
// violates the speed-coherence ratio bound.
double movement_log_prior(const std::vector<MovementParams>& movement, const PriorSpec& priors);

// Simultaneous random-walk MH update of all movement parameters with
// zero-truncated Gaussian proposals (Hastings-corrected). Mutates params on
// acceptance; returns the acceptance flag.
bool mh_movement_update(Parameters& params, const RefinedPath& path, const PriorSpec& priors,
                        const std::vector<std::array<double, 4>>& rw_sd, Rng& rng);

struct PathSection {
  std::size_t ia = 0;  // grid index of a
  std::size_t ib = 0;  // grid index of b
  SectionFixture fixture;
};

// Uniformly picks a section whose endpoints are observation-aligned refined
// points and whose strictly-interior length is as close as possible to a
// target drawn from [min_points, max_points] (widening to the nearest
// observation-aligned endpoints when no exact fit exists).
PathSection select_section(const RefinedPath& path, const ObservationSeries& obs,
                           std::span<const std::size_t> obs_grid_idx, int min_points,
                           int max_points, Rng& rng);

// Independence-sampler MH step on one path section; accepts on the marginal
// density ratio of the constrained locations and splices the proposal into
// the path. obs_grid_idx is kept in sync with the new grid.
bool mh_path_update(RefinedPath& path, std::vector<std::size_t>& obs_grid_idx,
                    const Parameters& params, const PathSection& section, double delta_t,
                    Rng& rng);

// Interpolating-spline path initialization plus moment-matched starting
// parameters; behaviour split by the speed threshold (quantile bins beyond
// two states).
std::pair<RefinedPath, Parameters> initialize(const ObservationSeries& obs, double delta_t,
                                              double speed_threshold, const PriorSpec& priors);

PosteriorSamples run_sampler(const ObservationSeries& obs, const SamplerConfig& config,
                             const PriorSpec& priors, Rng& rng);

}  // namespace ctmove
