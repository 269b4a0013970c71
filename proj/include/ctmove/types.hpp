#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ctmove {

// Canonical units throughout: hours, metres, radians. Conversion happens at
// the I/O boundary only.

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double norm() const { return std::hypot(x, y); }
};

// Movement parameters of one behavioural state: Brownian bearing volatility
// plus the three Ornstein-Uhlenbeck speed parameters.
struct MovementParams {
  double sigma_theta_sq = 1.0;  // rad^2 / h
  double mu = 1.0;              // m / h
  double beta = 1.0;            // 1 / h
  double sigma_psi_sq = 1.0;    // m^2 / h^3

  // Stationary variance of the speed process.
  double long_term_speed_var() const { return sigma_psi_sq / (2.0 * beta); }

  void validate() const;
};

// Continuous-time Markov chain over behavioural states: exponential exit
// rates lambda and a switch-probability matrix q with zero diagonal.
struct BehaviourParams {
  Eigen::VectorXd lambda;  // 1 / h, one per state
  Eigen::MatrixXd q;       // rows sum to 1, q(i,i) = 0

  int n_states() const { return static_cast<int>(lambda.size()); }
  void validate() const;
};

struct Parameters {
  BehaviourParams behaviour;
  std::vector<MovementParams> movement;  // one per state

  void validate() const;
};

// Piecewise-constant state function on [start_time, end_time).
struct BehaviourTrajectory {
  struct Segment {
    double entry_time = 0.0;
    int state = 0;
  };

  double start_time = 0.0;
  double end_time = 0.0;
  std::vector<Segment> segments;  // first entry_time == start_time

  int state_at(double t) const;
  // Switch times strictly inside (start_time, end_time).
  std::vector<double> switch_times() const;
  void validate(int n_states) const;
};

// Discrete approximation of the joint behaviour/bearing/step process on a
// refined time grid. Interval i = [times[i], times[i+1]) carries behaviour,
// bearing theta_i (unwrapped, any real) and step nu_i = psi(t_i) * dt_i
// (may be negative). Locations are implied: origin plus cumulative sums of
// (nu cos theta, nu sin theta).
struct RefinedPath {
  std::vector<double> times;     // t_0 .. t_N, strictly increasing
  std::vector<int> behaviour;    // length N
  std::vector<double> bearings;  // length N
  std::vector<double> steps;     // length N
  Vec2 origin;                   // location at t_0

  std::size_t n_intervals() const { return bearings.size(); }
  double dt(std::size_t i) const { return times[i + 1] - times[i]; }
  double duration() const { return times.back() - times.front(); }
  void validate() const;
};

// Irregularly timed 2-D locations, assumed error-free.
struct ObservationSeries {
  std::vector<double> times;  // hours, strictly increasing
  std::vector<Vec2> locations;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

}  // namespace ctmove
