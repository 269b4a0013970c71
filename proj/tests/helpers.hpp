#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>

#include <Eigen/Dense>

namespace testutil {

inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Asymptotic one-sample KS acceptance at the given alpha.
inline bool ks_one_sample_pass(const std::vector<double>& x,
                               const std::function<double(double)>& cdf, double alpha) {
  const double c = alpha <= 0.01 ? 1.628 : 1.358;
  return ks_statistic(x, cdf) <= c / std::sqrt(static_cast<double>(x.size()));
}

inline double ks_two_sample_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

inline bool ks_two_sample_pass(const std::vector<double>& a, const std::vector<double>& b,
                               double alpha) {
  const double c = alpha <= 0.01 ? 1.628 : 1.358;
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  return ks_two_sample_statistic(a, b) <= c * std::sqrt((n + m) / (n * m));
}

inline double gamma_cdf(double x, double shape, double rate) {
  boost::math::gamma_distribution<double> g(shape, 1.0 / rate);
  return boost::math::cdf(g, x);
}

inline double chi2_quantile(double df, double p) {
  boost::math::chi_squared_distribution<double> c(df);
  return boost::math::quantile(c, p);
}

// Two-sample chi-square homogeneity test over given bin counts.
inline bool chi2_two_sample_pass(const std::vector<double>& count_a,
                                 const std::vector<double>& count_b, double alpha) {
  const double na = std::accumulate(count_a.begin(), count_a.end(), 0.0);
  const double nb = std::accumulate(count_b.begin(), count_b.end(), 0.0);
  double stat = 0.0;
  int df = -1;
  for (std::size_t k = 0; k < count_a.size(); ++k) {
    const double pooled = (count_a[k] + count_b[k]) / (na + nb);
    if (pooled <= 0.0) continue;
    const double ea = na * pooled, eb = nb * pooled;
    stat += (count_a[k] - ea) * (count_a[k] - ea) / ea +
            (count_b[k] - eb) * (count_b[k] - eb) / eb;
    ++df;
  }
  return stat <= chi2_quantile(std::max(df, 1), 1.0 - alpha);
}

struct MeanVar {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double var() const { return m2 / (n - 1.0); }
  double mean_se() const { return std::sqrt(var() / n); }
  double var_se() const { return var() * std::sqrt(2.0 / (n - 1.0)); }
};

// Conditions a joint Gaussian on its last `k` coordinates through the
// precision matrix, an algebraic route independent of Schur-complement code
// under test.
inline void mvn_condition_last_precision(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                         const Eigen::VectorXd& tail_value,
                                         Eigen::VectorXd& cond_mean, Eigen::MatrixXd& cond_cov) {
  const Eigen::Index n = mean.size();
  const Eigen::Index k = tail_value.size();
  const Eigen::Index f = n - k;
  const Eigen::MatrixXd prec = cov.inverse();
  const Eigen::MatrixXd p11 = prec.topLeftCorner(f, f);
  const Eigen::MatrixXd p12 = prec.topRightCorner(f, k);
  cond_cov = p11.inverse();
  cond_mean = mean.head(f) - cond_cov * p12 * (tail_value - mean.tail(k));
}

}  // namespace testutil
