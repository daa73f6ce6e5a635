#pragma once

// Shared negative binomial pieces. The pmf is parameterised by the mean mu and
// the size r = 1/alpha:
//
//   log f(k) = sum_{j<k} log(r + j) - log k! - r log1p(mu/r) + k log(mu/(r+mu))
//
// The gamma-function ratio is expanded as a finite sum so only elementary
// functions are evaluated.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace jini::detail {

/// sum_i sum_{j<y_i} g(r + j) regrouped as runs of j over which the number of
/// included y_i > j is constant. Long runs of 1/(r+j) and 1/(r+j)^2 use
/// digamma and trigamma differences.
struct CountHistogram {
  struct Run {
    double begin = 0.0;  // first j
    double end = 0.0;    // one past the last j
    double weight = 0.0;
  };
  std::vector<Run> runs;

  static CountHistogram build(const Eigen::VectorXd& y, const std::vector<bool>* skip = nullptr);
  double sum_log(double r) const;       // sum_i sum_{j<y_i} log(r + j)
  double sum_inv(double r) const;       // sum_i sum_{j<y_i} 1 / (r + j)
  double sum_inv_sq(double r) const;    // sum_i sum_{j<y_i} 1 / (r + j)^2
};

/// Terms of the uncensored NB log-likelihood that depend on r, at fixed mu.
struct AlphaDerivs {
  double d1 = 0.0;  // d loglik / dr
  double d2 = 0.0;  // d^2 loglik / dr^2
};

/// Derivatives in r of the uncensored NB log-likelihood at fixed means.
AlphaDerivs nb_r_derivs(const CountHistogram& hist, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& mu, double r, const std::vector<bool>* skip = nullptr);

/// Full uncensored NB log-likelihood (including -log y!) over included observations.
double nb_loglik(const CountHistogram& hist, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                 double r, double log_fact, const std::vector<bool>* skip = nullptr);

/// Tail quantities for a censored observation: S = P(Y >= c) and the
/// conditional expectations of the scores given Y >= c.
struct NbTail {
  double log_s = 0.0;
  double d_eta = 0.0;  // d log S / d eta
  double d_r = 0.0;    // d log S / d r
};

NbTail nb_tail(std::int64_t c, double mu, double r);

}  // namespace jini::detail
