#pragma once

// Damped Newton driver shared by the GLM-type fitters. The caller supplies
// per-observation log-likelihood terms as a function of the linear predictor.

#include <functional>

#include <Eigen/Dense>

#include "jini/estimators.hpp"

namespace jini::detail {

struct EtaTerms {
  double loglik = 0.0;
  Eigen::VectorXd score;   // d loglik / d eta_i
  Eigen::VectorXd weight;  // -d^2 loglik / d eta_i^2, expected >= 0
};

/// Evaluates the terms at eta. When `derivatives` is false only loglik is needed.
using EtaTermFn = std::function<void(const Eigen::VectorXd& eta, bool derivatives, EtaTerms& out)>;

struct NewtonOutcome {
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;
  double grad_norm = 0.0;
  std::string note;
};

/// Linear predictors beyond this magnitude mean the fitted mean is numerically
/// degenerate; a stationary point there is treated as divergence.
inline constexpr double kSaturatedEta = 30.0;
inline constexpr double kNewtonStepTol = 1e-4;

NewtonOutcome newton_glm(const Eigen::MatrixXd& x, const EtaTermFn& terms, Eigen::VectorXd beta,
                         const FitConfig& cfg, double bound);

/// (X'X + ridge I)^{-1} X'z with a small jitter when X'X is singular.
Eigen::VectorXd least_squares_start(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, double ridge);

/// Solves H d = g for symmetric positive (semi)definite H, adding jitter as needed.
Eigen::VectorXd solve_spd(Eigen::MatrixXd h, const Eigen::VectorXd& g);

/// X' diag(w) X.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& x, const Eigen::VectorXd& w);

/// log(1 + e^x) without overflow.
double log1pexp(double x);

/// Precomputed sum of log(y_i!) terms.
double log_factorial_sum(const Eigen::VectorXd& y);

}  // namespace jini::detail
