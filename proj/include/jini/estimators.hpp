#pragma once

#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "jini/models.hpp"

namespace jini {

struct FitConfig {
  int max_iter = 100;
  double grad_tol = 1e-8;
  int step_halvings = 30;
  double ridge = 0.0;
};

struct FitResult {
  ParamVec params;
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;
  /// Norm of the log-likelihood gradient (natural scale). For alpha sitting
  /// on a box edge the outward component is excluded.
  double grad_norm = 0.0;
  /// Free-form diagnostic, e.g. "alpha at lower bound".
  std::string note;
};

/// Fitters take an optional warm start; without one they start from a
/// least-squares fit of the link-transformed response.
using Start = std::optional<ParamVec>;

/// Bernoulli MLE by Newton / Fisher scoring with step-halving. Separation
/// (coefficients running off to infinity) returns the box-projected iterate
/// with converged = false.
FitResult fit_logistic_mle(const Dataset& data, const FitConfig& cfg = {}, const Start& start = {});

/// Poisson MLE treating y as exact (any censoring threshold is ignored).
FitResult fit_poisson_mle(const Dataset& data, const FitConfig& cfg = {}, const Start& start = {});

/// Negative binomial MLE of (beta, alpha), alpha last. Alternates a Newton
/// solve for beta at fixed alpha with a bracketed Newton search on log alpha.
/// Ignores any censoring threshold.
FitResult fit_negbin_mle(const Dataset& data, const FitConfig& cfg = {}, const Start& start = {});

/// Right-censored Poisson MLE: observations at C contribute log P(Y >= C).
FitResult fit_censored_poisson_mle(const Dataset& data, const FitConfig& cfg = {},
                                   const Start& start = {});

/// Right-censored negative binomial MLE by BFGS on (beta, log alpha).
FitResult fit_censored_negbin_mle(const Dataset& data, const FitConfig& cfg = {},
                                  const Start& start = {});

/// theta + B theta + c + noise_sd * Phi^{-1}(row[0..p)).
ParamVec synthetic_initial(const SyntheticBiasSpec& spec, const ParamVec& theta,
                           std::span<const double> row);

/// Log-likelihoods and their analytic gradients on the natural parameter
/// scale. Exposed for finite-difference checks and diagnostics.
namespace loglik {

double logistic(const Dataset& data, const ParamVec& beta);
Eigen::VectorXd logistic_grad(const Dataset& data, const ParamVec& beta);

double poisson(const Dataset& data, const ParamVec& beta);
Eigen::VectorXd poisson_grad(const Dataset& data, const ParamVec& beta);

double negbin(const Dataset& data, const ParamVec& theta);
Eigen::VectorXd negbin_grad(const Dataset& data, const ParamVec& theta);

double censored_poisson(const Dataset& data, const ParamVec& beta);
Eigen::VectorXd censored_poisson_grad(const Dataset& data, const ParamVec& beta);

double censored_negbin(const Dataset& data, const ParamVec& theta);
Eigen::VectorXd censored_negbin_grad(const Dataset& data, const ParamVec& theta);

/// log P(Y >= c) for Y ~ Poisson(lambda), c >= 1.
double poisson_log_tail(std::int64_t c, double lambda);

}  // namespace loglik

}  // namespace jini
