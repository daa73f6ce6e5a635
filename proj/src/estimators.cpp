#include "jini/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "jini/error.hpp"
#include "newton.hpp"

namespace jini {

namespace {

using detail::EtaTerms;

void require_data(const Dataset& data, ResponseKind kind) {
  validate(data);
  if (data.kind != kind) {
    throw InvalidArgument(kind == ResponseKind::Binary ? "expected binary responses"
                                                       : "expected count responses");
  }
}

void require_dim(const Dataset& data, const ParamVec& beta, std::size_t extra = 0) {
  if (static_cast<std::size_t>(beta.size()) != data.design->p() + extra) {
    throw InvalidArgument("parameter dimension does not match the design");
  }
}

// ---- logistic -------------------------------------------------------------

void logistic_terms(const Eigen::VectorXd& y, const Eigen::VectorXd& eta, bool derivatives,
                    EtaTerms& t) {
  const auto n = eta.size();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ll += y[i] * eta[i] - detail::log1pexp(eta[i]);
  t.loglik = ll;
  if (!derivatives) return;
  t.score.resize(n);
  t.weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = logistic(eta[i]);
    const double one_minus = logistic(-eta[i]);
    t.score[i] = y[i] > 0.5 ? one_minus : -mu;
    t.weight[i] = mu * one_minus;
  }
}

// ---- poisson --------------------------------------------------------------

void poisson_terms(const Eigen::VectorXd& y, double log_fact, const Eigen::VectorXd& eta,
                   bool derivatives, EtaTerms& t) {
  const auto n = eta.size();
  double ll = -log_fact;
  for (Eigen::Index i = 0; i < n; ++i) ll += y[i] * eta[i] - std::exp(eta[i]);
  t.loglik = ll;
  if (!derivatives) return;
  t.score.resize(n);
  t.weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = std::exp(eta[i]);
    t.score[i] = y[i] - mu;
    t.weight[i] = mu;
  }
}

// ---- censored poisson -----------------------------------------------------

// For a censored observation: log S, and h = lambda pmf(C-1) / S which equals
// E[Y | Y >= C] - lambda.
struct TailTerms {
  double log_s;
  double h;
};

TailTerms poisson_tail_terms(std::int64_t c, double lambda) {
  const double log_s = loglik::poisson_log_tail(c, lambda);
  const double cd = static_cast<double>(c);
  const double log_pmf_c = cd * std::log(lambda) - lambda - boost::math::lgamma(cd + 1.0);
  return {log_s, cd * std::exp(log_pmf_c - log_s)};
}

void censored_poisson_terms(const Eigen::VectorXd& y, std::int64_t c, double log_fact,
                            const Eigen::VectorXd& eta, bool derivatives, EtaTerms& t) {
  const auto n = eta.size();
  const double cd = static_cast<double>(c);
  if (derivatives) {
    t.score.resize(n);
    t.weight.resize(n);
  }
  double ll = -log_fact;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lambda = std::exp(eta[i]);
    if (y[i] >= cd) {
      const auto tail = poisson_tail_terms(c, lambda);
      if (!std::isfinite(tail.log_s)) {
        throw NumericFailure("poisson tail probability underflow at observation " +
                                 std::to_string(i),
                             static_cast<std::size_t>(i));
      }
      ll += tail.log_s;
      if (derivatives) {
        t.score[i] = tail.h;
        t.weight[i] = std::max(0.0, tail.h * (lambda + tail.h - cd));
      }
    } else {
      ll += y[i] * eta[i] - lambda;
      if (derivatives) {
        t.score[i] = y[i] - lambda;
        t.weight[i] = lambda;
      }
    }
  }
  t.loglik = ll;
}

double log_fact_uncensored(const Eigen::VectorXd& y, std::optional<std::int64_t> c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (c && y[i] >= static_cast<double>(*c)) continue;
    if (y[i] > 1.0) s += boost::math::lgamma(y[i] + 1.0);
  }
  return s;
}

FitResult to_fit_result(detail::NewtonOutcome o) {
  FitResult r;
  r.params = std::move(o.beta);
  r.converged = o.converged;
  r.iterations = o.iterations;
  r.loglik = o.loglik;
  r.grad_norm = o.grad_norm;
  r.note = std::move(o.note);
  return r;
}

// Warm start clipped into the coefficient box, or the least-squares fit of
// the link-transformed response z.
template <class LinkResponse>
Eigen::VectorXd initial_beta(const Dataset& data, const Start& start, const FitConfig& cfg,
                             LinkResponse z) {
  const auto p = static_cast<Eigen::Index>(data.design->p());
  if (start) {
    if (start->size() < p || !start->head(p).allFinite()) {
      throw InvalidArgument("warm start has the wrong dimension or non-finite entries");
    }
    return start->head(p).cwiseMax(-kBetaBound).cwiseMin(kBetaBound);
  }
  return detail::least_squares_start(data.design->x, z(), cfg.ridge);
}

}  // namespace

FitResult fit_logistic_mle(const Dataset& data, const FitConfig& cfg, const Start& start) {
  require_data(data, ResponseKind::Binary);
  const Eigen::VectorXd y = data.y_as_vector();
  const auto& x = data.design->x;
  Eigen::VectorXd beta0 = initial_beta(data, start, cfg, [&y] {
    return Eigen::VectorXd(y.unaryExpr([](double v) {
      const double p = (v + 0.5) / 2.0;
      return std::log(p / (1.0 - p));
    }));
  });
  auto terms = [&y](const Eigen::VectorXd& eta, bool d, EtaTerms& t) { logistic_terms(y, eta, d, t); };
  return to_fit_result(detail::newton_glm(x, terms, std::move(beta0), cfg, kBetaBound));
}

FitResult fit_poisson_mle(const Dataset& data, const FitConfig& cfg, const Start& start) {
  require_data(data, ResponseKind::Count);
  const Eigen::VectorXd y = data.y_as_vector();
  const auto& x = data.design->x;
  Eigen::VectorXd beta0 = initial_beta(data, start, cfg, [&y] {
    return Eigen::VectorXd((y.array() + 0.5).log().matrix());
  });
  const double log_fact = detail::log_factorial_sum(y);
  auto terms = [&y, log_fact](const Eigen::VectorXd& eta, bool d, EtaTerms& t) {
    poisson_terms(y, log_fact, eta, d, t);
  };
  return to_fit_result(detail::newton_glm(x, terms, std::move(beta0), cfg, kBetaBound));
}

FitResult fit_censored_poisson_mle(const Dataset& data, const FitConfig& cfg, const Start& start) {
  require_data(data, ResponseKind::Count);
  if (!data.censor_at) throw InvalidArgument("censored fit requires a censoring threshold");
  const Eigen::VectorXd y = data.y_as_vector();
  const auto& x = data.design->x;
  const auto c = *data.censor_at;
  Eigen::VectorXd beta0 = initial_beta(data, start, cfg, [&y] {
    return Eigen::VectorXd((y.array() + 0.5).log().matrix());
  });
  const double log_fact = log_fact_uncensored(y, c);
  auto terms = [&y, c, log_fact](const Eigen::VectorXd& eta, bool d, EtaTerms& t) {
    censored_poisson_terms(y, c, log_fact, eta, d, t);
  };
  return to_fit_result(detail::newton_glm(x, terms, std::move(beta0), cfg, kBetaBound));
}

ParamVec synthetic_initial(const SyntheticBiasSpec& spec, const ParamVec& theta,
                           std::span<const double> row) {
  const auto p = static_cast<Eigen::Index>(spec.p());
  if (theta.size() != p || spec.B.rows() != p || spec.B.cols() != p) {
    throw InvalidArgument("synthetic estimator dimensions disagree");
  }
  ParamVec out = theta + spec.B * theta + spec.c;
  if (spec.noise_sd > 0.0) {
    if (row.size() < static_cast<std::size_t>(p)) {
      throw InvalidArgument("bank row shorter than the parameter dimension");
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      out[j] += spec.noise_sd * normal_quantile(row[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

namespace loglik {

double poisson_log_tail(std::int64_t c, double lambda) {
  if (c <= 0) return 0.0;
  if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
  const double cd = static_cast<double>(c);
  if (lambda < cd) {
    // S = pmf(c) * sum_j prod_{i=1..j} lambda / (c + i)
    const double log_pmf_c = cd * std::log(lambda) - lambda - boost::math::lgamma(cd + 1.0);
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1; j < 100000; ++j) {
      term *= lambda / (cd + j);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return log_pmf_c + std::log(sum);
  }
  // lambda >= c: the lower tail is at most about one half, no cancellation.
  double lower = 0.0;
  const double log_lambda = std::log(lambda);
  for (std::int64_t k = 0; k < c; ++k) {
    const double kd = static_cast<double>(k);
    lower += std::exp(kd * log_lambda - lambda - boost::math::lgamma(kd + 1.0));
  }
  return std::log1p(-lower);
}

double logistic(const Dataset& data, const ParamVec& beta) {
  require_dim(data, beta);
  EtaTerms t;
  logistic_terms(data.y_as_vector(), data.design->x * beta, false, t);
  return t.loglik;
}

Eigen::VectorXd logistic_grad(const Dataset& data, const ParamVec& beta) {
  require_dim(data, beta);
  EtaTerms t;
  logistic_terms(data.y_as_vector(), data.design->x * beta, true, t);
  return data.design->x.transpose() * t.score;
}

double poisson(const Dataset& data, const ParamVec& beta) {
  require_dim(data, beta);
  const Eigen::VectorXd y = data.y_as_vector();
  EtaTerms t;
  poisson_terms(y, detail::log_factorial_sum(y), data.design->x * beta, false, t);
  return t.loglik;
}

Eigen::VectorXd poisson_grad(const Dataset& data, const ParamVec& beta) {
  require_dim(data, beta);
  const Eigen::VectorXd y = data.y_as_vector();
  EtaTerms t;
  poisson_terms(y, 0.0, data.design->x * beta, true, t);
  return data.design->x.transpose() * t.score;
}

double censored_poisson(const Dataset& data, const ParamVec& beta) {
  require_dim(data, beta);
  if (!data.censor_at) throw InvalidArgument("censored likelihood requires a threshold");
  const Eigen::VectorXd y = data.y_as_vector();
  EtaTerms t;
  censored_poisson_terms(y, *data.censor_at, log_fact_uncensored(y, data.censor_at),
                         data.design->x * beta, false, t);
  return t.loglik;
}

Eigen::VectorXd censored_poisson_grad(const Dataset& data, const ParamVec& beta) {
  require_dim(data, beta);
  if (!data.censor_at) throw InvalidArgument("censored likelihood requires a threshold");
  EtaTerms t;
  censored_poisson_terms(data.y_as_vector(), *data.censor_at, 0.0, data.design->x * beta, true, t);
  return data.design->x.transpose() * t.score;
}

}  // namespace loglik

}  // namespace jini
