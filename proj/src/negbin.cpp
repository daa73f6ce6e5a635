#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "jini/error.hpp"
#include "jini/estimators.hpp"
#include "negbin_detail.hpp"
#include "newton.hpp"

namespace jini {

namespace detail {

CountHistogram CountHistogram::build(const Eigen::VectorXd& y, const std::vector<bool>* skip) {
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (skip && (*skip)[static_cast<std::size_t>(i)]) continue;
    if (y[i] > 0.0) vals.push_back(y[i]);
  }
  std::sort(vals.begin(), vals.end());
  CountHistogram h;
  double prev = 0.0;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    if (vals[k] == prev) continue;
    h.runs.push_back({prev, vals[k], static_cast<double>(vals.size() - k)});
    prev = vals[k];
  }
  return h;
}

namespace {
constexpr double kShortRun = 24.0;
}  // namespace

double CountHistogram::sum_log(double r) const {
  double s = 0.0;
  for (const auto& run : runs) {
    double part = 0.0;
    for (double j = run.begin; j < run.end; j += 1.0) part += std::log(r + j);
    s += run.weight * part;
  }
  return s;
}

double CountHistogram::sum_inv(double r) const {
  double s = 0.0;
  for (const auto& run : runs) {
    double part = 0.0;
    if (run.end - run.begin <= kShortRun) {
      for (double j = run.begin; j < run.end; j += 1.0) part += 1.0 / (r + j);
    } else {
      part = boost::math::digamma(r + run.end) - boost::math::digamma(r + run.begin);
    }
    s += run.weight * part;
  }
  return s;
}

double CountHistogram::sum_inv_sq(double r) const {
  double s = 0.0;
  for (const auto& run : runs) {
    double part = 0.0;
    if (run.end - run.begin <= kShortRun) {
      for (double j = run.begin; j < run.end; j += 1.0) {
        const double d = r + j;
        part += 1.0 / (d * d);
      }
    } else {
      part = boost::math::trigamma(r + run.begin) - boost::math::trigamma(r + run.end);
    }
    s += run.weight * part;
  }
  return s;
}

AlphaDerivs nb_r_derivs(const CountHistogram& hist, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& mu, double r, const std::vector<bool>* skip) {
  AlphaDerivs d;
  d.d1 = hist.sum_inv(r);
  d.d2 = -hist.sum_inv_sq(r);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (skip && (*skip)[static_cast<std::size_t>(i)]) continue;
    const double rm = r + mu[i];
    const double resid = mu[i] - y[i];
    d.d1 += -std::log1p(mu[i] / r) + resid / rm;
    d.d2 += mu[i] / (r * rm) - resid / (rm * rm);
  }
  return d;
}

double nb_loglik(const CountHistogram& hist, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                 double r, double log_fact, const std::vector<bool>* skip) {
  double ll = hist.sum_log(r) - log_fact;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (skip && (*skip)[static_cast<std::size_t>(i)]) continue;
    const double mu = std::exp(eta[i]);
    ll += -r * std::log1p(mu / r) + y[i] * (eta[i] - std::log(r + mu));
  }
  return ll;
}

NbTail nb_tail(std::int64_t c, double mu, double r) {
  NbTail t;
  if (c <= 0) return t;
  if (!(mu > 0.0)) {
    t.log_s = -std::numeric_limits<double>::infinity();
    return t;
  }
  const double rm = r + mu;
  const double log_p = std::log(mu) - std::log(rm);
  const double base_r = -std::log1p(mu / r);
  const auto score_eta = [&](double k) { return r * (k - mu) / rm; };

  // Lower sum over k < c.
  double lp = r * base_r;  // log pmf(0)
  double harm = 0.0;       // sum_{j<k} 1/(r+j)
  double lower = 0.0;
  double lower_eta = 0.0;
  double lower_r = 0.0;
  for (std::int64_t k = 0; k < c; ++k) {
    const double kd = static_cast<double>(k);
    const double pk = std::exp(lp);
    lower += pk;
    lower_eta += pk * score_eta(kd);
    lower_r += pk * (harm + base_r + (mu - kd) / rm);
    harm += 1.0 / (r + kd);
    lp += std::log((kd + r) / (kd + 1.0)) + log_p;
  }
  if (lower <= 0.5) {
    // The scores have zero mean, so the tail sums are minus the lower sums.
    const double s = 1.0 - lower;
    t.log_s = std::log1p(-lower);
    t.d_eta = -lower_eta / s;
    t.d_r = -lower_r / s;
    return t;
  }

  // Upper sum from k = c, scaled by pmf(c) to stay representable.
  const double lp_c = lp;
  const double p = mu / rm;
  double w = 1.0;
  double upper = 0.0;
  double upper_eta = 0.0;
  double upper_r = 0.0;
  for (std::int64_t k = c;; ++k) {
    const double kd = static_cast<double>(k);
    upper += w;
    upper_eta += w * score_eta(kd);
    upper_r += w * (harm + base_r + (mu - kd) / rm);
    const double ratio = (kd + r) / (kd + 1.0) * p;
    const double rho = r < 1.0 ? p : ratio;
    if (rho < 1.0 && w * rho / (1.0 - rho) * (1.0 + kd) < 1e-15 * upper) break;
    if (k - c > kQuantileCap) throw NumericFailure("negative binomial tail sum did not converge");
    harm += 1.0 / (r + kd);
    w *= ratio;
  }
  t.log_s = lp_c + std::log(upper);
  t.d_eta = upper_eta / upper;
  t.d_r = upper_r / upper;
  return t;
}

}  // namespace detail

namespace {

using detail::CountHistogram;
using detail::EtaTerms;

struct AlphaSolve {
  double alpha;
  std::string note;
};

// Maximises the NB profile in s = log(alpha) at fixed means, bracketed on
// [log alpha_min, log alpha_max].
AlphaSolve solve_alpha(const CountHistogram& hist, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& mu, double alpha_now, double grad_tol) {
  // g(s) = d loglik / ds = -r d1, g'(s) = r d1 + r^2 d2
  auto eval = [&](double s, double& gp) {
    const double r = std::exp(-s);
    const auto d = detail::nb_r_derivs(hist, y, mu, r);
    gp = r * d.d1 + r * r * d.d2;
    return -r * d.d1;
  };
  double lo = std::log(kAlphaMin);
  double hi = std::log(kAlphaMax);
  double gp = 0.0;
  if (eval(lo, gp) <= 0.0) return {kAlphaMin, "alpha at lower bound"};
  if (eval(hi, gp) >= 0.0) return {kAlphaMax, "alpha at upper bound"};

  double s = std::clamp(std::log(alpha_now), lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double g = eval(s, gp);
    // Stationarity in alpha on the natural scale: |g| / alpha.
    if (std::abs(g) <= 0.01 * grad_tol * std::exp(s)) break;
    if (g > 0.0) {
      lo = s;
    } else {
      hi = s;
    }
    double next = (gp < 0.0) ? s - g / gp : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-15 * (1.0 + std::abs(s))) {
      s = next;
      break;
    }
    s = next;
  }
  return {std::exp(s), {}};
}

struct NbGradient {
  Eigen::VectorXd beta;
  double alpha = 0.0;  // natural scale, KKT-projected at the box edges
  double norm() const { return std::sqrt(beta.squaredNorm() + alpha * alpha); }
};

NbGradient nb_gradient(const Eigen::MatrixXd& x, const CountHistogram& hist,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& eta, double alpha) {
  const double r = 1.0 / alpha;
  const Eigen::VectorXd mu = eta.array().exp().matrix();
  const Eigen::VectorXd score =
      (r * (y.array() - mu.array()) / (r + mu.array())).matrix();
  NbGradient g;
  g.beta = x.transpose() * score;
  g.alpha = -r * r * detail::nb_r_derivs(hist, y, mu, r).d1;
  if ((alpha <= kAlphaMin && g.alpha < 0.0) || (alpha >= kAlphaMax && g.alpha > 0.0)) g.alpha = 0.0;
  return g;
}

void nb_beta_terms(const Eigen::VectorXd& y, double r, const Eigen::VectorXd& eta, bool derivatives,
                   EtaTerms& t) {
  const auto n = eta.size();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = std::exp(eta[i]);
    ll += y[i] * eta[i] - (r + y[i]) * std::log(r + mu);
  }
  t.loglik = ll;
  if (!derivatives) return;
  t.score.resize(n);
  t.weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = std::exp(eta[i]);
    const double rm = r + mu;
    t.score[i] = r * (y[i] - mu) / rm;
    t.weight[i] = r * mu * (r + y[i]) / (rm * rm);
  }
}

}  // namespace

FitResult fit_negbin_mle(const Dataset& data, const FitConfig& cfg, const Start& start) {
  validate(data);
  if (data.kind != ResponseKind::Count) throw InvalidArgument("expected count responses");
  const auto& x = data.design->x;
  const auto p = static_cast<Eigen::Index>(data.design->p());
  const Eigen::VectorXd y = data.y_as_vector();

  Eigen::VectorXd beta;
  double alpha = 0.5;
  if (start) {
    if (start->size() != p + 1 || !start->allFinite()) {
      throw InvalidArgument("warm start has the wrong dimension or non-finite entries");
    }
    beta = start->head(p).cwiseMax(-kBetaBound).cwiseMin(kBetaBound);
    alpha = std::clamp((*start)[p], kAlphaMin, kAlphaMax);
  } else {
    beta = detail::least_squares_start(x, (y.array() + 0.5).log().matrix(), cfg.ridge);
  }

  const auto hist = CountHistogram::build(y);
  const double log_fact = detail::log_factorial_sum(y);

  FitResult out;
  out.params.resize(p + 1);
  std::string alpha_note;
  for (int outer = 0;; ++outer) {
    const double r = 1.0 / alpha;
    auto terms = [&y, r](const Eigen::VectorXd& eta, bool d, EtaTerms& t) {
      nb_beta_terms(y, r, eta, d, t);
    };
    auto inner = detail::newton_glm(x, terms, beta, cfg, kBetaBound);
    out.iterations += inner.iterations;
    beta = std::move(inner.beta);
    if (inner.note == "diverged to parameter bound") {
      out.note = inner.note;
      break;
    }
    const Eigen::VectorXd eta = x * beta;
    const Eigen::VectorXd mu = eta.array().exp().matrix();
    auto solved = solve_alpha(hist, y, mu, alpha, cfg.grad_tol);
    alpha = solved.alpha;
    alpha_note = std::move(solved.note);

    const auto g = nb_gradient(x, hist, y, eta, alpha);
    out.grad_norm = g.norm();
    const bool saturated = eta.cwiseAbs().maxCoeff() > detail::kSaturatedEta;
    if (out.grad_norm <= cfg.grad_tol && !saturated) {
      out.converged = true;
      out.note = alpha_note;
      break;
    }
    if (outer >= cfg.max_iter) {
      out.note = "iteration limit";
      break;
    }
  }
  out.params.head(p) = beta;
  out.params[p] = alpha;
  const Eigen::VectorXd eta = x * beta;
  out.loglik = detail::nb_loglik(hist, y, eta, 1.0 / alpha, log_fact);
  if (!out.converged) out.grad_norm = nb_gradient(x, hist, y, eta, alpha).norm();
  return out;
}

namespace loglik {

namespace {
void check_nb(const Dataset& data, const ParamVec& theta) {
  if (static_cast<std::size_t>(theta.size()) != data.design->p() + 1) {
    throw InvalidArgument("parameter dimension does not match the design");
  }
  if (!(theta[theta.size() - 1] > 0.0)) throw InvalidArgument("alpha must be positive");
}
}  // namespace

double negbin(const Dataset& data, const ParamVec& theta) {
  check_nb(data, theta);
  const auto p = theta.size() - 1;
  const Eigen::VectorXd y = data.y_as_vector();
  const Eigen::VectorXd eta = data.design->x * theta.head(p);
  return detail::nb_loglik(CountHistogram::build(y), y, eta, 1.0 / theta[p],
                           detail::log_factorial_sum(y));
}

Eigen::VectorXd negbin_grad(const Dataset& data, const ParamVec& theta) {
  check_nb(data, theta);
  const auto p = theta.size() - 1;
  const Eigen::VectorXd y = data.y_as_vector();
  const Eigen::VectorXd eta = data.design->x * theta.head(p);
  const double r = 1.0 / theta[p];
  const Eigen::VectorXd mu = eta.array().exp().matrix();
  Eigen::VectorXd g(p + 1);
  g.head(p) = data.design->x.transpose() *
              (r * (y.array() - mu.array()) / (r + mu.array())).matrix();
  g[p] = -r * r * detail::nb_r_derivs(CountHistogram::build(y), y, mu, r).d1;
  return g;
}

}  // namespace loglik

}  // namespace jini
