#include "newton.hpp"

#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "jini/error.hpp"

namespace jini::detail {

double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double log_factorial_sum(const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] > 1.0) s += boost::math::lgamma(y[i] + 1.0);
  }
  return s;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xw = x.array().colwise() * w.array().sqrt();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd solve_spd(Eigen::MatrixXd h, const Eigen::VectorXd& g) {
  const double scale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd d = llt.solve(g);
      if (d.allFinite()) return d;
    }
    const double next = jitter == 0.0 ? 1e-12 * scale : jitter * 100.0;
    h.diagonal().array() += next - jitter;
    jitter = next;
  }
  throw NumericFailure("Hessian is not positive definite");
}

Eigen::VectorXd least_squares_start(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                    double ridge) {
  Eigen::MatrixXd g = x.transpose() * x;
  g.diagonal().array() += ridge;
  return solve_spd(std::move(g), x.transpose() * z);
}

NewtonOutcome newton_glm(const Eigen::MatrixXd& x, const EtaTermFn& terms, Eigen::VectorXd beta,
                         const FitConfig& cfg, double bound) {
  NewtonOutcome out;
  EtaTerms t;
  EtaTerms trial;
  Eigen::VectorXd eta = x * beta;
  terms(eta, true, t);
  if (!std::isfinite(t.loglik)) throw NumericFailure("log-likelihood is not finite at the start");

  for (int iter = 0;; ++iter) {
    const Eigen::VectorXd grad = x.transpose() * t.score;
    out.grad_norm = grad.norm();
    out.loglik = t.loglik;
    const bool saturated = eta.cwiseAbs().maxCoeff() > kSaturatedEta;
    Eigen::MatrixXd hess = weighted_gram(x, t.weight);
    if (cfg.ridge > 0.0) hess.diagonal().array() += cfg.ridge;
    const Eigen::VectorXd delta = solve_spd(std::move(hess), grad);
    // near separation the gradient vanishes while the Newton step does not
    if (out.grad_norm <= cfg.grad_tol && !saturated &&
        delta.cwiseAbs().maxCoeff() <= kNewtonStepTol) {
      out.converged = true;
      break;
    }
    if (iter >= cfg.max_iter) {
      out.note = "iteration limit";
      break;
    }

    double step = 1.0;
    bool accepted = false;
    bool any_finite = false;
    Eigen::VectorXd candidate;
    Eigen::VectorXd eta_c;
    const double slack = 1e-13 * (1.0 + std::abs(t.loglik));
    for (int h = 0; h <= cfg.step_halvings; ++h) {
      candidate = beta + step * delta;
      eta_c = x * candidate;
      terms(eta_c, false, trial);
      if (std::isfinite(trial.loglik)) {
        any_finite = true;
        if (trial.loglik >= t.loglik - slack) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!any_finite) throw NumericFailure("log-likelihood not finite after step-halving");
      out.note = "step-halving exhausted";
      break;
    }
    ++out.iterations;
    beta = std::move(candidate);
    if (beta.cwiseAbs().maxCoeff() > bound) {
      beta = beta.cwiseMax(-bound).cwiseMin(bound);
      eta = x * beta;
      terms(eta, true, t);
      out.loglik = t.loglik;
      out.grad_norm = (x.transpose() * t.score).norm();
      out.note = "diverged to parameter bound";
      break;
    }
    eta = std::move(eta_c);
    terms(eta, true, t);
  }
  out.beta = std::move(beta);
  return out;
}

}  // namespace jini::detail
