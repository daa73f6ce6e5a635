#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "jini/error.hpp"
#include "jini/estimators.hpp"
#include "negbin_detail.hpp"
#include "newton.hpp"

namespace jini {

namespace {

using detail::CountHistogram;

// Censored NB likelihood over z = (beta, s), s = log(alpha).
class CensoredNb {
 public:
  CensoredNb(const Dataset& data)
      : x_(data.design->x), y_(data.y_as_vector()), c_(*data.censor_at) {
    skip_.resize(static_cast<std::size_t>(y_.size()));
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      skip_[static_cast<std::size_t>(i)] = y_[i] >= static_cast<double>(c_);
    }
    hist_ = CountHistogram::build(y_, &skip_);
    log_fact_ = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      if (!skip_[static_cast<std::size_t>(i)] && y_[i] > 1.0) log_fact_ += boost::math::lgamma(y_[i] + 1.0);
    }
  }

  Eigen::Index p() const { return x_.cols(); }

  /// Log-likelihood at (beta, r). When grad_beta / grad_r are non-null the
  /// derivatives w.r.t. beta and r are filled in.
  double eval(const Eigen::VectorXd& beta, double r, Eigen::VectorXd* grad_beta,
              double* grad_r) const {
    const Eigen::VectorXd eta = x_ * beta;
    double ll = detail::nb_loglik(hist_, y_, eta, r, log_fact_, &skip_);
    Eigen::VectorXd score;
    if (grad_beta) score.resize(y_.size());
    Eigen::VectorXd mu = eta.array().exp().matrix();
    double dr = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      if (skip_[static_cast<std::size_t>(i)]) {
        const auto tail = detail::nb_tail(c_, mu[i], r);
        if (!std::isfinite(tail.log_s)) {
          throw NumericFailure("negative binomial tail probability underflow at observation " +
                                   std::to_string(i),
                               static_cast<std::size_t>(i));
        }
        ll += tail.log_s;
        if (grad_beta) score[i] = tail.d_eta;
        dr += tail.d_r;
      } else if (grad_beta) {
        score[i] = r * (y_[i] - mu[i]) / (r + mu[i]);
      }
    }
    if (grad_beta) *grad_beta = x_.transpose() * score;
    if (grad_r) *grad_r = dr + detail::nb_r_derivs(hist_, y_, mu, r, &skip_).d1;
    return ll;
  }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }

 private:
  const Eigen::MatrixXd& x_;
  Eigen::VectorXd y_;
  std::int64_t c_;
  std::vector<bool> skip_;
  CountHistogram hist_;
  double log_fact_;
};

struct Point {
  Eigen::VectorXd z;  // (beta, s)
  double ll = 0.0;
  Eigen::VectorXd grad;  // d ll / dz
};

Point evaluate(const CensoredNb& f, Eigen::VectorXd z) {
  const auto p = f.p();
  Point pt;
  Eigen::VectorXd gb;
  double gr = 0.0;
  const double r = std::exp(-z[p]);
  pt.ll = f.eval(z.head(p), r, &gb, &gr);
  pt.grad.resize(p + 1);
  pt.grad.head(p) = gb;
  pt.grad[p] = -r * gr;
  pt.z = std::move(z);
  return pt;
}

// Natural-scale gradient norm with the alpha component dropped when it
// points out of the box at an edge.
double natural_grad_norm(const Point& pt, Eigen::Index p) {
  const double alpha = std::exp(pt.z[p]);
  double ga = pt.grad[p] / alpha;
  if ((alpha <= kAlphaMin * (1.0 + 1e-12) && ga < 0.0) ||
      (alpha >= kAlphaMax * (1.0 - 1e-12) && ga > 0.0)) {
    ga = 0.0;
  }
  return std::sqrt(pt.grad.head(p).squaredNorm() + ga * ga);
}

}  // namespace

FitResult fit_censored_negbin_mle(const Dataset& data, const FitConfig& cfg, const Start& start) {
  validate(data);
  if (data.kind != ResponseKind::Count) throw InvalidArgument("expected count responses");
  if (!data.censor_at) throw InvalidArgument("censored fit requires a censoring threshold");
  const auto p = static_cast<Eigen::Index>(data.design->p());
  const CensoredNb f(data);
  const double s_lo = std::log(kAlphaMin);
  const double s_hi = std::log(kAlphaMax);

  Eigen::VectorXd z0(p + 1);
  if (start) {
    if (start->size() != p + 1 || !start->allFinite()) {
      throw InvalidArgument("warm start has the wrong dimension or non-finite entries");
    }
    z0.head(p) = start->head(p).cwiseMax(-kBetaBound).cwiseMin(kBetaBound);
    z0[p] = std::log(std::clamp((*start)[p], kAlphaMin, kAlphaMax));
  } else {
    // The naive fit treats censored values as exact; a good starting point.
    const auto naive = fit_negbin_mle(data, cfg);
    z0.head(p) = naive.params.head(p);
    z0[p] = std::log(naive.params[p]);
  }

  Point cur = evaluate(f, z0);
  if (!std::isfinite(cur.ll)) throw NumericFailure("log-likelihood is not finite at the start");

  // Initial inverse Hessian from the uncensored NB curvature at the start.
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Zero(p + 1, p + 1);
  {
    const double r = std::exp(-cur.z[p]);
    const Eigen::VectorXd mu = (f.x() * cur.z.head(p)).array().exp().matrix();
    const Eigen::VectorXd& y = f.y();
    const Eigen::VectorXd w =
        (r * mu.array() * (r + y.array()) / (r + mu.array()).square()).matrix();
    Eigen::MatrixXd hb = detail::weighted_gram(f.x(), w);
    const double scale = std::max(hb.diagonal().maxCoeff(), 1e-8);
    hb.diagonal().array() += 1e-10 * scale;
    hinv.topLeftCorner(p, p) = hb.llt().solve(Eigen::MatrixXd::Identity(p, p));
    const auto d = detail::nb_r_derivs(CountHistogram::build(y), y, mu, r);
    const double hs = -(r * d.d1 + r * r * d.d2);
    hinv(p, p) = hs > 1e-8 ? 1.0 / hs : 1.0;
    if (!hinv.allFinite()) hinv = Eigen::MatrixXd::Identity(p + 1, p + 1);
  }

  FitResult out;
  for (int iter = 0;; ++iter) {
    out.grad_norm = natural_grad_norm(cur, p);
    const bool saturated = (f.x() * cur.z.head(p)).cwiseAbs().maxCoeff() > detail::kSaturatedEta;
    if (out.grad_norm <= cfg.grad_tol && !saturated) {
      out.converged = true;
      break;
    }
    if (iter >= cfg.max_iter * 5) {
      out.note = "iteration limit";
      break;
    }

    // Ascent direction; s is frozen when it sits on a bound and the gradient
    // pushes outward.
    Eigen::VectorXd g = cur.grad;
    const bool s_fixed = (cur.z[p] <= s_lo && g[p] < 0.0) || (cur.z[p] >= s_hi && g[p] > 0.0);
    Eigen::VectorXd dir;
    if (s_fixed) {
      dir = Eigen::VectorXd::Zero(p + 1);
      dir.head(p) = hinv.topLeftCorner(p, p) * g.head(p);
    } else {
      dir = hinv * g;
    }
    double slope = g.dot(dir);
    if (!(slope > 0.0)) {
      hinv = Eigen::MatrixXd::Identity(p + 1, p + 1) * (1.0 / std::max(1.0, g.norm()));
      dir = hinv * g;
      if (s_fixed) dir[p] = 0.0;
      slope = g.dot(dir);
      if (!(slope > 0.0)) {
        out.note = "no ascent direction";
        break;
      }
    }

    double step = 1.0;
    bool accepted = false;
    Point next;
    for (int h = 0; h <= cfg.step_halvings; ++h) {
      Eigen::VectorXd z = cur.z + step * dir;
      z.head(p) = z.head(p).cwiseMax(-kBetaBound).cwiseMin(kBetaBound);
      z[p] = std::clamp(z[p], s_lo, s_hi);
      try {
        next = evaluate(f, std::move(z));
      } catch (const NumericFailure&) {
        step *= 0.5;
        continue;
      }
      if (std::isfinite(next.ll) &&
          next.ll >= cur.ll + 1e-4 * step * slope - 1e-13 * (1.0 + std::abs(cur.ll))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.note = "step-halving exhausted";
      break;
    }
    ++out.iterations;

    const Eigen::VectorXd sk = next.z - cur.z;
    const Eigen::VectorXd yk = cur.grad - next.grad;  // gradient of -ll
    const double sy = sk.dot(yk);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p + 1, p + 1);
      hinv = (I - rho * sk * yk.transpose()) * hinv * (I - rho * yk * sk.transpose()) +
             rho * sk * sk.transpose();
    }
    const bool at_beta_bound = next.z.head(p).cwiseAbs().maxCoeff() >= kBetaBound;
    cur = std::move(next);
    if (at_beta_bound) {
      out.grad_norm = natural_grad_norm(cur, p);
      out.note = "diverged to parameter bound";
      break;
    }
  }

  out.params.resize(p + 1);
  out.params.head(p) = cur.z.head(p);
  out.params[p] = std::exp(cur.z[p]);
  out.loglik = cur.ll;
  if (out.converged) {
    if (cur.z[p] <= s_lo) out.note = "alpha at lower bound";
    if (cur.z[p] >= s_hi) out.note = "alpha at upper bound";
  }
  return out;
}

namespace loglik {

namespace {
void check_censored_nb(const Dataset& data, const ParamVec& theta) {
  if (static_cast<std::size_t>(theta.size()) != data.design->p() + 1) {
    throw InvalidArgument("parameter dimension does not match the design");
  }
  if (!(theta[theta.size() - 1] > 0.0)) throw InvalidArgument("alpha must be positive");
  if (!data.censor_at) throw InvalidArgument("censored likelihood requires a threshold");
}
}  // namespace

double censored_negbin(const Dataset& data, const ParamVec& theta) {
  check_censored_nb(data, theta);
  const auto p = theta.size() - 1;
  return CensoredNb(data).eval(theta.head(p), 1.0 / theta[p], nullptr, nullptr);
}

Eigen::VectorXd censored_negbin_grad(const Dataset& data, const ParamVec& theta) {
  check_censored_nb(data, theta);
  const auto p = theta.size() - 1;
  const double r = 1.0 / theta[p];
  Eigen::VectorXd gb;
  double gr = 0.0;
  CensoredNb(data).eval(theta.head(p), r, &gb, &gr);
  Eigen::VectorXd g(p + 1);
  g.head(p) = gb;
  g[p] = -r * r * gr;
  return g;
}

}  // namespace loglik

}  // namespace jini
