#include "jini/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jini/error.hpp"

namespace jini {

DesignPtr make_design(Eigen::MatrixXd x) {
  if (!x.allFinite()) throw InvalidArgument("design matrix has non-finite entries");
  return std::make_shared<const DesignMatrix>(DesignMatrix{std::move(x)});
}

std::size_t Dataset::censored_count() const {
  if (!censor_at) return 0;
  return static_cast<std::size_t>(
      std::count(y.begin(), y.end(), *censor_at));
}

Eigen::VectorXd Dataset::y_as_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<Eigen::Index>(i)] = static_cast<double>(y[i]);
  return v;
}

void validate(const Dataset& data) {
  if (!data.design) throw InvalidArgument("dataset has no design");
  if (data.y.empty()) throw InvalidArgument("dataset is empty");
  if (data.design->n() != data.y.size()) {
    throw InvalidArgument("design has " + std::to_string(data.design->n()) +
                          " rows but response has " + std::to_string(data.y.size()));
  }
  if (data.censor_at && *data.censor_at <= 0) {
    throw InvalidArgument("censoring threshold must be positive");
  }
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    const auto yi = data.y[i];
    if (data.kind == ResponseKind::Binary && yi != 0 && yi != 1) {
      throw InvalidArgument("binary response must be 0/1 (observation " + std::to_string(i) + ")");
    }
    if (yi < 0) {
      throw InvalidArgument("count response must be non-negative (observation " +
                            std::to_string(i) + ")");
    }
    if (data.censor_at && yi > *data.censor_at) {
      throw InvalidArgument("response exceeds censoring threshold (observation " +
                            std::to_string(i) + ")");
    }
  }
}

std::string_view family_name(Family family) {
  switch (family) {
    case Family::Logistic: return "logistic";
    case Family::LogisticMisclassified: return "logistic-misclass";
    case Family::Poisson: return "poisson";
    case Family::PoissonCensored: return "poisson-censored";
    case Family::NegBin: return "negbin";
    case Family::NegBinCensored: return "negbin-censored";
    case Family::SyntheticLinearBias: return "synthetic";
  }
  return "unknown";
}

bool is_censored(Family family) {
  return family == Family::PoissonCensored || family == Family::NegBinCensored;
}

bool has_overdispersion(Family family) {
  return family == Family::NegBin || family == Family::NegBinCensored;
}

bool is_binary(Family family) {
  return family == Family::Logistic || family == Family::LogisticMisclassified;
}

bool Box::contains(const ParamVec& theta) const {
  if (theta.size() != lower.size()) return false;
  return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
}

ParamVec Box::project(const ParamVec& theta) const {
  if (theta.size() != lower.size()) {
    throw InvalidArgument("parameter dimension does not match the box");
  }
  return theta.cwiseMax(lower).cwiseMin(upper);
}

Box default_box(std::size_t p_x, bool with_alpha) {
  const auto dim = static_cast<Eigen::Index>(p_x + (with_alpha ? 1 : 0));
  Box box{Eigen::VectorXd::Constant(dim, -kBetaBound), Eigen::VectorXd::Constant(dim, kBetaBound)};
  if (with_alpha) {
    box.lower[dim - 1] = kAlphaMin;
    box.upper[dim - 1] = kAlphaMax;
  }
  return box;
}

MisclassLatents draw_latents(std::size_t n, RngStream& stream, double fp_a, double fp_b,
                             double fn_a, double fn_b) {
  MisclassLatents lat{Eigen::VectorXd(static_cast<Eigen::Index>(n)),
                      Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < lat.u_fp.size(); ++i) lat.u_fp[i] = beta_sample(stream, fp_a, fp_b);
  for (Eigen::Index i = 0; i < lat.u_fn.size(); ++i) lat.u_fn[i] = beta_sample(stream, fn_a, fn_b);
  return lat;
}

std::size_t ModelSpec::sample_size() const {
  if (family == Family::SyntheticLinearBias) return synth ? synth->p() : 0;
  return design ? design->n() : 0;
}

namespace {

ModelSpec with_design(Family family, DesignPtr design) {
  if (!design) throw InvalidArgument("model requires a design matrix");
  ModelSpec m;
  m.family = family;
  m.box = default_box(design->p(), has_overdispersion(family));
  m.design = std::move(design);
  return m;
}

}  // namespace

ModelSpec logistic_model(DesignPtr design) {
  return with_design(Family::Logistic, std::move(design));
}

ModelSpec misclassified_logistic_model(DesignPtr design, MisclassLatents latents) {
  auto m = with_design(Family::LogisticMisclassified, std::move(design));
  m.misclass = std::make_shared<const MisclassLatents>(std::move(latents));
  validate(m);
  return m;
}

ModelSpec poisson_model(DesignPtr design) {
  return with_design(Family::Poisson, std::move(design));
}

ModelSpec censored_poisson_model(DesignPtr design, std::int64_t censor_at) {
  auto m = with_design(Family::PoissonCensored, std::move(design));
  m.censor_at = censor_at;
  validate(m);
  return m;
}

ModelSpec negbin_model(DesignPtr design) {
  return with_design(Family::NegBin, std::move(design));
}

ModelSpec censored_negbin_model(DesignPtr design, std::int64_t censor_at) {
  auto m = with_design(Family::NegBinCensored, std::move(design));
  m.censor_at = censor_at;
  validate(m);
  return m;
}

ModelSpec synthetic_model(SyntheticBiasSpec spec) {
  ModelSpec m;
  m.family = Family::SyntheticLinearBias;
  const auto p = spec.p();
  m.box = Box{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p), -1e6),
              Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p), 1e6)};
  m.synth = std::move(spec);
  validate(m);
  return m;
}

void validate(const ModelSpec& model) {
  if (model.box.lower.size() != model.box.upper.size() ||
      !(model.box.lower.array() < model.box.upper.array()).all()) {
    throw InvalidArgument("parameter box requires lower < upper elementwise");
  }
  if (is_censored(model.family) != model.censor_at.has_value()) {
    throw InvalidArgument("censoring threshold required iff the family is censored");
  }
  if (model.censor_at && *model.censor_at <= 0) {
    throw InvalidArgument("censoring threshold must be positive");
  }
  if ((model.family == Family::LogisticMisclassified) != static_cast<bool>(model.misclass)) {
    throw InvalidArgument("misclassification latents required iff the family is misclassified");
  }
  if (model.family == Family::SyntheticLinearBias) {
    if (!model.synth) throw InvalidArgument("synthetic model requires a bias spec");
    const auto p = static_cast<Eigen::Index>(model.synth->p());
    if (p == 0 || model.synth->B.rows() != p || model.synth->B.cols() != p) {
      throw InvalidArgument("synthetic bias slope must be p x p");
    }
    if (!(model.synth->noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be non-negative");
    return;
  }
  if (!model.design) throw InvalidArgument("model requires a design matrix");
  const auto expected = model.design->p() + (has_overdispersion(model.family) ? 1 : 0);
  if (model.box.dim() != expected) {
    throw InvalidArgument("parameter box dimension does not match the design");
  }
  if (model.misclass) {
    const auto n = static_cast<Eigen::Index>(model.design->n());
    if (model.misclass->u_fp.size() != n || model.misclass->u_fn.size() != n) {
      throw InvalidArgument("misclassification latents must have one entry per observation");
    }
    const auto in_unit = [](const Eigen::VectorXd& v) {
      return (v.array() >= 0.0).all() && (v.array() <= 1.0).all();
    };
    if (!in_unit(model.misclass->u_fp) || !in_unit(model.misclass->u_fn)) {
      throw InvalidArgument("misclassification rates must lie in [0,1]");
    }
  }
}

Eigen::VectorXd linear_predictor(const DesignMatrix& design, const Eigen::VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != design.p()) {
    throw InvalidArgument("coefficient length " + std::to_string(beta.size()) +
                          " does not match design with " + std::to_string(design.p()) +
                          " columns");
  }
  return design.x * beta;
}

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

Eigen::VectorXd mean_logistic(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) { return logistic(e); });
}

Eigen::VectorXd mean_misclassified(const Eigen::VectorXd& mu, const MisclassLatents& lat) {
  if (lat.u_fp.size() != mu.size() || lat.u_fn.size() != mu.size()) {
    throw InvalidArgument("misclassification latents do not match the mean vector");
  }
  return (lat.u_fp.array() * (1.0 - mu.array()) + (1.0 - lat.u_fn.array()) * mu.array()).matrix();
}

namespace {

Eigen::VectorXd beta_part(const ModelSpec& model, const ParamVec& theta) {
  if (theta.size() != static_cast<Eigen::Index>(model.dim())) {
    throw InvalidArgument("parameter has dimension " + std::to_string(theta.size()) +
                          ", model expects " + std::to_string(model.dim()));
  }
  if (!theta.allFinite()) throw InvalidArgument("parameter has non-finite entries");
  if (has_overdispersion(model.family)) return theta.head(theta.size() - 1);
  return theta;
}

}  // namespace

Eigen::VectorXd model_mean(const ModelSpec& model, const ParamVec& theta) {
  if (model.family == Family::SyntheticLinearBias) {
    throw InvalidArgument("synthetic model has no response mean");
  }
  const Eigen::VectorXd eta = linear_predictor(*model.design, beta_part(model, theta));
  switch (model.family) {
    case Family::Logistic: return mean_logistic(eta);
    case Family::LogisticMisclassified: return mean_misclassified(mean_logistic(eta), *model.misclass);
    default: return eta.array().exp().matrix();
  }
}

Dataset simulate(const ModelSpec& model, const ParamVec& theta, const CrnBank& bank,
                 std::size_t h) {
  if (bank.n() != model.sample_size()) {
    throw InvalidArgument("bank sample size does not match the model");
  }
  return simulate_row(model, theta, bank.row(h));
}

Dataset simulate_row(const ModelSpec& model, const ParamVec& theta,
                     std::span<const double> u) {
  if (model.family == Family::SyntheticLinearBias) {
    throw InvalidArgument("synthetic model has no data path; use synthetic_initial");
  }
  if (u.size() != model.design->n()) {
    throw InvalidArgument("uniform row length does not match the design");
  }
  const Eigen::VectorXd mean = model_mean(model, theta);
  Dataset out;
  out.design = model.design;
  out.censor_at = model.censor_at;
  out.kind = is_binary(model.family) ? ResponseKind::Binary : ResponseKind::Count;
  out.y.resize(u.size());

  const double alpha = has_overdispersion(model.family) ? theta[theta.size() - 1] : 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double m = mean[static_cast<Eigen::Index>(i)];
    switch (model.family) {
      case Family::Logistic:
      case Family::LogisticMisclassified:
        out.y[i] = bernoulli_q(u[i], m);
        break;
      case Family::Poisson:
      case Family::PoissonCensored:
        if (!std::isfinite(m) || m > kMaxCountMean) {
          throw SimulationOverflow("poisson mean overflow at observation " + std::to_string(i), i);
        }
        out.y[i] = poisson_q(u[i], m);
        break;
      case Family::NegBin:
      case Family::NegBinCensored:
        if (!std::isfinite(m) || m > kMaxCountMean) {
          throw SimulationOverflow("negative binomial mean overflow at observation " +
                                       std::to_string(i),
                                   i);
        }
        out.y[i] = negbin_q(u[i], m, alpha);
        break;
      case Family::SyntheticLinearBias:
        break;
    }
    if (model.censor_at) out.y[i] = std::min(out.y[i], *model.censor_at);
  }
  return out;
}

std::string_view recipe_name(DesignRecipe recipe) {
  switch (recipe) {
    case DesignRecipe::NegBinStyle: return "nb-style";
    case DesignRecipe::LogisticI: return "logistic-I";
    case DesignRecipe::LogisticII: return "logistic-II";
    case DesignRecipe::InterceptOnly: return "intercept";
  }
  return "unknown";
}

DesignMatrix gen_design(DesignRecipe recipe, std::size_t n, std::size_t p, RngStream& stream) {
  if (n == 0 || p == 0) throw InvalidArgument("design needs n >= 1 and p >= 1");
  const double small_sd = 4.0 / std::sqrt(static_cast<double>(n));
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd x(rows, cols);

  if (recipe == DesignRecipe::InterceptOnly) {
    if (p != 1) throw InvalidArgument("intercept-only design needs p = 1");
    return DesignMatrix{Eigen::MatrixXd::Ones(rows, 1)};
  }

  if (recipe == DesignRecipe::NegBinStyle) {
    if (p < 3) throw InvalidArgument("nb-style design needs p >= 3");
    const auto zeros = static_cast<Eigen::Index>((n + 1) / 2);
    x.col(0).setOnes();
    for (Eigen::Index i = 0; i < rows; ++i) x(i, 1) = normal_sample(stream, 0.0, 1.0);
    for (Eigen::Index i = 0; i < rows; ++i) x(i, 2) = i < zeros ? 0.0 : 1.0;
    for (Eigen::Index j = 3; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = normal_sample(stream, 0.0, small_sd);
    }
    return DesignMatrix{std::move(x)};
  }

  const double centre = recipe == DesignRecipe::LogisticII ? 0.6 : 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = normal_sample(stream, centre, small_sd);
  }
  return DesignMatrix{std::move(x)};
}

}  // namespace jini
