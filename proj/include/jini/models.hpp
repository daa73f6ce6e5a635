#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "jini/crn.hpp"

namespace jini {

/// A point in the parameter space. For negative binomial families the last
/// coordinate is the overdispersion alpha on its natural scale.
using ParamVec = Eigen::VectorXd;

/// Fixed covariates, n x p_x. Shared immutably between datasets and models.
struct DesignMatrix {
  Eigen::MatrixXd x;

  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
};

using DesignPtr = std::shared_ptr<const DesignMatrix>;

DesignPtr make_design(Eigen::MatrixXd x);

enum class ResponseKind { Binary, Count };

struct Dataset {
  DesignPtr design;
  std::vector<std::int64_t> y;
  ResponseKind kind = ResponseKind::Count;
  std::optional<std::int64_t> censor_at;

  std::size_t n() const { return y.size(); }
  /// Number of observations sitting at the censoring threshold.
  std::size_t censored_count() const;
  Eigen::VectorXd y_as_vector() const;
};

/// Checks the Dataset invariants (kind, censoring bound, design size).
void validate(const Dataset& data);

enum class Family {
  Logistic,
  LogisticMisclassified,
  Poisson,
  PoissonCensored,
  NegBin,
  NegBinCensored,
  SyntheticLinearBias,
};

std::string_view family_name(Family family);
bool is_censored(Family family);
bool has_overdispersion(Family family);
bool is_binary(Family family);

/// Axis-aligned parameter box; Euclidean projection is coordinate clipping.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const ParamVec& theta) const;
  ParamVec project(const ParamVec& theta) const;
};

inline constexpr double kBetaBound = 50.0;
inline constexpr double kAlphaMin = 1e-4;
inline constexpr double kAlphaMax = 1e2;

/// beta in [-50, 50]^p_x, plus alpha in [1e-4, 100] when requested.
Box default_box(std::size_t p_x, bool with_alpha);

/// Per-observation false-positive / false-negative rates, drawn once.
struct MisclassLatents {
  Eigen::VectorXd u_fp;
  Eigen::VectorXd u_fn;
};

MisclassLatents draw_latents(std::size_t n, RngStream& stream, double fp_a = 2.0,
                             double fp_b = 50.0, double fn_a = 2.0, double fn_b = 10.0);

/// Linear bias b(theta) = B theta + c for the synthetic pseudo-model.
struct SyntheticBiasSpec {
  Eigen::MatrixXd B;
  Eigen::VectorXd c;
  double noise_sd = 0.0;

  std::size_t p() const { return static_cast<std::size_t>(c.size()); }
};

struct ModelSpec {
  Family family = Family::Logistic;
  DesignPtr design;
  std::optional<std::int64_t> censor_at;
  std::shared_ptr<const MisclassLatents> misclass;
  Box box;
  std::optional<SyntheticBiasSpec> synth;

  /// Dimension of theta.
  std::size_t dim() const { return box.dim(); }
  /// Number of uniforms one simulated sample consumes (row length of the bank).
  std::size_t sample_size() const;
};

/// Validating constructors. Each sets the default box.
ModelSpec logistic_model(DesignPtr design);
ModelSpec misclassified_logistic_model(DesignPtr design, MisclassLatents latents);
ModelSpec poisson_model(DesignPtr design);
ModelSpec censored_poisson_model(DesignPtr design, std::int64_t censor_at);
ModelSpec negbin_model(DesignPtr design);
ModelSpec censored_negbin_model(DesignPtr design, std::int64_t censor_at);
ModelSpec synthetic_model(SyntheticBiasSpec spec);

void validate(const ModelSpec& model);

Eigen::VectorXd linear_predictor(const DesignMatrix& design, const Eigen::VectorXd& beta);

/// Overflow-safe componentwise logistic function.
Eigen::VectorXd mean_logistic(const Eigen::VectorXd& eta);
double logistic(double eta);

/// mu*_i = u_fp_i (1 - mu_i) + (1 - u_fn_i) mu_i.
Eigen::VectorXd mean_misclassified(const Eigen::VectorXd& mu, const MisclassLatents& lat);

/// Expected response of each observation at theta (uncensored scale).
Eigen::VectorXd model_mean(const ModelSpec& model, const ParamVec& theta);

/// Largest count mean the simulator accepts before reporting overflow.
inline constexpr double kMaxCountMean = 1e6;

/// Responses from bank row h only, by inversion. Pure in (model, theta, bank, h).
/// Not defined for SyntheticLinearBias (it has no data path).
Dataset simulate(const ModelSpec& model, const ParamVec& theta, const CrnBank& bank,
                 std::size_t h);

/// Same as simulate, driven by an explicit row of uniforms.
Dataset simulate_row(const ModelSpec& model, const ParamVec& theta,
                     std::span<const double> uniforms);

enum class DesignRecipe { NegBinStyle, LogisticI, LogisticII, InterceptOnly };

std::string_view recipe_name(DesignRecipe recipe);

/// Covariate recipes:
///   NegBinStyle: intercept, N(0,1), half-zeros dummy, then N(0, 16/n).
///   LogisticI:   every entry N(0, 16/n).
///   LogisticII:  every entry N(0.6, 16/n).
///   InterceptOnly: a single column of ones (p must be 1).
/// Entries are drawn column by column from the stream.
DesignMatrix gen_design(DesignRecipe recipe, std::size_t n, std::size_t p, RngStream& stream);

}  // namespace jini
