#pragma once

// Monte Carlo studies: named presets, the replication runner, the bias
// function probe and summary tables.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "jini/bias_correct.hpp"
#include "jini/models.hpp"

namespace jini {

enum class MethodId { Mle, NaiveMle, BenchmarkMle, Bbc, Jini };

std::string_view method_id_name(MethodId method);
std::optional<MethodId> parse_method_id(std::string_view name);

struct ExperimentConfig {
  std::string setting;
  Family family = Family::NegBin;
  DesignRecipe recipe = DesignRecipe::NegBinStyle;
  std::size_t n = 0;
  /// Number of design columns (the dimension of theta for the synthetic model).
  std::size_t p = 0;
  ParamVec theta0;
  std::optional<std::int64_t> censor_at;
  double fp_a = 2.0, fp_b = 50.0, fn_a = 2.0, fn_b = 10.0;
  std::optional<SyntheticBiasSpec> synth;
  std::size_t H = 100;
  std::size_t reps = 200;
  std::uint64_t master_seed = 1;
  std::vector<MethodId> methods;
  std::size_t workers = 1;
  double tol = 1e-4;
  int max_iter = 100;
  int stall_window = 5;
  FailurePolicy failure_policy = FailurePolicy::Abort;
};

std::vector<std::string> preset_names();

/// Settings of the reference studies. Desk scale uses reps = 200, H = 100;
/// paper_scale restores reps = 1000, H = 200.
ExperimentConfig preset(std::string_view setting, bool paper_scale = false);

void validate(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Overlays the fields present in `j` onto `base`.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base);

/// The fixed design of an experiment (drawn once from the master seed).
DesignPtr experiment_design(const ExperimentConfig& cfg);

/// Model of replication `rep`; for the misclassified family the latents are
/// drawn from the replication's own stream.
ModelSpec experiment_model(const ExperimentConfig& cfg, const DesignPtr& design, std::size_t rep);

struct MethodEstimates {
  MethodId method = MethodId::Mle;
  /// reps x dim; rows of failed replications are NaN.
  Eigen::MatrixXd estimates;
  std::vector<bool> ok;
  std::size_t failures = 0;
  Eigen::VectorXd bias;
  Eigen::VectorXd rmse;
  std::size_t successes() const { return ok.size() - failures; }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MethodEstimates> methods;
  /// JINI iteration count per replication (-1 when JINI failed or was not run).
  std::vector<int> jini_iterations;
  std::size_t jini_nonconverged = 0;
  /// ||pi_hat - pi*(theta_hat)|| per replication (NaN when not available).
  std::vector<double> jini_residuals;
  std::size_t inner_fit_failures = 0;
  /// First error message per failed replication.
  std::map<std::size_t, std::string> rep_errors;
  /// Mean events-per-variable of the observed samples (binary families).
  std::optional<double> achieved_epv;
  /// Mean fraction of observations at the censoring threshold.
  std::optional<double> censored_fraction;
  double wall_seconds = 0.0;

  const MethodEstimates* find(MethodId method) const;
  std::map<int, std::size_t> iteration_histogram() const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t steps = 1;

  /// Evenly spaced values; a single step gives the midpoint.
  std::vector<double> values() const;
};

/// Parses "lo:hi:steps".
GridSpec parse_grid(std::string_view text);

struct BiasProbeResult {
  std::size_t coord = 0;
  std::vector<double> grid;
  /// One row per grid value: pi*(theta) - theta.
  Eigen::MatrixXd d_star;
  std::size_t H = 0;
  /// |d*(theta0)_coord|, the half-width of the plausible neighbourhood.
  double half_width = 0.0;
  ParamVec theta0;
};

/// Default probe size: 1e3 simulated samples when n >= 1000, else 1e4.
std::size_t default_probe_H(const ModelSpec& model);

/// d*(theta) along coordinate `coord` with the others held at theta0. One
/// bank is shared by every grid point.
BiasProbeResult bias_probe(const ModelSpec& model, const InitialEstimator& est,
                           const ParamVec& theta0, std::size_t coord, const GridSpec& grid,
                           std::size_t H, std::uint64_t seed, std::size_t workers = 1);

struct SummaryRow {
  std::string method;
  std::string group;
  std::vector<std::size_t> indices;
  double abs_bias = 0.0;
  double rmse = 0.0;
};

/// Parameter groups: each coefficient alone except runs of zero-valued
/// coefficients, which are pooled (mean |bias|, mean RMSE).
std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_groups(
    const ExperimentConfig& cfg);

std::vector<SummaryRow> summarize(const ExperimentResult& result);

/// rep,method,param_index,estimate (successful rows only, param_index from 1).
void write_estimates_csv(std::ostream& out, const ExperimentResult& result);

nlohmann::json summary_json(const ExperimentResult& result);

/// SHA-1 of "blob <len>\0<content>", hex encoded.
std::string git_blob_hash(std::string_view content);

void write_probe_csv(std::ostream& out, const BiasProbeResult& probe);

/// Round-trip-exact decimal text for a double.
std::string format_double(double v);

}  // namespace jini
