#pragma once

// Simulation-based bias correction: the bootstrap proxy pi*, the one-step
// BBC correction and the JINI estimator as the fixed point of the iterative
// bootstrap theta <- theta + (pi_hat - pi*(theta)).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jini/crn.hpp"
#include "jini/error.hpp"
#include "jini/estimators.hpp"
#include "jini/models.hpp"

namespace jini {

using FitFn = std::function<FitResult(const Dataset&, const FitConfig&, const Start&)>;

/// The estimator pi_hat that is re-evaluated on every simulated sample.
/// For the synthetic pseudo-model `fit` is unused: synthetic_initial is
/// applied to the bank row directly.
struct InitialEstimator {
  std::string name;
  FitFn fit;
  FitConfig cfg;
};

/// The naive estimator used to start JINI for each family (censoring and
/// misclassification are ignored).
InitialEstimator initial_estimator_for(Family family);

/// The consistent comparator for censored families (censored MLE); for the
/// other families the same as initial_estimator_for.
InitialEstimator benchmark_estimator_for(Family family);

enum class FailurePolicy { Abort, SkipAndAverage };

std::string_view policy_name(FailurePolicy policy);

struct IbConfig {
  std::size_t H = 100;
  double tol = 1e-4;
  int max_iter = 100;
  /// Stop once the step norm has not reached a new minimum for this many
  /// iterations (the discrete-data plateau); 0 disables.
  int stall_window = 5;
  std::uint64_t seed = 0;
  FailurePolicy failure_policy = FailurePolicy::Abort;
  /// Threads used inside one pi_star evaluation; 0 or 1 means sequential.
  std::size_t workers = 1;
};

void validate(const IbConfig& cfg);

struct PiStarResult {
  ParamVec value;
  /// Inner fits that returned converged = false (their projected estimate is used).
  std::size_t fit_failures = 0;
  /// Samples dropped under SkipAndAverage.
  std::size_t skipped = 0;
};

/// Mean over h of the initial estimator on simulate(model, theta, bank, h).
/// Inner fits are warm-started at theta. The sum is taken in h order.
PiStarResult pi_star(const ModelSpec& model, const ParamVec& theta, const CrnBank& bank,
                     const InitialEstimator& est, FailurePolicy policy = FailurePolicy::Abort,
                     std::size_t workers = 1);

struct IbTrace {
  /// theta^(0..K); theta^(0) = pi_hat.
  std::vector<ParamVec> iterates;
  /// ||theta^(k+1) - theta^(k)||, length K.
  std::vector<double> step_norms;
  /// ||pi_hat - pi*(theta^(k))||, one per iterate (length K + 1).
  std::vector<double> pi_star_residuals;
  bool converged = false;
  /// Stopped by the stall rule.
  bool stalled = false;
  std::size_t fit_failures = 0;

  std::size_t iterations() const { return step_norms.size(); }
};

enum class Method { MleOnly, Bbc, Jini };

std::string_view method_name(Method method);

struct Corrected {
  ParamVec estimate;
  Method method = Method::MleOnly;
  std::optional<IbTrace> trace;
  ParamVec pi_hat;
  /// True when box projection changed the final estimate.
  bool projected = false;
  std::size_t fit_failures = 0;
};

/// A non-finite IB iterate; carries the trace up to the failure.
class IbNumericFailure : public NumericFailure {
 public:
  IbNumericFailure(const std::string& what, IbTrace trace)
      : NumericFailure(what), trace_(std::move(trace)) {}
  const IbTrace& trace() const noexcept { return trace_; }

 private:
  IbTrace trace_;
};

/// theta + (pi_hat - pi_star_value), before projection. Shared by BBC and IB.
ParamVec ib_step(const ParamVec& theta, const ParamVec& pi_hat, const ParamVec& pi_star_value);

/// 2 pi_hat - pi*(pi_hat), projected onto the model box.
Corrected bbc(const ParamVec& pi_hat, const ModelSpec& model, const CrnBank& bank,
              const InitialEstimator& est, FailurePolicy policy = FailurePolicy::Abort,
              std::size_t workers = 1);

/// Iterates theta <- P_box(theta + pi_hat - pi*(theta)) from theta = pi_hat.
/// Converged once a step is below tol and the residual at the new iterate is
/// at most 2 tol. Returns the last iterate when stalled or at max_iter.
Corrected ib_solve(const ParamVec& pi_hat, const ModelSpec& model, const CrnBank& bank,
                   const InitialEstimator& est, const IbConfig& cfg);

/// Initial estimate on observed data. A failed or non-converged fit raises
/// InitialEstimatorFailure.
ParamVec initial_estimate(const Dataset& data, const InitialEstimator& est);

/// initial_estimate, then ib_solve with a bank drawn from cfg.seed.
Corrected jini(const Dataset& data, const ModelSpec& model, const IbConfig& cfg,
               const InitialEstimator& est);

/// Bank sized for the model (H rows of sample_size() uniforms).
CrnBank bank_for(const ModelSpec& model, std::uint64_t seed, std::size_t H);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all work has finished.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace jini
