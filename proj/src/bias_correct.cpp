#include "jini/bias_correct.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace jini {

InitialEstimator initial_estimator_for(Family family) {
  switch (family) {
    case Family::Logistic:
    case Family::LogisticMisclassified:
      return {"logistic-mle", fit_logistic_mle, {}};
    case Family::Poisson:
    case Family::PoissonCensored:
      return {"poisson-mle", fit_poisson_mle, {}};
    case Family::NegBin:
    case Family::NegBinCensored:
      return {"negbin-mle", fit_negbin_mle, {}};
    case Family::SyntheticLinearBias:
      return {"synthetic", nullptr, {}};
  }
  throw InvalidArgument("unknown family");
}

InitialEstimator benchmark_estimator_for(Family family) {
  switch (family) {
    case Family::PoissonCensored:
      return {"censored-poisson-mle", fit_censored_poisson_mle, {}};
    case Family::NegBinCensored:
      return {"censored-negbin-mle", fit_censored_negbin_mle, {}};
    default:
      return initial_estimator_for(family);
  }
}

std::string_view policy_name(FailurePolicy policy) {
  return policy == FailurePolicy::Abort ? "abort" : "skip-and-average";
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::MleOnly: return "MLE-only";
    case Method::Bbc: return "BBC";
    case Method::Jini: return "JINI";
  }
  return "?";
}

void validate(const IbConfig& cfg) {
  if (cfg.H < 1) throw InvalidArgument("H must be at least 1");
  if (!(cfg.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (cfg.max_iter < 0) throw InvalidArgument("max_iter must be non-negative");
  if (cfg.stall_window < 0) throw InvalidArgument("stall_window must be non-negative");
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t threads = std::min(workers, count);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first;
  std::size_t first_index = count;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < first_index) {
          first_index = i;
          first = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  if (first) std::rethrow_exception(first);
}

CrnBank bank_for(const ModelSpec& model, std::uint64_t seed, std::size_t H) {
  return make_bank(seed, H, model.sample_size());
}

namespace {

struct SampleOutcome {
  ParamVec value;
  bool ok = false;
  bool converged = true;
  std::string error;
};

}  // namespace

PiStarResult pi_star(const ModelSpec& model, const ParamVec& theta, const CrnBank& bank,
                     const InitialEstimator& est, FailurePolicy policy, std::size_t workers) {
  if (static_cast<std::size_t>(theta.size()) != model.dim()) {
    throw InvalidArgument("theta dimension does not match the model");
  }
  if (bank.n() != model.sample_size()) {
    throw InvalidArgument("bank sample size does not match the model");
  }
  const bool synthetic = model.family == Family::SyntheticLinearBias;
  if (!synthetic && !est.fit) throw InvalidArgument("initial estimator has no fitter");

  std::vector<SampleOutcome> outcomes(bank.H());
  parallel_for(bank.H(), workers, [&](std::size_t h) {
    auto& o = outcomes[h];
    try {
      if (synthetic) {
        o.value = synthetic_initial(*model.synth, theta, bank.row(h));
      } else {
        const Dataset sample = simulate(model, theta, bank, h);
        auto fit = est.fit(sample, est.cfg, theta);
        o.converged = fit.converged;
        o.value = model.box.project(fit.params);
      }
      if (!o.value.allFinite()) throw NumericFailure("non-finite estimate");
      o.ok = true;
    } catch (const InvalidArgument&) {
      throw;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  PiStarResult out;
  out.value = ParamVec::Zero(theta.size());
  std::size_t used = 0;
  for (std::size_t h = 0; h < outcomes.size(); ++h) {
    const auto& o = outcomes[h];
    if (!o.ok) {
      if (policy == FailurePolicy::Abort) throw InnerFitFailure(h, o.error);
      ++out.skipped;
      continue;
    }
    if (!o.converged) ++out.fit_failures;
    out.value += o.value;
    ++used;
  }
  if (used == 0) throw NumericFailure("every simulated sample failed: " + outcomes.front().error);
  out.value /= static_cast<double>(used);
  return out;
}

ParamVec ib_step(const ParamVec& theta, const ParamVec& pi_hat, const ParamVec& pi_star_value) {
  return theta + (pi_hat - pi_star_value);
}

Corrected bbc(const ParamVec& pi_hat, const ModelSpec& model, const CrnBank& bank,
              const InitialEstimator& est, FailurePolicy policy, std::size_t workers) {
  if (!pi_hat.allFinite()) throw InvalidArgument("pi_hat must be finite");
  const ParamVec start = model.box.project(pi_hat);
  const auto ps = pi_star(model, start, bank, est, policy, workers);
  const ParamVec raw = ib_step(start, pi_hat, ps.value);
  Corrected out;
  out.method = Method::Bbc;
  out.pi_hat = pi_hat;
  out.estimate = model.box.project(raw);
  out.projected = out.estimate != raw;
  out.fit_failures = ps.fit_failures;
  return out;
}

Corrected ib_solve(const ParamVec& pi_hat, const ModelSpec& model, const CrnBank& bank,
                   const InitialEstimator& est, const IbConfig& cfg) {
  validate(cfg);
  if (!pi_hat.allFinite()) throw InvalidArgument("pi_hat must be finite");

  IbTrace trace;
  ParamVec theta = model.box.project(pi_hat);
  trace.iterates.push_back(theta);
  auto ps = pi_star(model, theta, bank, est, cfg.failure_policy, cfg.workers);
  trace.fit_failures += ps.fit_failures;
  trace.pi_star_residuals.push_back((pi_hat - ps.value).norm());

  bool projected = false;
  for (int k = 0; k < cfg.max_iter; ++k) {
    const ParamVec raw = ib_step(theta, pi_hat, ps.value);
    if (!raw.allFinite()) throw IbNumericFailure("non-finite IB iterate", std::move(trace));
    ParamVec next = model.box.project(raw);
    projected = next != raw;
    const double step = (next - theta).norm();
    theta = std::move(next);
    trace.iterates.push_back(theta);
    trace.step_norms.push_back(step);

    ps = pi_star(model, theta, bank, est, cfg.failure_policy, cfg.workers);
    trace.fit_failures += ps.fit_failures;
    const double residual = (pi_hat - ps.value).norm();
    trace.pi_star_residuals.push_back(residual);
    if (step < cfg.tol && residual <= 2.0 * cfg.tol) {
      trace.converged = true;
      break;
    }
    const auto w = static_cast<std::size_t>(cfg.stall_window);
    const auto& s = trace.step_norms;
    if (w > 0 && s.size() > w) {
      const auto split = s.end() - static_cast<std::ptrdiff_t>(w);
      if (*std::min_element(split, s.end()) >= *std::min_element(s.begin(), split)) {
        trace.stalled = true;
        break;
      }
    }
  }

  Corrected out;
  out.method = Method::Jini;
  out.pi_hat = pi_hat;
  out.estimate = theta;
  out.projected = projected;
  out.fit_failures = trace.fit_failures;
  out.trace = std::move(trace);
  return out;
}

ParamVec initial_estimate(const Dataset& data, const InitialEstimator& est) {
  if (!est.fit) throw InvalidArgument("initial estimator has no fitter");
  FitResult fit;
  try {
    fit = est.fit(data, est.cfg, std::nullopt);
  } catch (const InvalidArgument&) {
    throw;
  } catch (const std::exception& e) {
    throw InitialEstimatorFailure(e.what());
  }
  if (!fit.converged) {
    throw InitialEstimatorFailure(est.name + " did not converge" +
                                  (fit.note.empty() ? std::string{} : " (" + fit.note + ")"));
  }
  return fit.params;
}

Corrected jini(const Dataset& data, const ModelSpec& model, const IbConfig& cfg,
               const InitialEstimator& est) {
  validate(cfg);
  const auto& a = data.design->x;
  const auto& b = model.design->x;
  if (data.design != model.design &&
      (a.rows() != b.rows() || a.cols() != b.cols() || a != b)) {
    throw InvalidArgument("dataset design does not match the model");
  }
  const ParamVec pi_hat = initial_estimate(data, est);
  const CrnBank bank = bank_for(model, cfg.seed, cfg.H);
  return ib_solve(pi_hat, model, bank, est, cfg);
}

}  // namespace jini
