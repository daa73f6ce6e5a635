#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "jini/error.hpp"
#include "jini/harness.hpp"

namespace jini {

namespace {

// Substream tags under (master_seed, rep).
constexpr std::uint64_t kDesignTag = 1;
constexpr std::uint64_t kDataTag = 2;
constexpr std::uint64_t kLatentTag = 3;
constexpr std::uint64_t kBankTag = 4;
constexpr std::uint64_t kDesignRep = ~std::uint64_t{0};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool wants(const ExperimentConfig& cfg, MethodId m) {
  for (auto x : cfg.methods) {
    if (x == m) return true;
  }
  return false;
}

struct RepOutcome {
  std::vector<std::optional<ParamVec>> estimates;
  std::string error;
  int iterations = -1;
  bool jini_converged = false;
  double residual = kNaN;
  std::size_t inner_failures = 0;
  std::optional<double> epv;
  std::optional<double> censored_fraction;
};

void store(RepOutcome& o, const ExperimentConfig& cfg, MethodId m, const ParamVec& v) {
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    if (cfg.methods[k] == m) o.estimates[k] = v;
  }
}

void note_error(RepOutcome& o, const std::string& what) {
  if (o.error.empty()) o.error = what;
}

RepOutcome run_replication(const ExperimentConfig& cfg, const DesignPtr& design, std::size_t rep) {
  RepOutcome o;
  o.estimates.resize(cfg.methods.size());
  const ModelSpec model = experiment_model(cfg, design, rep);
  const auto est = initial_estimator_for(cfg.family);
  RngStream data_stream(derive_seed(cfg.master_seed, {rep, kDataTag}));

  std::optional<ParamVec> pi_hat;
  std::optional<Dataset> data;
  try {
    if (model.family == Family::SyntheticLinearBias) {
      std::vector<double> row(model.sample_size());
      for (auto& u : row) u = data_stream.uniform();
      pi_hat = synthetic_initial(*model.synth, cfg.theta0, row);
    } else {
      std::vector<double> row(model.sample_size());
      for (auto& u : row) u = data_stream.uniform();
      data = simulate_row(model, cfg.theta0, row);
      if (data->kind == ResponseKind::Binary) {
        double events = 0.0;
        for (auto y : data->y) events += static_cast<double>(y);
        const double n = static_cast<double>(data->n());
        o.epv = std::min(events, n - events) / static_cast<double>(cfg.p);
      }
      if (data->censor_at) {
        o.censored_fraction =
            static_cast<double>(data->censored_count()) / static_cast<double>(data->n());
      }
      pi_hat = initial_estimate(*data, est);
    }
  } catch (const std::exception& e) {
    note_error(o, e.what());
  }

  if (pi_hat) {
    store(o, cfg, MethodId::Mle, *pi_hat);
    store(o, cfg, MethodId::NaiveMle, *pi_hat);
  }

  if (wants(cfg, MethodId::BenchmarkMle) && data) {
    try {
      const auto fit = benchmark_estimator_for(cfg.family).fit(*data, FitConfig{}, std::nullopt);
      if (fit.converged) {
        store(o, cfg, MethodId::BenchmarkMle, fit.params);
      } else {
        note_error(o, "benchmark fit did not converge (" + fit.note + ")");
      }
    } catch (const std::exception& e) {
      note_error(o, std::string("benchmark: ") + e.what());
    }
  }

  if (!pi_hat) return o;
  const bool want_jini = wants(cfg, MethodId::Jini);
  const bool want_bbc = wants(cfg, MethodId::Bbc);
  if (!want_jini && !want_bbc) return o;

  const CrnBank bank = bank_for(model, derive_seed(cfg.master_seed, {rep, kBankTag}), cfg.H);
  bool bbc_done = false;
  if (want_jini) {
    IbConfig ib;
    ib.H = cfg.H;
    ib.tol = cfg.tol;
    ib.max_iter = cfg.max_iter;
    ib.stall_window = cfg.stall_window;
    ib.failure_policy = cfg.failure_policy;
    try {
      const auto res = ib_solve(*pi_hat, model, bank, est, ib);
      const auto& trace = *res.trace;
      store(o, cfg, MethodId::Jini, res.estimate);
      o.iterations = static_cast<int>(trace.iterations());
      o.jini_converged = trace.converged;
      o.residual = trace.pi_star_residuals.back();
      o.inner_failures += trace.fit_failures;
      // The first IB iterate is the BBC estimate on the same bank.
      if (want_bbc && trace.iterates.size() > 1) {
        store(o, cfg, MethodId::Bbc, trace.iterates[1]);
        bbc_done = true;
      }
    } catch (const std::exception& e) {
      note_error(o, std::string("JINI: ") + e.what());
    }
  }
  if (want_bbc && !bbc_done) {
    try {
      const auto res = bbc(*pi_hat, model, bank, est, cfg.failure_policy);
      store(o, cfg, MethodId::Bbc, res.estimate);
      if (!want_jini) o.inner_failures += res.fit_failures;
    } catch (const std::exception& e) {
      note_error(o, std::string("BBC: ") + e.what());
    }
  }
  return o;
}

}  // namespace

DesignPtr experiment_design(const ExperimentConfig& cfg) {
  if (cfg.family == Family::SyntheticLinearBias) return nullptr;
  RngStream stream(derive_seed(cfg.master_seed, {kDesignRep, kDesignTag}));
  return make_design(gen_design(cfg.recipe, cfg.n, cfg.p, stream).x);
}

ModelSpec experiment_model(const ExperimentConfig& cfg, const DesignPtr& design, std::size_t rep) {
  switch (cfg.family) {
    case Family::Logistic: return logistic_model(design);
    case Family::LogisticMisclassified: {
      RngStream stream(derive_seed(cfg.master_seed, {rep, kLatentTag}));
      return misclassified_logistic_model(
          design, draw_latents(design->n(), stream, cfg.fp_a, cfg.fp_b, cfg.fn_a, cfg.fn_b));
    }
    case Family::Poisson: return poisson_model(design);
    case Family::PoissonCensored: return censored_poisson_model(design, *cfg.censor_at);
    case Family::NegBin: return negbin_model(design);
    case Family::NegBinCensored: return censored_negbin_model(design, *cfg.censor_at);
    case Family::SyntheticLinearBias: return synthetic_model(*cfg.synth);
  }
  throw InvalidArgument("unknown family");
}

const MethodEstimates* ExperimentResult::find(MethodId method) const {
  for (const auto& m : methods) {
    if (m.method == method) return &m;
  }
  return nullptr;
}

std::map<int, std::size_t> ExperimentResult::iteration_histogram() const {
  std::map<int, std::size_t> h;
  for (int k : jini_iterations) {
    if (k >= 0) ++h[k];
  }
  return h;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const DesignPtr design = experiment_design(cfg);
  const std::size_t dim = static_cast<std::size_t>(cfg.theta0.size());

  std::vector<RepOutcome> outcomes(cfg.reps);
  parallel_for(cfg.reps, cfg.workers,
               [&](std::size_t r) { outcomes[r] = run_replication(cfg, design, r); });

  ExperimentResult res;
  res.config = cfg;
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    MethodEstimates m;
    m.method = cfg.methods[k];
    m.estimates = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cfg.reps),
                                            static_cast<Eigen::Index>(dim), kNaN);
    m.ok.assign(cfg.reps, false);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      const auto& e = outcomes[r].estimates[k];
      if (!e) {
        ++m.failures;
        continue;
      }
      m.ok[r] = true;
      m.estimates.row(static_cast<Eigen::Index>(r)) = e->transpose();
      const Eigen::VectorXd dev = *e - cfg.theta0;
      sum += dev;
      sq += dev.cwiseProduct(dev);
    }
    const double count = static_cast<double>(m.successes());
    if (count > 0) {
      m.bias = sum / count;
      m.rmse = (sq / count).cwiseSqrt();
    } else {
      m.bias = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), kNaN);
      m.rmse = m.bias;
    }
    res.methods.push_back(std::move(m));
  }

  double epv_sum = 0.0, cens_sum = 0.0;
  std::size_t epv_n = 0, cens_n = 0;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    const auto& o = outcomes[r];
    res.jini_iterations.push_back(o.iterations);
    res.jini_residuals.push_back(o.residual);
    if (o.iterations >= 0 && !o.jini_converged) ++res.jini_nonconverged;
    res.inner_fit_failures += o.inner_failures;
    if (!o.error.empty()) res.rep_errors[r] = o.error;
    if (o.epv) {
      epv_sum += *o.epv;
      ++epv_n;
    }
    if (o.censored_fraction) {
      cens_sum += *o.censored_fraction;
      ++cens_n;
    }
  }
  if (epv_n) res.achieved_epv = epv_sum / static_cast<double>(epv_n);
  if (cens_n) res.censored_fraction = cens_sum / static_cast<double>(cens_n);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::vector<double> GridSpec::values() const {
  if (steps < 1) throw InvalidArgument("grid needs at least one step");
  if (steps == 1) return {0.5 * (lo + hi)};
  if (!(lo < hi)) throw InvalidArgument("grid requires lo < hi");
  std::vector<double> v(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
  }
  v.back() = hi;
  return v;
}

GridSpec parse_grid(std::string_view text) {
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  if (b == std::string_view::npos) throw InvalidArgument("grid must be lo:hi:steps");
  GridSpec g;
  try {
    std::size_t used = 0;
    const std::string lo(text.substr(0, a)), hi(text.substr(a + 1, b - a - 1)),
        steps(text.substr(b + 1));
    g.lo = std::stod(lo, &used);
    if (used != lo.size()) throw std::invalid_argument(lo);
    g.hi = std::stod(hi, &used);
    if (used != hi.size()) throw std::invalid_argument(hi);
    const long long s = std::stoll(steps, &used);
    if (used != steps.size() || s < 1) throw std::invalid_argument(steps);
    g.steps = static_cast<std::size_t>(s);
  } catch (const std::exception&) {
    throw InvalidArgument("grid must be lo:hi:steps, got '" + std::string(text) + "'");
  }
  if (g.steps > 1 && !(g.lo < g.hi)) throw InvalidArgument("grid requires lo < hi");
  return g;
}

std::size_t default_probe_H(const ModelSpec& model) {
  if (model.family != Family::SyntheticLinearBias && model.sample_size() >= 1000) return 1000;
  return 10000;
}

BiasProbeResult bias_probe(const ModelSpec& model, const InitialEstimator& est,
                           const ParamVec& theta0, std::size_t coord, const GridSpec& grid,
                           std::size_t H, std::uint64_t seed, std::size_t workers) {
  if (static_cast<std::size_t>(theta0.size()) != model.dim()) {
    throw InvalidArgument("theta0 dimension does not match the model");
  }
  if (coord >= model.dim()) throw InvalidArgument("probe coordinate out of range");
  if (H < 1) throw InvalidArgument("H must be at least 1");
  BiasProbeResult out;
  out.coord = coord;
  out.grid = grid.values();
  out.H = H;
  out.theta0 = theta0;
  std::vector<ParamVec> points;
  for (double v : out.grid) {
    ParamVec theta = theta0;
    theta[static_cast<Eigen::Index>(coord)] = v;
    if (!model.box.contains(theta)) {
      throw InvalidArgument("grid value " + format_double(v) + " lies outside the parameter box");
    }
    points.push_back(std::move(theta));
  }
  if (!model.box.contains(theta0)) throw InvalidArgument("theta0 lies outside the parameter box");

  const CrnBank bank = bank_for(model, seed, H);
  out.d_star.resize(static_cast<Eigen::Index>(points.size()), theta0.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto ps = pi_star(model, points[k], bank, est, FailurePolicy::Abort, workers);
    out.d_star.row(static_cast<Eigen::Index>(k)) = (ps.value - points[k]).transpose();
  }
  const auto at0 = pi_star(model, theta0, bank, est, FailurePolicy::Abort, workers);
  out.half_width = std::abs(at0.value[static_cast<Eigen::Index>(coord)] -
                            theta0[static_cast<Eigen::Index>(coord)]);
  return out;
}

}  // namespace jini
