#include "jini/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "jini/bias_correct.hpp"
#include "jini/dataset_io.hpp"
#include "jini/error.hpp"
#include "jini/harness.hpp"

namespace jini {

namespace {

using nlohmann::json;

struct Options {
  std::string model;
  std::string method = "jini";
  std::string data;
  std::string setting;
  std::string config;
  std::string out;
  std::string grid;
  std::string methods;
  std::size_t H = 0;
  std::uint64_t seed = 1;
  double tol = 1e-4;
  int max_iter = 100;
  int stall_window = 5;
  std::size_t reps = 0;
  std::size_t workers = 0;
  std::size_t coord = 1;
  std::int64_t censor_at = 0;
  double noise_sd = -1.0;
  bool paper_scale = false;
  bool skip_failures = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t resolve_workers(const Options& o) {
  if (o.workers > 0) return o.workers;
  if (const char* env = std::getenv("JINI_WORKERS")) {
    try {
      const long long v = std::stoll(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("JINI_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Family parse_model(const std::string& name) {
  for (auto f : {Family::Logistic, Family::LogisticMisclassified, Family::Poisson,
                 Family::PoissonCensored, Family::NegBin, Family::NegBinCensored}) {
    if (family_name(f) == name) return f;
  }
  throw UsageError("unknown model '" + name +
                   "'; expected logistic, logistic-misclass, poisson, poisson-censored, "
                   "negbin or negbin-censored");
}

// Observed data and the matching model, either from --data or simulated
// from a preset at its theta0.
struct Problem {
  ModelSpec model;
  std::optional<Dataset> data;
  std::optional<ParamVec> synthetic_pi_hat;
  std::string model_name;
};

ExperimentConfig setting_config(const Options& o) {
  ExperimentConfig cfg = preset(o.setting, o.paper_scale);
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw UsageError("cannot open config file '" + o.config + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("config file is not valid JSON: " + std::string(e.what()));
    }
    cfg = config_from_json(j, std::move(cfg));
  }
  cfg.master_seed = o.seed;
  if (o.H) cfg.H = o.H;
  if (o.reps) cfg.reps = o.reps;
  cfg.tol = o.tol;
  cfg.max_iter = o.max_iter;
  cfg.stall_window = o.stall_window;
  if (o.noise_sd >= 0.0) {
    if (!cfg.synth) throw UsageError("--noise-sd applies to the synthetic setting only");
    cfg.synth->noise_sd = o.noise_sd;
  }
  if (o.skip_failures) cfg.failure_policy = FailurePolicy::SkipAndAverage;
  return cfg;
}

Problem load_problem(const Options& o) {
  Problem p;
  if (!o.setting.empty()) {
    if (!o.data.empty()) throw UsageError("--data and --setting are mutually exclusive");
    const auto cfg = setting_config(o);
    validate(cfg);
    const auto design = experiment_design(cfg);
    p.model = experiment_model(cfg, design, 0);
    p.model_name = std::string(family_name(cfg.family));
    RngStream stream(derive_seed(cfg.master_seed, {0, 2}));
    std::vector<double> row(p.model.sample_size());
    for (auto& u : row) u = stream.uniform();
    if (cfg.family == Family::SyntheticLinearBias) {
      p.synthetic_pi_hat = synthetic_initial(*p.model.synth, cfg.theta0, row);
    } else {
      p.data = simulate_row(p.model, cfg.theta0, row);
    }
    return p;
  }
  if (o.model.empty() || o.data.empty()) {
    throw UsageError("either --setting or both --model and --data are required");
  }
  const Family family = parse_model(o.model);
  p.model_name = o.model;
  auto loaded = read_dataset_csv(std::filesystem::path(o.data),
                                 is_binary(family) ? ResponseKind::Binary : ResponseKind::Count);
  Dataset data = std::move(loaded.data);
  if (o.censor_at > 0) data.censor_at = o.censor_at;
  if (is_censored(family) && !data.censor_at) {
    throw UsageError("model " + o.model + " needs a censoring threshold (#censor_at= or --censor-at)");
  }
  if (!is_censored(family)) data.censor_at.reset();
  validate(data);
  switch (family) {
    case Family::Logistic: p.model = logistic_model(data.design); break;
    case Family::LogisticMisclassified:
      if (!loaded.latents) throw UsageError("logistic-misclass needs u_fp and u_fn columns");
      p.model = misclassified_logistic_model(data.design, *loaded.latents);
      break;
    case Family::Poisson: p.model = poisson_model(data.design); break;
    case Family::PoissonCensored: p.model = censored_poisson_model(data.design, *data.censor_at); break;
    case Family::NegBin: p.model = negbin_model(data.design); break;
    case Family::NegBinCensored: p.model = censored_negbin_model(data.design, *data.censor_at); break;
    default: throw UsageError("unsupported model");
  }
  p.data = std::move(data);
  return p;
}

IbConfig ib_config(const Options& o, std::size_t default_H) {
  IbConfig cfg;
  cfg.H = o.H ? o.H : default_H;
  cfg.tol = o.tol;
  cfg.max_iter = o.max_iter;
  cfg.stall_window = o.stall_window;
  cfg.seed = o.seed;
  cfg.workers = resolve_workers(o);
  cfg.failure_policy = o.skip_failures ? FailurePolicy::SkipAndAverage : FailurePolicy::Abort;
  return cfg;
}

ParamVec problem_pi_hat(const Problem& p, const InitialEstimator& est) {
  if (p.synthetic_pi_hat) return *p.synthetic_pi_hat;
  return initial_estimate(*p.data, est);
}

void emit(const Options& o, std::ostream& out, const std::string& content) {
  if (o.out.empty()) {
    out << content;
  } else {
    write_file_atomic(o.out, content);
  }
}

json trace_json(const IbTrace& t) {
  return {{"iterations", t.iterations()},
          {"converged", t.converged},
          {"stalled", t.stalled},
          {"final_residual", t.pi_star_residuals.back()},
          {"step_norms", t.step_norms},
          {"residuals", t.pi_star_residuals},
          {"fit_failures", t.fit_failures}};
}

int cmd_fit(const Options& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p = load_problem(o);
  const auto est = initial_estimator_for(p.model.family);
  json j;
  j["model"] = p.model_name;
  j["method"] = o.method;

  if (o.method == "mle" || o.method == "benchmark-mle") {
    if (!p.data) throw UsageError("the synthetic setting has no likelihood fit");
    const auto fitter = o.method == "mle" ? est : benchmark_estimator_for(p.model.family);
    const auto fit = fitter.fit(*p.data, fitter.cfg, std::nullopt);
    j["estimate"] = vec_json(fit.params);
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["loglik"] = fit.loglik;
    j["grad_norm"] = fit.grad_norm;
    if (!fit.note.empty()) j["note"] = fit.note;
  } else if (o.method == "bbc" || o.method == "jini") {
    const IbConfig cfg = ib_config(o, 200);
    validate(cfg);
    const ParamVec pi_hat = problem_pi_hat(p, est);
    const CrnBank bank = bank_for(p.model, cfg.seed, cfg.H);
    const Corrected res = o.method == "bbc"
                              ? bbc(pi_hat, p.model, bank, est, cfg.failure_policy, cfg.workers)
                              : ib_solve(pi_hat, p.model, bank, est, cfg);
    j["method"] = std::string(method_name(res.method));
    j["estimate"] = vec_json(res.estimate);
    j["pi_hat"] = vec_json(res.pi_hat);
    j["projected"] = res.projected;
    j["H"] = cfg.H;
    j["seed"] = cfg.seed;
    if (res.trace) j["trace"] = trace_json(*res.trace);
    j["fit_failures"] = res.fit_failures;
  } else {
    throw UsageError("unknown method '" + o.method + "'; expected mle, benchmark-mle, bbc or jini");
  }
  j["timing_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  emit(o, out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_trace(const Options& o, std::ostream& out) {
  const Problem p = load_problem(o);
  const auto est = initial_estimator_for(p.model.family);
  const IbConfig cfg = ib_config(o, 200);
  validate(cfg);
  const ParamVec pi_hat = problem_pi_hat(p, est);
  const CrnBank bank = bank_for(p.model, cfg.seed, cfg.H);
  const auto res = ib_solve(pi_hat, p.model, bank, est, cfg);
  const auto& t = *res.trace;
  std::ostringstream csv;
  csv << "k,step_norm,residual\n";
  for (std::size_t k = 0; k < t.iterates.size(); ++k) {
    csv << k << ',';
    if (k > 0) csv << format_double(t.step_norms[k - 1]);
    csv << ',' << format_double(t.pi_star_residuals[k]) << '\n';
  }
  emit(o, out, csv.str());
  if (!o.out.empty()) {
    json meta = {{"converged", t.converged},
                 {"stalled", t.stalled},
                 {"iterations", t.iterations()},
                 {"estimate", vec_json(res.estimate)},
                 {"pi_hat", vec_json(res.pi_hat)},
                 {"fit_failures", t.fit_failures}};
    write_file_atomic(o.out + ".json", meta.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_experiment(const Options& o, std::ostream& out) {
  if (o.setting.empty()) throw UsageError("--setting is required; available: negbin-t2, ...");
  ExperimentConfig cfg = setting_config(o);
  cfg.workers = resolve_workers(o);
  if (!o.methods.empty()) {
    cfg.methods.clear();
    std::stringstream ss(o.methods);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto id = parse_method_id(name);
      if (!id) throw UsageError("unknown method '" + name + "'");
      cfg.methods.push_back(*id);
    }
  }
  const auto result = run_experiment(cfg);
  std::ostringstream csv;
  write_estimates_csv(csv, result);
  const std::string summary = summary_json(result).dump(2) + "\n";
  const std::string prefix = o.out.empty() ? cfg.setting : o.out;
  write_file_atomic(prefix + ".csv", csv.str());
  write_file_atomic(prefix + ".json", summary);
  for (const auto& row : summarize(result)) {
    out << row.method << '\t' << row.group << "\t|bias|=" << format_double(row.abs_bias)
        << "\trmse=" << format_double(row.rmse) << '\n';
  }
  return kExitOk;
}

int cmd_bias_probe(const Options& o, std::ostream& out) {
  if (o.setting.empty()) throw UsageError("--setting is required");
  const ExperimentConfig cfg = setting_config(o);
  validate(cfg);
  const auto design = experiment_design(cfg);
  const ModelSpec model = experiment_model(cfg, design, 0);
  if (o.coord < 1 || o.coord > model.dim()) {
    throw UsageError("--coord must lie in 1.." + std::to_string(model.dim()));
  }
  const std::size_t c = o.coord - 1;
  GridSpec grid;
  if (o.grid.empty()) {
    const double t = cfg.theta0[static_cast<Eigen::Index>(c)];
    grid = {t - 0.5, t + 0.5, 11};
  } else {
    grid = parse_grid(o.grid);
  }
  const std::size_t H = o.H ? o.H : default_probe_H(model);
  const auto probe = bias_probe(model, initial_estimator_for(cfg.family), cfg.theta0, c, grid, H,
                                o.seed, resolve_workers(o));
  std::ostringstream csv;
  write_probe_csv(csv, probe);
  emit(o, out, csv.str());
  if (!o.out.empty()) {
    json meta = {{"setting", cfg.setting},
                 {"coord", o.coord},
                 {"H", H},
                 {"seed", o.seed},
                 {"half_width", probe.half_width},
                 {"theta0", vec_json(cfg.theta0)}};
    write_file_atomic(o.out + ".json", meta.dump(2) + "\n");
  }
  return kExitOk;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--H", o.H, "Number of simulated samples");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--workers", o.workers, "Worker threads (default: JINI_WORKERS or 1)");
  app->add_option("--out", o.out, "Output path (or prefix)");
  app->add_option("--setting", o.setting, "Named preset");
  app->add_option("--config", o.config, "JSON config overriding preset fields");
  app->add_flag("--paper-scale", o.paper_scale, "Use reps=1000, H=200");
  app->add_option("--noise-sd", o.noise_sd, "Noise level of the synthetic setting");
  app->add_flag("--skip-failures", o.skip_failures,
                "Average over successful simulated samples instead of aborting");
}

void add_ib(CLI::App* app, Options& o) {
  app->add_option("--tol", o.tol, "IB step tolerance")->check(CLI::PositiveNumber);
  app->add_option("--max-iter", o.max_iter, "IB iteration cap")->check(CLI::NonNegativeNumber);
  app->add_option("--stall-window", o.stall_window,
                  "stop IB after this many steps without a new minimum step norm (0: off)")
      ->check(CLI::NonNegativeNumber);
}

void add_data(CLI::App* app, Options& o) {
  app->add_option("--model", o.model, "Model id");
  app->add_option("--data", o.data, "Dataset CSV");
  app->add_option("--censor-at", o.censor_at, "Censoring threshold")->check(CLI::PositiveNumber);
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) {
      f.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation-based bias correction: JINI / iterative bootstrap"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "Fit a dataset with mle, benchmark-mle, bbc or jini");
  add_data(fit, o);
  add_common(fit, o);
  add_ib(fit, o);
  fit->add_option("--method", o.method, "mle | benchmark-mle | bbc | jini");

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo study");
  add_common(experiment, o);
  add_ib(experiment, o);
  experiment->add_option("--reps", o.reps, "Replications");
  experiment->add_option("--methods", o.methods, "Comma list of MLE,naive-MLE,benchmark-MLE,BBC,JINI");

  auto* probe = app.add_subcommand("bias-probe", "Simulated bias function along one coordinate");
  add_common(probe, o);
  probe->add_option("--coord", o.coord, "Coordinate (1-based)");
  probe->add_option("--grid", o.grid, "lo:hi:steps");

  auto* trace = app.add_subcommand("trace", "IB convergence trace as CSV");
  add_data(trace, o);
  add_common(trace, o);
  add_ib(trace, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit) return cmd_fit(o, out);
    if (*experiment) return cmd_experiment(o, out);
    if (*probe) return cmd_bias_probe(o, out);
    if (*trace) return cmd_trace(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CsvError& e) {
    err << "usage error: malformed dataset, " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IbNumericFailure& e) {
    err << "numeric failure: " << e.what() << " after " << e.trace().iterations()
        << " iterations\n";
    return kExitNumeric;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InnerFitFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace jini
