#include <algorithm>
#include <string>

#include "jini/error.hpp"
#include "jini/harness.hpp"

namespace jini {

namespace {

struct MethodName {
  MethodId id;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {MethodId::Mle, "MLE"},
    {MethodId::NaiveMle, "naive-MLE"},
    {MethodId::BenchmarkMle, "benchmark-MLE"},
    {MethodId::Bbc, "BBC"},
    {MethodId::Jini, "JINI"},
};

ParamVec padded(std::initializer_list<double> head, std::size_t p) {
  ParamVec v = ParamVec::Zero(static_cast<Eigen::Index>(p));
  Eigen::Index i = 0;
  for (double x : head) v[i++] = x;
  return v;
}

ParamVec with_alpha(const ParamVec& beta, double alpha) {
  ParamVec v(beta.size() + 1);
  v.head(beta.size()) = beta;
  v[beta.size()] = alpha;
  return v;
}

ExperimentConfig negbin_setting(std::string name, bool censored) {
  ExperimentConfig c;
  c.setting = std::move(name);
  c.family = censored ? Family::NegBinCensored : Family::NegBin;
  c.recipe = DesignRecipe::NegBinStyle;
  c.n = 100;
  c.p = 20;
  c.theta0 = with_alpha(padded({1.5, 2.5, -2.5}, c.p), 0.6);
  if (censored) {
    c.censor_at = 30;
    c.methods = {MethodId::NaiveMle, MethodId::BenchmarkMle, MethodId::Bbc, MethodId::Jini};
  } else {
    c.methods = {MethodId::Mle, MethodId::Bbc, MethodId::Jini};
  }
  return c;
}

ExperimentConfig logistic_setting(std::string name, bool misclassified, bool setting_two) {
  ExperimentConfig c;
  c.setting = std::move(name);
  c.family = misclassified ? Family::LogisticMisclassified : Family::Logistic;
  c.recipe = setting_two ? DesignRecipe::LogisticII : DesignRecipe::LogisticI;
  c.n = setting_two ? 3000 : 2000;
  c.p = 200;
  c.theta0 = padded({5.0, 5.0, -7.0, -7.0}, c.p);
  if (misclassified) {
    c.methods = {MethodId::NaiveMle, MethodId::Bbc, MethodId::Jini};
  } else {
    c.methods = {MethodId::Mle, MethodId::Bbc, MethodId::Jini};
  }
  return c;
}

ExperimentConfig censored_poisson_setting() {
  ExperimentConfig c;
  c.setting = "censored-poisson-t8";
  c.family = Family::PoissonCensored;
  c.recipe = DesignRecipe::NegBinStyle;
  c.n = 200;
  c.p = 50;
  c.censor_at = 5;
  c.theta0 = padded({0.5, 0.8, -0.4}, c.p);
  c.methods = {MethodId::NaiveMle, MethodId::BenchmarkMle, MethodId::Bbc, MethodId::Jini};
  return c;
}

ExperimentConfig synthetic_setting() {
  ExperimentConfig c;
  c.setting = "synthetic";
  c.family = Family::SyntheticLinearBias;
  c.p = 5;
  c.n = c.p;
  c.theta0 = ParamVec(5);
  c.theta0 << 1.0, -0.5, 0.25, 0.0, 2.0;
  SyntheticBiasSpec s;
  s.B = 0.5 * Eigen::MatrixXd::Identity(5, 5);
  s.c = ParamVec::Constant(5, 0.1);
  s.noise_sd = 0.1;
  c.synth = std::move(s);
  c.methods = {MethodId::Mle, MethodId::Bbc, MethodId::Jini};
  return c;
}

std::string joined_presets() {
  std::string out;
  for (const auto& name : preset_names()) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

}  // namespace

std::string_view method_id_name(MethodId method) {
  for (const auto& m : kMethodNames) {
    if (m.id == method) return m.name;
  }
  return "?";
}

std::optional<MethodId> parse_method_id(std::string_view name) {
  for (const auto& m : kMethodNames) {
    if (m.name == name) return m.id;
  }
  return std::nullopt;
}

std::vector<std::string> preset_names() {
  return {"negbin-t2",         "negbin-censored-t3", "logistic-misclass-t4-I",
          "logistic-misclass-t4-II", "logistic-t6-I", "logistic-t6-II",
          "censored-poisson-t8", "synthetic"};
}

ExperimentConfig preset(std::string_view setting, bool paper_scale) {
  ExperimentConfig c;
  if (setting == "negbin-t2") {
    c = negbin_setting("negbin-t2", false);
  } else if (setting == "negbin-censored-t3") {
    c = negbin_setting("negbin-censored-t3", true);
  } else if (setting == "logistic-misclass-t4-I") {
    c = logistic_setting("logistic-misclass-t4-I", true, false);
  } else if (setting == "logistic-misclass-t4-II") {
    c = logistic_setting("logistic-misclass-t4-II", true, true);
  } else if (setting == "logistic-t6-I") {
    c = logistic_setting("logistic-t6-I", false, false);
  } else if (setting == "logistic-t6-II") {
    c = logistic_setting("logistic-t6-II", false, true);
  } else if (setting == "censored-poisson-t8") {
    c = censored_poisson_setting();
  } else if (setting == "synthetic") {
    c = synthetic_setting();
  } else {
    throw InvalidArgument("unknown setting '" + std::string(setting) +
                          "'; available: " + joined_presets());
  }
  if (paper_scale) {
    c.reps = 1000;
    c.H = 200;
  }
  return c;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.reps < 1) throw InvalidArgument("reps must be at least 1");
  if (cfg.H < 1) throw InvalidArgument("H must be at least 1");
  if (!(cfg.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (cfg.max_iter < 0) throw InvalidArgument("max_iter must be non-negative");
  if (cfg.stall_window < 0) throw InvalidArgument("stall_window must be non-negative");
  if (!cfg.theta0.allFinite()) throw InvalidArgument("theta0 must be finite");
  if (cfg.family == Family::SyntheticLinearBias) {
    if (!cfg.synth) throw InvalidArgument("synthetic setting requires B and c");
    if (static_cast<std::size_t>(cfg.theta0.size()) != cfg.synth->p()) {
      throw InvalidArgument("theta0 dimension does not match the synthetic bias");
    }
    return;
  }
  if (cfg.n < 1 || cfg.p < 1) throw InvalidArgument("n and p must be positive");
  const std::size_t dim = cfg.p + (has_overdispersion(cfg.family) ? 1 : 0);
  if (static_cast<std::size_t>(cfg.theta0.size()) != dim) {
    throw InvalidArgument("theta0 has dimension " + std::to_string(cfg.theta0.size()) +
                          ", expected " + std::to_string(dim));
  }
  if (is_censored(cfg.family) != cfg.censor_at.has_value()) {
    throw InvalidArgument("censoring threshold required iff the family is censored");
  }
  for (auto m : cfg.methods) {
    if (m == MethodId::BenchmarkMle && !is_censored(cfg.family)) {
      throw InvalidArgument("benchmark-MLE is only defined for censored settings");
    }
  }
}

namespace {

Family parse_family(const std::string& name) {
  for (auto f : {Family::Logistic, Family::LogisticMisclassified, Family::Poisson,
                 Family::PoissonCensored, Family::NegBin, Family::NegBinCensored,
                 Family::SyntheticLinearBias}) {
    if (family_name(f) == name) return f;
  }
  throw InvalidArgument("unknown family '" + name + "'");
}

DesignRecipe parse_recipe(const std::string& name) {
  for (auto r : {DesignRecipe::NegBinStyle, DesignRecipe::LogisticI, DesignRecipe::LogisticII,
                 DesignRecipe::InterceptOnly}) {
    if (recipe_name(r) == name) return r;
  }
  throw InvalidArgument("unknown design recipe '" + name + "'");
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["setting"] = cfg.setting;
  j["family"] = std::string(family_name(cfg.family));
  j["design"] = std::string(recipe_name(cfg.recipe));
  j["n"] = cfg.n;
  j["p"] = cfg.p;
  j["theta0"] = to_std(cfg.theta0);
  if (cfg.censor_at) j["censor_at"] = *cfg.censor_at;
  if (cfg.family == Family::LogisticMisclassified) {
    j["latents"] = {{"fp", {cfg.fp_a, cfg.fp_b}}, {"fn", {cfg.fn_a, cfg.fn_b}}};
  }
  if (cfg.synth) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < cfg.synth->B.rows(); ++r) {
      rows.push_back(to_std(cfg.synth->B.row(r).transpose()));
    }
    j["synthetic"] = {{"B", rows}, {"c", to_std(cfg.synth->c)}, {"noise_sd", cfg.synth->noise_sd}};
  }
  j["H"] = cfg.H;
  j["reps"] = cfg.reps;
  j["master_seed"] = cfg.master_seed;
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : cfg.methods) methods.push_back(std::string(method_id_name(m)));
  j["methods"] = methods;
  j["tol"] = cfg.tol;
  j["max_iter"] = cfg.max_iter;
  j["stall_window"] = cfg.stall_window;
  j["failure_policy"] = std::string(policy_name(cfg.failure_policy));
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  if (!j.is_object()) throw InvalidArgument("experiment config must be a JSON object");
  try {
    if (j.contains("setting")) c.setting = j.at("setting").get<std::string>();
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("design")) c.recipe = parse_recipe(j.at("design").get<std::string>());
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("p")) c.p = j.at("p").get<std::size_t>();
    if (j.contains("theta0")) c.theta0 = from_std(j.at("theta0").get<std::vector<double>>());
    if (j.contains("censor_at")) {
      if (j.at("censor_at").is_null()) {
        c.censor_at.reset();
      } else {
        c.censor_at = j.at("censor_at").get<std::int64_t>();
      }
    }
    if (j.contains("latents")) {
      const auto fp = j.at("latents").at("fp").get<std::vector<double>>();
      const auto fn = j.at("latents").at("fn").get<std::vector<double>>();
      if (fp.size() != 2 || fn.size() != 2) throw InvalidArgument("latents need two shapes each");
      c.fp_a = fp[0];
      c.fp_b = fp[1];
      c.fn_a = fn[0];
      c.fn_b = fn[1];
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      SyntheticBiasSpec spec = c.synth.value_or(SyntheticBiasSpec{});
      if (s.contains("c")) spec.c = from_std(s.at("c").get<std::vector<double>>());
      if (s.contains("B")) {
        const auto rows = s.at("B").get<std::vector<std::vector<double>>>();
        spec.B.resize(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows[0].size()) throw InvalidArgument("B rows differ in length");
          for (std::size_t k = 0; k < rows[r].size(); ++k) {
            spec.B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
          }
        }
      }
      if (s.contains("noise_sd")) spec.noise_sd = s.at("noise_sd").get<double>();
      c.synth = std::move(spec);
    }
    if (j.contains("H")) c.H = j.at("H").get<std::size_t>();
    if (j.contains("reps")) c.reps = j.at("reps").get<std::size_t>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) {
        const auto name = m.get<std::string>();
        const auto id = parse_method_id(name);
        if (!id) throw InvalidArgument("unknown method '" + name + "'");
        c.methods.push_back(*id);
      }
    }
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
    if (j.contains("tol")) c.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<int>();
    if (j.contains("stall_window")) c.stall_window = j.at("stall_window").get<int>();
    if (j.contains("failure_policy")) {
      const auto name = j.at("failure_policy").get<std::string>();
      if (name == "abort") {
        c.failure_policy = FailurePolicy::Abort;
      } else if (name == "skip-and-average") {
        c.failure_policy = FailurePolicy::SkipAndAverage;
      } else {
        throw InvalidArgument("unknown failure policy '" + name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

}  // namespace jini
