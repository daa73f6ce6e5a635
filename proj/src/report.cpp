#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include <openssl/evp.h>

#include "jini/error.hpp"
#include "jini/harness.hpp"

namespace jini {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_groups(
    const ExperimentConfig& cfg) {
  const bool synthetic = cfg.family == Family::SyntheticLinearBias;
  const std::string sym = synthetic ? "theta_" : "beta_";
  const std::size_t dim = static_cast<std::size_t>(cfg.theta0.size());
  const std::size_t n_beta = has_overdispersion(cfg.family) ? dim - 1 : dim;

  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::size_t j = 0;
  while (j < n_beta) {
    std::size_t end = j + 1;
    if (cfg.theta0[static_cast<Eigen::Index>(j)] == 0.0) {
      while (end < n_beta && cfg.theta0[static_cast<Eigen::Index>(end)] == 0.0) ++end;
    }
    std::vector<std::size_t> idx;
    for (std::size_t k = j; k < end; ++k) idx.push_back(k);
    std::string label = sym + std::to_string(j + 1);
    if (end - j > 1) label += ":" + std::to_string(end);
    groups.emplace_back(std::move(label), std::move(idx));
    j = end;
  }
  if (n_beta < dim) groups.emplace_back("alpha", std::vector<std::size_t>{dim - 1});
  return groups;
}

std::vector<SummaryRow> summarize(const ExperimentResult& result) {
  std::vector<SummaryRow> rows;
  const auto groups = parameter_groups(result.config);
  for (const auto& m : result.methods) {
    for (const auto& [label, idx] : groups) {
      SummaryRow row;
      row.method = std::string(method_id_name(m.method));
      row.group = label;
      row.indices = idx;
      for (auto i : idx) {
        row.abs_bias += std::abs(m.bias[static_cast<Eigen::Index>(i)]);
        row.rmse += m.rmse[static_cast<Eigen::Index>(i)];
      }
      row.abs_bias /= static_cast<double>(idx.size());
      row.rmse /= static_cast<double>(idx.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_estimates_csv(std::ostream& out, const ExperimentResult& result) {
  out << "rep,method,param_index,estimate\n";
  const std::size_t reps = result.config.reps;
  for (std::size_t r = 0; r < reps; ++r) {
    for (const auto& m : result.methods) {
      if (!m.ok[r]) continue;
      const auto name = method_id_name(m.method);
      for (Eigen::Index j = 0; j < m.estimates.cols(); ++j) {
        out << r << ',' << name << ',' << (j + 1) << ','
            << format_double(m.estimates(static_cast<Eigen::Index>(r), j)) << '\n';
      }
    }
  }
}

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw NumericFailure("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) {
      a.push_back(v[i]);
    } else {
      a.push_back(nullptr);
    }
  }
  return a;
}

}  // namespace

nlohmann::json summary_json(const ExperimentResult& result) {
  nlohmann::json j;
  const auto config = to_json(result.config);
  j["config"] = config;
  j["config_hash"] = git_blob_hash(config.dump());
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& m : result.methods) {
    methods[std::string(method_id_name(m.method))] = {
        {"bias", vec_json(m.bias)},
        {"rmse", vec_json(m.rmse)},
        {"successes", m.successes()},
        {"failures", m.failures},
    };
  }
  j["methods"] = methods;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : summarize(result)) {
    table.push_back({{"method", row.method},
                     {"group", row.group},
                     {"abs_bias", std::isfinite(row.abs_bias) ? nlohmann::json(row.abs_bias) : nlohmann::json()},
                     {"rmse", std::isfinite(row.rmse) ? nlohmann::json(row.rmse) : nlohmann::json()}});
  }
  j["summary"] = table;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, count] : result.iteration_histogram()) hist[std::to_string(k)] = count;
  j["jini_iteration_histogram"] = hist;
  j["jini_nonconverged"] = result.jini_nonconverged;
  j["inner_fit_failures"] = result.inner_fit_failures;
  nlohmann::json errors = nlohmann::json::object();
  for (const auto& [rep, msg] : result.rep_errors) errors[std::to_string(rep)] = msg;
  j["replication_errors"] = errors;
  if (result.achieved_epv) j["achieved_epv"] = *result.achieved_epv;
  if (result.censored_fraction) j["censored_fraction"] = *result.censored_fraction;
  j["wall_seconds"] = result.wall_seconds;
  return j;
}

void write_probe_csv(std::ostream& out, const BiasProbeResult& probe) {
  out << "theta_" << (probe.coord + 1);
  for (Eigen::Index j = 0; j < probe.d_star.cols(); ++j) out << ",d_star_" << (j + 1);
  out << '\n';
  for (std::size_t k = 0; k < probe.grid.size(); ++k) {
    out << format_double(probe.grid[k]);
    for (Eigen::Index j = 0; j < probe.d_star.cols(); ++j) {
      out << ',' << format_double(probe.d_star(static_cast<Eigen::Index>(k), j));
    }
    out << '\n';
  }
}

}  // namespace jini
