#include "jini/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "jini/error.hpp"

namespace jini {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw CsvError(line, "expected a finite number, got '" + s + "'");
  }
  return v;
}

std::int64_t parse_count(const std::string& s, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw CsvError(line, "expected an integer response, got '" + s + "'");
  }
  return v;
}

void read_metadata(const std::string& line, std::size_t lineno,
                   std::optional<std::int64_t>& censor_at) {
  const std::string key = "#censor_at=";
  if (line.rfind(key, 0) != 0) return;
  censor_at = parse_count(line.substr(key.size()), lineno);
  if (*censor_at <= 0) throw CsvError(lineno, "censor_at must be positive");
}

}  // namespace

LoadedDataset read_dataset_csv(std::istream& in, ResponseKind kind) {
  std::optional<std::int64_t> censor_at;
  std::vector<std::string> header;
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      read_metadata(line, lineno, censor_at);
      continue;
    }
    header = split_fields(line);
    break;
  }
  if (header.empty()) throw CsvError(lineno, "missing header row");
  if (header.front() != "y") throw CsvError(lineno, "first column must be 'y'");

  std::ptrdiff_t fp_col = -1;
  std::ptrdiff_t fn_col = -1;
  std::vector<std::size_t> x_cols;
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] == "u_fp") {
      fp_col = static_cast<std::ptrdiff_t>(j);
    } else if (header[j] == "u_fn") {
      fn_col = static_cast<std::ptrdiff_t>(j);
    } else {
      x_cols.push_back(j);
    }
  }
  if (x_cols.empty()) throw CsvError(lineno, "no covariate columns");
  if ((fp_col < 0) != (fn_col < 0)) throw CsvError(lineno, "u_fp and u_fn must appear together");

  std::vector<std::int64_t> y;
  std::vector<std::vector<double>> rows;
  std::vector<double> fp;
  std::vector<double> fn;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      read_metadata(line, lineno, censor_at);
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw CsvError(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    const auto yi = parse_count(fields[0], lineno);
    if (kind == ResponseKind::Binary && yi != 0 && yi != 1) {
      throw CsvError(lineno, "binary response must be 0 or 1");
    }
    if (yi < 0) throw CsvError(lineno, "count response must be non-negative");
    if (censor_at && yi > *censor_at) throw CsvError(lineno, "response exceeds censor_at");
    y.push_back(yi);
    std::vector<double> row;
    row.reserve(x_cols.size());
    for (auto j : x_cols) row.push_back(parse_double(fields[j], lineno));
    rows.push_back(std::move(row));
    if (fp_col >= 0) {
      fp.push_back(parse_double(fields[static_cast<std::size_t>(fp_col)], lineno));
      fn.push_back(parse_double(fields[static_cast<std::size_t>(fn_col)], lineno));
    }
  }
  if (y.empty()) throw CsvError(lineno, "no data rows");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }

  LoadedDataset out;
  out.data.design = make_design(std::move(x));
  out.data.y = std::move(y);
  out.data.kind = kind;
  out.data.censor_at = censor_at;
  if (fp_col >= 0) {
    out.latents = MisclassLatents{Eigen::Map<Eigen::VectorXd>(fp.data(), static_cast<Eigen::Index>(fp.size())),
                                  Eigen::Map<Eigen::VectorXd>(fn.data(), static_cast<Eigen::Index>(fn.size()))};
  }
  return out;
}

LoadedDataset read_dataset_csv(const std::filesystem::path& path, ResponseKind kind) {
  std::ifstream in(path);
  if (!in) throw CsvError(0, "cannot open " + path.string());
  return read_dataset_csv(in, kind);
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const MisclassLatents* latents) {
  if (data.censor_at) out << "#censor_at=" << *data.censor_at << '\n';
  const auto& x = data.design->x;
  out << 'y';
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << ",x" << (j + 1);
  if (latents) out << ",u_fp,u_fn";
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << data.y[i];
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << x(r, j);
    if (latents) out << ',' << latents->u_fp[r] << ',' << latents->u_fn[r];
    out << '\n';
  }
}

}  // namespace jini
