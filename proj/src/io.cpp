#include "fconv/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fconv {

SpectralMeasure measure_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("eigenvalues")) {
      const auto values = j.at("eigenvalues").get<std::vector<double>>();
      return from_eigenvalues(values);
    }
    return SpectralMeasure(j.at("atoms").get<std::vector<double>>(),
                           j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed measure JSON: ") + e.what());
  }
}

nlohmann::ordered_json measure_to_json(const SpectralMeasure& mu) {
  nlohmann::ordered_json j;
  j["atoms"] = mu.atoms();
  j["weights"] = mu.weights();
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

SpectralMeasure read_measure(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return measure_from_json(j);
}

void write_measure(const std::filesystem::path& path, const SpectralMeasure& mu) {
  write_file_atomic(path, measure_to_json(mu).dump(2) + "\n");
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string two_column_csv(const char* header, const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  std::string out = header;
  out += '\n';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out += format_double(xs[i]);
    out += ',';
    out += format_double(ys[i]);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json number_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace

std::string density_csv(const DensityCurve& d) { return two_column_csv("E,rho", d.E_grid, d.rho); }

std::string cdf_csv(const CdfCurve& c) { return two_column_csv("E,F", c.E_grid, c.F); }

std::string spectrum_csv(const std::vector<double>& eigenvalues) {
  std::string out = "index,eigenvalue\n";
  for (std::size_t i = 0; i < eigenvalues.size(); ++i)
    out += std::to_string(i) + "," + format_double(eigenvalues[i]) + "\n";
  return out;
}

nlohmann::ordered_json report_to_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["experiment"] = r.experiment;
  j["note"] = r.note;
  j["config"] = r.config;
  j["a1_violated"] = r.a1_violated;
  auto& per = j["per_N"] = nlohmann::ordered_json::array();
  for (const PerN& p : r.per_N) {
    nlohmann::ordered_json row;
    row["N"] = p.N;
    for (const auto& [k, v] : p.values) row[k] = number_or_null(v);
    per.push_back(row);
  }
  auto& slopes = j["slopes"] = nlohmann::ordered_json::object();
  for (const auto& [name, fit] : r.slopes)
    slopes[name] = {{"slope", number_or_null(fit.slope)},
                    {"stderr", number_or_null(fit.stderr_)},
                    {"intercept", number_or_null(fit.intercept)}};
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const Check& c : r.checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["value"] = number_or_null(c.value);
    cj["relation"] = c.relation;
    cj["threshold"] = number_or_null(c.threshold);
    if (c.relation == "in") cj["threshold_hi"] = number_or_null(c.threshold_hi);
    cj["pass"] = c.pass;
    checks.push_back(cj);
  }
  j["pass"] = r.passed();
  return j;
}

std::string report_raw_csv(const ExperimentReport& r) {
  std::string out;
  for (std::size_t i = 0; i < r.raw_columns.size(); ++i) {
    if (i) out += ',';
    out += r.raw_columns[i];
  }
  out += '\n';
  for (const auto& row : r.raw_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace fconv
