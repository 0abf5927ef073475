#include "cli.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fconv/experiments.hpp"
#include "fconv/inversion.hpp"
#include "fconv/io.hpp"
#include "fconv/rmt.hpp"

namespace fconv::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string mu_a;
  std::string mu_b;
  std::optional<double> eta;
  int grid = 601;
  double tol = 1e-12;
  std::optional<std::string> N;
  std::optional<int> replicates;
  std::uint64_t seed = 0;
  std::string ensemble = "unitary";
  double c1 = 1.0;
  double c2 = 1.0;
  std::string out = ".";
  std::optional<std::string> z;
  bool round = false;
  std::string thresholds;
  std::string experiment;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad integer in N list: " + item);
    }
    if (used != item.size() || v < 1) throw ValidationError("bad entry in N list: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty N list");
  return out;
}

ComplexPoint parse_z(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ValidationError("--z expects RE,IM");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ValidationError("--z expects RE,IM");
  }
}

SpectralMeasure bernoulli() { return SpectralMeasure({-1.0, 1.0}, {0.5, 0.5}); }

SpectralMeasure measure_or_default(const std::string& path) {
  return path.empty() ? bernoulli() : read_measure(path);
}

SolverConfig solver_config(const Options& o) {
  SolverConfig cfg;
  cfg.newton_tol = o.tol;
  cfg.validate();
  return cfg;
}

Thresholds load_thresholds(const std::string& path) {
  Thresholds t;
  if (path.empty()) return t;
  const auto j = nlohmann::json::parse(read_file(path));
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  get("concentration_decay_ratio", t.concentration_decay_ratio);
  get("concentration_max_ks", t.concentration_max_ks);
  get("local_law_stat", t.local_law_stat);
  get("local_law_fraction", t.local_law_fraction);
  get("variance_slope_lo", t.variance_slope_lo);
  get("variance_slope_hi", t.variance_slope_hi);
  get("error_slope_lo", t.error_slope_lo);
  get("error_slope_hi", t.error_slope_hi);
  get("identity_sigmas", t.identity_sigmas);
  get("sign_test_level", t.sign_test_level);
  return t;
}

int cmd_convolve(const Options& o, std::ostream& out) {
  if (o.mu_a.empty() || o.mu_b.empty()) throw ValidationError("convolve needs --mu-a and --mu-b");
  const SpectralMeasure a = read_measure(o.mu_a);
  const SpectralMeasure b = read_measure(o.mu_b);
  const double eta = o.eta.value_or(1e-2);
  if (!(eta > 0.0)) throw ValidationError("--eta must be positive");
  if (o.grid < 2) throw ValidationError("--grid must be >= 2");

  const auto grid = default_grid(a, b, o.grid);
  const DensityCurve d = density_curve(a, b, grid, eta, solver_config(o));
  const CdfCurve c = cdf_curve(d);

  const fs::path dir(o.out);
  write_file_atomic(dir / "density.csv", density_csv(d));
  write_file_atomic(dir / "cdf.csv", cdf_csv(c));

  nlohmann::ordered_json summary;
  summary["eta"] = d.eta_used;
  summary["extrapolated"] = d.extrapolated;
  summary["a1_violated"] = d.a1_violated();
  summary["sup_density"] = d.sup_density;
  summary["mass"] = total_mass(d);
  auto& atoms = summary["atoms"] = nlohmann::ordered_json::array();
  for (const Atom& at : d.atoms) atoms.push_back({{"position", at.position}, {"mass", at.mass}});
  write_file_atomic(dir / "convolve.json", summary.dump(2) + "\n");

  if (d.a1_violated()) out << "A1-violated: free convolution has " << d.atoms.size() << " atom(s)\n";
  out << "wrote " << (dir / "density.csv").string() << " and " << (dir / "cdf.csv").string() << "\n";
  return kSuccess;
}

int cmd_sample(const Options& o, std::ostream& out) {
  const SpectralMeasure a = measure_or_default(o.mu_a);
  const SpectralMeasure b = measure_or_default(o.mu_b);
  const std::vector<int> Ns = parse_int_list(o.N.value_or("100"));
  const int replicates = o.replicates.value_or(1);
  if (replicates < 1) throw ValidationError("--replicates must be >= 1");

  DrawOptions opts;
  opts.ensemble = o.ensemble == "orthogonal" ? Ensemble::kOrthogonal : Ensemble::kUnitary;
  opts.policy = o.round ? Multiplicity::kLargestRemainder : Multiplicity::kExact;

  const fs::path dir(o.out);
  for (std::size_t ni = 0; ni < Ns.size(); ++ni) {
    for (int r = 0; r < replicates; ++r) {
      const EnsembleDraw d = draw(a, b, Ns[ni], o.seed,
                                  substream(static_cast<std::uint32_t>(ni), static_cast<std::uint32_t>(r)),
                                  opts);
      const fs::path file = dir / ("spectrum_N" + std::to_string(Ns[ni]) + "_r" + std::to_string(r) + ".csv");
      write_file_atomic(file, spectrum_csv(d.eigenvalues));
    }
  }
  out << "wrote " << Ns.size() * static_cast<std::size_t>(replicates) << " spectra to " << dir.string() << "\n";
  return kSuccess;
}

struct ExperimentDefaults {
  std::string N;
  int replicates;
  ComplexPoint z;
};

int cmd_experiment(const Options& o, std::ostream& out) {
  static const std::map<std::string, ExperimentDefaults> defaults = {
      {"concentration", {"100,400", 100, {0.0, 1.0}}},
      {"local-law", {"125,250,500", 50, {0.0, 1.0}}},
      {"variance", {"50,100,200,400", 200, {0.0, 1.0}}},
      {"error-term", {"16,32,64,128", 500, {0.0, 4.0}}},
      {"identity", {"8", 20000, {0.0, 2.0}}},
  };
  const auto it = defaults.find(o.experiment);
  if (it == defaults.end()) throw ValidationError("unknown experiment: " + o.experiment);
  const ExperimentDefaults& def = it->second;

  const SpectralMeasure a = measure_or_default(o.mu_a);
  const SpectralMeasure b = measure_or_default(o.mu_b);

  ExperimentConfig cfg;
  cfg.N_list = parse_int_list(o.N.value_or(def.N));
  cfg.replicates = o.replicates.value_or(def.replicates);
  if (cfg.replicates < 1) throw ValidationError("--replicates must be >= 1");
  cfg.seed = o.seed;
  cfg.ensemble = o.ensemble == "orthogonal" ? Ensemble::kOrthogonal : Ensemble::kUnitary;
  cfg.solver = solver_config(o);
  cfg.z = o.z ? parse_z(*o.z) : def.z;
  cfg.c1 = o.c1;
  cfg.c2 = o.c2;
  cfg.thresholds = load_thresholds(o.thresholds);
  if (o.experiment == "local-law") {
    cfg.eta_window = o.eta.value_or(0.2);
  } else if (o.eta) {
    cfg.cdf_eta = *o.eta;
  }
  if (o.grid != 601) cfg.cdf_grid = o.grid;

  ExperimentReport rep;
  if (o.experiment == "concentration") rep = concentration_experiment(a, b, cfg);
  else if (o.experiment == "local-law") rep = local_law_experiment(a, b, cfg);
  else if (o.experiment == "variance") rep = variance_scaling_experiment(a, b, cfg);
  else if (o.experiment == "error-term") rep = error_term_experiment(a, b, cfg);
  else rep = identity_experiment(a, b, cfg);

  const fs::path dir(o.out);
  write_file_atomic(dir / (o.experiment + "_report.json"), report_to_json(rep).dump(2) + "\n");
  if (!rep.raw_columns.empty()) write_file_atomic(dir / (o.experiment + "_raw.csv"), report_raw_csv(rep));

  for (const Check& c : rep.checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << format_double(c.value) << "\n";
  return rep.passed() ? kSuccess : kThresholdFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Free convolution of spectral measures and A + UBU* experiments", "fconv"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--mu-a", o.mu_a, "measure JSON for A");
    sub->add_option("--mu-b", o.mu_b, "measure JSON for B");
    sub->add_option("--seed", o.seed, "master seed (default 0)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--ensemble", o.ensemble)->check(CLI::IsMember({"unitary", "orthogonal"}));
    sub->add_option("--N", o.N, "comma-separated matrix sizes");
    sub->add_option("--replicates", o.replicates)->check(CLI::PositiveNumber);
  };

  auto* convolve = app.add_subcommand("convolve", "density and CDF of mu_A boxplus mu_B");
  convolve->add_option("--mu-a", o.mu_a)->required();
  convolve->add_option("--mu-b", o.mu_b)->required();
  convolve->add_option("--eta", o.eta, "imaginary part used for inversion")->check(CLI::PositiveNumber);
  convolve->add_option("--grid", o.grid, "number of grid points")->check(CLI::Range(2, 10000000));
  convolve->add_option("--tol", o.tol, "Newton residual tolerance")->check(CLI::PositiveNumber);
  convolve->add_option("--out", o.out, "output directory");

  auto* sample = app.add_subcommand("sample", "eigenvalues of A + U B U*");
  add_common(sample);
  sample->add_flag("--round", o.round, "largest-remainder multiplicities when w N is not integral");

  auto* experiment = app.add_subcommand("experiment", "run a Monte Carlo experiment");
  experiment->add_option("name", o.experiment,
                         "concentration | local-law | variance | error-term | identity")
      ->required();
  add_common(experiment);
  experiment->add_option("--eta", o.eta, "window half-width (local-law) or inversion eta")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--grid", o.grid, "CDF grid size")->check(CLI::Range(2, 10000000));
  experiment->add_option("--tol", o.tol)->check(CLI::PositiveNumber);
  experiment->add_option("--z", o.z, "evaluation point RE,IM");
  experiment->add_option("--c1", o.c1)->check(CLI::PositiveNumber);
  experiment->add_option("--c2", o.c2)->check(CLI::PositiveNumber);
  experiment->add_option("--thresholds", o.thresholds, "JSON file of pass/fail thresholds");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*convolve) return cmd_convolve(o, out);
    if (*sample) return cmd_sample(o, out);
    return cmd_experiment(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

}  // namespace fconv::cli
