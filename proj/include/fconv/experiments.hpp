#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fconv/inversion.hpp"
#include "fconv/measures.hpp"
#include "fconv/rmt.hpp"
#include "fconv/subordination.hpp"

namespace fconv {

/// Pre-registered pass/fail thresholds. The defaults are the values stored in
/// tests/fixtures/pilot_thresholds.json.
struct Thresholds {
  double concentration_decay_ratio = 0.5;
  double concentration_max_ks = 0.08;
  double local_law_stat = 0.05;
  double local_law_fraction = 0.9;
  double variance_slope_lo = -2.4;
  double variance_slope_hi = -1.6;
  double error_slope_lo = -1.4;
  double error_slope_hi = -0.6;
  double identity_sigmas = 4.0;
  double sign_test_level = 0.01;
};

struct ExperimentConfig {
  std::vector<int> N_list;
  int replicates = 100;
  std::uint64_t seed = 0;
  Ensemble ensemble = Ensemble::kUnitary;
  SolverConfig solver;
  // Free-convolution CDF used for KS distances.
  int cdf_grid = 6001;
  double cdf_eta = 1e-3;
  // Local law.
  double eta_window = 0.2;
  double E_lo = -1.6;
  double E_hi = 1.6;
  double E_step = 0.01;
  // Variance, error-term and identity experiments.
  ComplexPoint z{0.0, 1.0};
  // Bai bound diagnostic.
  double bai_eta = 0.1;
  double c1 = 1.0;
  double c2 = 1.0;
  Thresholds thresholds;
  Execution exec = Execution::kParallel;
};

struct SummaryStats {
  double mean = 0.0;
  double median = 0.0;
  double upper_quartile = 0.0;
  double max = 0.0;
};

/// Linear interpolation quantiles of a sample (q in [0, 1]).
double quantile(std::vector<double> xs, double q);
SummaryStats summarize(const std::vector<double>& xs);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
};

/// Least-squares fit of log y against log x. Empty if fewer than two points
/// or any y <= 0.
std::optional<SlopeFit> fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// One-sided sign-test p-value: P(Bin(n, 1/2) >= successes).
double sign_test_pvalue(int successes, int n);

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "in"
  double threshold_hi = 0.0;
  bool pass = false;
};

/// Named per-N summary values, kept in insertion order.
struct PerN {
  int N = 0;
  std::vector<std::pair<std::string, double>> values;

  double get(const std::string& key) const;
};

struct ExperimentReport {
  std::string experiment;
  std::string note;
  nlohmann::ordered_json config;
  std::vector<PerN> per_N;
  std::vector<std::pair<std::string, SlopeFit>> slopes;
  std::vector<Check> checks;
  bool a1_violated = false;
  std::vector<std::string> raw_columns;
  std::vector<std::vector<double>> raw_rows;

  bool passed() const;
  const PerN& at(int N) const;
};

/// Eigenvalue counts in (E - eta, E + eta] for each centre.
struct WindowCountStat {
  std::vector<double> E_centers;
  double eta_window = 0.0;
  std::vector<int> counts;
  std::vector<double> normalized;  // counts / (2 N eta)
};

WindowCountStat window_counts(const std::vector<double>& sorted_eigenvalues,
                              const std::vector<double>& centers, double eta_window);

/// Support intervals of a density curve: maximal runs with rho > level.
std::vector<std::pair<double, double>> support_intervals(const DensityCurve& d,
                                                         double level = 1e-3);

/// KS distance between spectra of A + UBU* and the free convolution CDF.
ExperimentReport concentration_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                          const ExperimentConfig& cfg);

/// sup_E |N_eta(E) / (2 N eta) - rho(E)| away from support edges and atoms.
ExperimentReport local_law_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                      const ExperimentConfig& cfg);

/// Variance of m_H(z) and f_B(z) across draws, and its log-log slope in N.
ExperimentReport variance_scaling_experiment(const SpectralMeasure& muA,
                                             const SpectralMeasure& muB,
                                             const ExperimentConfig& cfg);

/// Monte Carlo estimate of the error term R_A of the finite-N system.
ExperimentReport error_term_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                       const ExperimentConfig& cfg);

/// pv_identity_gap over the N list.
ExperimentReport identity_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                     const ExperimentConfig& cfg);

}  // namespace fconv
