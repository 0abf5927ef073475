#include "fconv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fconv/io.hpp"

namespace fconv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr const char* kTailNote =
    "Tail probabilities of order exp(-c N^2) are not estimated directly; this report "
    "tests the median/variance scaling in N implied by the concentration rates.";

void require_N_list(const ExperimentConfig& cfg) {
  if (cfg.N_list.empty()) throw ValidationError("empty N list");
  for (int n : cfg.N_list)
    if (n < 1) throw ValidationError("every N must be >= 1");
  if (cfg.replicates < 1) throw ValidationError("replicates must be >= 1");
}

std::uint64_t stream_id(std::size_t n_index, int replicate) {
  return substream(static_cast<std::uint32_t>(n_index), static_cast<std::uint32_t>(replicate));
}

/// Runs body(r) for every replicate and rethrows the lowest-index failure.
template <class Body>
void for_each_replicate(int replicates, Execution exec, Body&& body) {
  std::vector<std::string> errors(static_cast<std::size_t>(replicates));
  auto guarded = [&](int r) {
    try {
      body(r);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  };
  if (exec == Execution::kSerial) {
    for (int r = 0; r < replicates; ++r) guarded(r);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < replicates; ++r) guarded(r);
  }
  for (int r = 0; r < replicates; ++r) {
    const std::string& e = errors[static_cast<std::size_t>(r)];
    if (e.empty()) continue;
    const std::string msg = "replicate " + std::to_string(r) + ": " + e;
    // Preserve the error category for exit-code mapping.
    if (e.rfind("N incompatible", 0) == 0) throw ValidationError(msg);
    throw NumericalError(msg);
  }
}

nlohmann::ordered_json base_config(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                   const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["mu_a"] = measure_to_json(muA);
  j["mu_b"] = measure_to_json(muB);
  j["N"] = cfg.N_list;
  j["replicates"] = cfg.replicates;
  j["seed"] = cfg.seed;
  j["ensemble"] = cfg.ensemble == Ensemble::kUnitary ? "unitary" : "orthogonal";
  return j;
}

Check check_le(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, "<=", 0.0, std::isfinite(value) && value <= threshold};
}

Check check_ge(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, ">=", 0.0, std::isfinite(value) && value >= threshold};
}

Check check_in(std::string name, double value, double lo, double hi) {
  return {std::move(name), value, lo, "in", hi,
          std::isfinite(value) && value >= lo && value <= hi};
}

/// Mean and unbiased variance |x - mean|^2 of complex samples (Welford).
std::pair<cplx, double> complex_mean_var(const std::vector<cplx>& xs) {
  cplx mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const cplx d = xs[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += (std::conj(d) * (xs[i] - mean)).real();
  }
  const double var = xs.size() > 1 ? m2 / static_cast<double>(xs.size() - 1) : 0.0;
  return {mean, var};
}

struct FreeReference {
  SpectralMeasure muA;
  SpectralMeasure muB;
  CdfCurve cdf;
};

FreeReference free_reference(const SpectralMeasure& muA, const SpectralMeasure& muB, int N,
                             const ExperimentConfig& cfg) {
  FreeReference ref{realized_measure(muA, N, Multiplicity::kLargestRemainder),
                    realized_measure(muB, N, Multiplicity::kLargestRemainder), {}};
  const auto grid = default_grid(ref.muA, ref.muB, cfg.cdf_grid);
  ref.cdf = cdf_curve(density_curve(ref.muA, ref.muB, grid, cfg.cdf_eta, cfg.solver, true,
                                    cfg.exec));
  return ref;
}

DrawOptions draw_options(const ExperimentConfig& cfg) {
  return {cfg.ensemble, Multiplicity::kLargestRemainder, false};
}

}  // namespace

double PerN::get(const std::string& key) const {
  for (const auto& [k, v] : values)
    if (k == key) return v;
  throw std::out_of_range("no per-N value named " + key);
}

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const PerN& ExperimentReport::at(int N) const {
  for (const PerN& p : per_N)
    if (p.N == N) return p;
  throw std::out_of_range("no summary for N = " + std::to_string(N));
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return kNaN;
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

SummaryStats summarize(const std::vector<double>& xs) {
  SummaryStats s;
  if (xs.empty()) return {kNaN, kNaN, kNaN, kNaN};
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  s.median = quantile(xs, 0.5);
  s.upper_quartile = quantile(xs, 0.75);
  s.max = *std::max_element(xs.begin(), xs.end());
  return s;
}

std::optional<SlopeFit> fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i])) return std::nullopt;
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = ly[i] - f.intercept - f.slope * lx[i];
      sse += e * e;
    }
    f.stderr_ = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  } else {
    f.stderr_ = kNaN;
  }
  return f;
}

double sign_test_pvalue(int successes, int n) {
  // log-space binomial tail, P(X >= successes), X ~ Bin(n, 1/2)
  double p = 0.0;
  for (int k = successes; k <= n; ++k)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  n * std::log(2.0));
  return std::min(p, 1.0);
}

WindowCountStat window_counts(const std::vector<double>& sorted_eigenvalues,
                              const std::vector<double>& centers, double eta_window) {
  WindowCountStat w;
  w.E_centers = centers;
  w.eta_window = eta_window;
  const double n = static_cast<double>(sorted_eigenvalues.size());
  for (double E : centers) {
    const auto lo = std::upper_bound(sorted_eigenvalues.begin(), sorted_eigenvalues.end(),
                                     E - eta_window);
    const auto hi = std::upper_bound(sorted_eigenvalues.begin(), sorted_eigenvalues.end(),
                                     E + eta_window);
    const int c = static_cast<int>(hi - lo);
    w.counts.push_back(c);
    w.normalized.push_back(c / (2.0 * n * eta_window));
  }
  return w;
}

std::vector<std::pair<double, double>> support_intervals(const DensityCurve& d, double level) {
  std::vector<std::pair<double, double>> out;
  const auto& E = d.E_grid;
  bool inside = false;
  double start = 0.0;
  for (std::size_t i = 0; i < E.size(); ++i) {
    const bool on = d.rho[i] > level;
    if (on && !inside) start = i == 0 ? E[0] : 0.5 * (E[i - 1] + E[i]);
    if (!on && inside) out.emplace_back(start, 0.5 * (E[i - 1] + E[i]));
    inside = on;
  }
  if (inside) out.emplace_back(start, E.back());
  return out;
}

ExperimentReport concentration_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                          const ExperimentConfig& cfg) {
  require_N_list(cfg);
  ExperimentReport rep;
  rep.experiment = "concentration";
  rep.note = kTailNote;
  rep.config = base_config(muA, muB, cfg);
  rep.config["cdf_grid"] = cfg.cdf_grid;
  rep.config["cdf_eta"] = cfg.cdf_eta;
  rep.config["bai"] = {{"eta", cfg.bai_eta}, {"c1", cfg.c1}, {"c2", cfg.c2}};
  rep.raw_columns = {"N", "replicate", "ks", "bai_bound"};

  std::vector<std::vector<double>> ks_by_N;
  for (std::size_t ni = 0; ni < cfg.N_list.size(); ++ni) {
    const int N = cfg.N_list[ni];
    const FreeReference ref = free_reference(muA, muB, N, cfg);
    rep.a1_violated = rep.a1_violated || !ref.cdf.atoms.empty();

    // Bai diagnostic line on [-c2 K, c2 K].
    const double K = std::max(ref.muA.norm_bound(), ref.muB.norm_bound());
    const double half = std::max(cfg.c2 * K, 1e-3);
    const auto bai_grid = uniform_grid(-half, half, 201);
    const auto free_line = solve_line(ref.muA, ref.muB, bai_grid, cfg.bai_eta, cfg.solver, cfg.exec);
    std::vector<TransformSample> free_samples(bai_grid.size());
    for (std::size_t i = 0; i < bai_grid.size(); ++i) free_samples[i] = {bai_grid[i], free_line[i].m()};

    std::vector<double> ks(static_cast<std::size_t>(cfg.replicates));
    std::vector<double> bai(ks.size());
    for_each_replicate(cfg.replicates, cfg.exec, [&](int r) {
      const EnsembleDraw d = draw(muA, muB, N, cfg.seed, stream_id(ni, r), draw_options(cfg));
      const SpectralMeasure emp = from_eigenvalues(d.eigenvalues);
      ks[static_cast<std::size_t>(r)] = ks_distance(emp, ref.cdf);
      std::vector<TransformSample> emp_samples(bai_grid.size());
      for (std::size_t i = 0; i < bai_grid.size(); ++i)
        emp_samples[i] = {bai_grid[i], stieltjes(emp, {bai_grid[i], cfg.bai_eta})};
      bai[static_cast<std::size_t>(r)] = bai_bound(emp_samples, free_samples, ref.cdf, cfg.bai_eta, cfg.c1);
    });

    for (int r = 0; r < cfg.replicates; ++r)
      rep.raw_rows.push_back({double(N), double(r), ks[static_cast<std::size_t>(r)],
                              bai[static_cast<std::size_t>(r)]});
    const SummaryStats s = summarize(ks);
    rep.per_N.push_back({N,
                         {{"ks_median", s.median},
                          {"ks_upper_quartile", s.upper_quartile},
                          {"ks_max", s.max},
                          {"bai_bound_median", quantile(bai, 0.5)},
                          {"sup_density", ref.cdf.sup_density}}});
    ks_by_N.push_back(std::move(ks));
  }

  const PerN& first = rep.per_N.front();
  const PerN& last = rep.per_N.back();
  if (rep.per_N.size() > 1) {
    const double ratio = last.get("ks_median") / first.get("ks_median");
    rep.checks.push_back(check_le("median_ks_ratio_Nmax_over_Nmin", ratio,
                                  cfg.thresholds.concentration_decay_ratio));
    for (std::size_t i = 1; i < ks_by_N.size(); ++i) {
      int wins = 0;
      for (int r = 0; r < cfg.replicates; ++r)
        if (ks_by_N[i][static_cast<std::size_t>(r)] < ks_by_N[i - 1][static_cast<std::size_t>(r)]) ++wins;
      std::ostringstream name;
      name << "sign_test_pvalue_N" << cfg.N_list[i - 1] << "_to_N" << cfg.N_list[i];
      rep.checks.push_back(check_le(name.str(), sign_test_pvalue(wins, cfg.replicates),
                                    cfg.thresholds.sign_test_level));
    }
    std::vector<double> ns, meds;
    for (const PerN& p : rep.per_N) {
      ns.push_back(p.N);
      meds.push_back(p.get("ks_median"));
    }
    if (cfg.replicates >= 30)
      if (auto fit = fit_loglog(ns, meds)) rep.slopes.emplace_back("ks_median", *fit);
  }
  rep.checks.push_back(check_le("max_ks_at_Nmax", last.get("ks_max"),
                                cfg.thresholds.concentration_max_ks));
  return rep;
}

ExperimentReport local_law_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                      const ExperimentConfig& cfg) {
  require_N_list(cfg);
  if (!(cfg.eta_window > 0.05 && cfg.eta_window < 0.5))
    throw ValidationError("eta_window must lie in (0.05, 0.5)");
  if (!(cfg.E_hi > cfg.E_lo) || !(cfg.E_step > 0.0)) throw ValidationError("bad E range");

  ExperimentReport rep;
  rep.experiment = "local-law";
  rep.note = kTailNote;
  rep.config = base_config(muA, muB, cfg);
  rep.config["eta_window"] = cfg.eta_window;
  rep.config["E_range"] = {cfg.E_lo, cfg.E_hi, cfg.E_step};
  rep.config["density_eta"] = cfg.cdf_eta;
  rep.raw_columns = {"N", "replicate", "sup_stat", "windows_used"};

  const int n_centers = static_cast<int>(std::floor((cfg.E_hi - cfg.E_lo) / cfg.E_step + 1e-9)) + 1;
  std::vector<double> all_centers(static_cast<std::size_t>(n_centers));
  for (int i = 0; i < n_centers; ++i) all_centers[static_cast<std::size_t>(i)] = cfg.E_lo + i * cfg.E_step;

  for (std::size_t ni = 0; ni < cfg.N_list.size(); ++ni) {
    const int N = cfg.N_list[ni];
    const SpectralMeasure a = realized_measure(muA, N, Multiplicity::kLargestRemainder);
    const SpectralMeasure b = realized_measure(muB, N, Multiplicity::kLargestRemainder);

    const DensityCurve wide =
        density_curve(a, b, default_grid(a, b, 1201), 1e-3, cfg.solver, true, cfg.exec);
    rep.a1_violated = rep.a1_violated || wide.a1_violated();

    // Exclude centres near support edges and windows containing an atom.
    std::vector<double> edges;
    for (const auto& [lo, hi] : support_intervals(wide)) {
      edges.push_back(lo);
      edges.push_back(hi);
    }
    std::vector<double> centers;
    for (double E : all_centers) {
      bool keep = true;
      for (double e : edges) keep = keep && std::abs(E - e) > 2.0 * cfg.eta_window;
      for (const Atom& at : wide.atoms) keep = keep && std::abs(E - at.position) > cfg.eta_window;
      if (keep) centers.push_back(E);
    }

    std::vector<double> rho;
    if (!centers.empty()) {
      const DensityCurve dc = centers.size() >= 2
                                  ? density_curve(a, b, centers, cfg.cdf_eta, cfg.solver, true, cfg.exec)
                                  : density_curve(a, b, std::vector<double>{centers[0], centers[0] + 1e-3},
                                                  cfg.cdf_eta, cfg.solver, true, cfg.exec);
      rho.assign(dc.rho.begin(), dc.rho.begin() + static_cast<std::ptrdiff_t>(centers.size()));
    }

    std::vector<double> stat(static_cast<std::size_t>(cfg.replicates), kNaN);
    for_each_replicate(cfg.replicates, cfg.exec, [&](int r) {
      if (centers.empty()) return;
      const EnsembleDraw d = draw(muA, muB, N, cfg.seed, stream_id(ni, r), draw_options(cfg));
      const WindowCountStat w = window_counts(d.eigenvalues, centers, cfg.eta_window);
      double sup = 0.0;
      for (std::size_t i = 0; i < centers.size(); ++i)
        sup = std::max(sup, std::abs(w.normalized[i] - rho[i]));
      stat[static_cast<std::size_t>(r)] = sup;
    });

    int below = 0;
    for (int r = 0; r < cfg.replicates; ++r) {
      const double s = stat[static_cast<std::size_t>(r)];
      rep.raw_rows.push_back({double(N), double(r), s, double(centers.size())});
      if (s <= cfg.thresholds.local_law_stat) ++below;
    }
    const SummaryStats s = centers.empty() ? SummaryStats{kNaN, kNaN, kNaN, kNaN} : summarize(stat);
    rep.per_N.push_back({N,
                         {{"stat_median", s.median},
                          {"stat_upper_quartile", s.upper_quartile},
                          {"stat_max", s.max},
                          {"fraction_below_threshold",
                           centers.empty() ? kNaN : double(below) / cfg.replicates},
                          {"windows_used", double(centers.size())},
                          {"windows_excluded", double(all_centers.size() - centers.size())}}});
  }

  rep.checks.push_back(check_ge("fraction_below_threshold_at_Nmax",
                                rep.per_N.back().get("fraction_below_threshold"),
                                cfg.thresholds.local_law_fraction));
  if (rep.per_N.size() > 1) {
    bool decreasing = true;
    for (std::size_t i = 1; i < rep.per_N.size(); ++i)
      decreasing = decreasing &&
                   rep.per_N[i].get("stat_median") < rep.per_N[i - 1].get("stat_median");
    rep.checks.push_back({"medians_strictly_decreasing", decreasing ? 1.0 : 0.0, 1.0, ">=", 0.0,
                          decreasing});
    std::vector<double> ns, meds;
    for (const PerN& p : rep.per_N) {
      ns.push_back(p.N);
      meds.push_back(p.get("stat_median"));
    }
    if (cfg.replicates >= 30)
      if (auto fit = fit_loglog(ns, meds)) rep.slopes.emplace_back("stat_median", *fit);
  }
  return rep;
}

ExperimentReport variance_scaling_experiment(const SpectralMeasure& muA,
                                             const SpectralMeasure& muB,
                                             const ExperimentConfig& cfg) {
  require_N_list(cfg);
  if (cfg.z.eta < 0.5) throw ValidationError("variance experiment needs Im z >= 0.5");
  if (cfg.replicates < 30) throw ValidationError("slope fits need >= 30 replicates");

  ExperimentReport rep;
  rep.experiment = "variance";
  rep.note = kTailNote;
  rep.config = base_config(muA, muB, cfg);
  rep.config["z"] = {cfg.z.E, cfg.z.eta};
  rep.raw_columns = {"N", "replicate", "m_re", "m_im", "fB_re", "fB_im"};

  std::vector<double> ns, var_m, var_f;
  for (std::size_t ni = 0; ni < cfg.N_list.size(); ++ni) {
    const int N = cfg.N_list[ni];
    const auto a = realize_diagonal(muA, N, Multiplicity::kLargestRemainder);
    const auto b = realize_diagonal(muB, N, Multiplicity::kLargestRemainder);
    std::vector<cplx> m(static_cast<std::size_t>(cfg.replicates)), f(m.size());
    for_each_replicate(cfg.replicates, cfg.exec, [&](int r) {
      Philox rng(cfg.seed, stream_id(ni, r));
      const MatrixXc U = haar_matrix(N, cfg.ensemble, rng);
      const ResolventSnapshot s = resolvent_snapshot(a, conjugate_diagonal(U, b), cfg.z);
      m[static_cast<std::size_t>(r)] = s.m_H;
      f[static_cast<std::size_t>(r)] = s.f_B;
    });
    for (int r = 0; r < cfg.replicates; ++r) {
      const auto i = static_cast<std::size_t>(r);
      rep.raw_rows.push_back({double(N), double(r), m[i].real(), m[i].imag(), f[i].real(), f[i].imag()});
    }
    const auto [mm, vm] = complex_mean_var(m);
    const auto [mf, vf] = complex_mean_var(f);
    rep.per_N.push_back({N,
                         {{"mean_m_re", mm.real()},
                          {"mean_m_im", mm.imag()},
                          {"var_m", vm},
                          {"mean_fB_re", mf.real()},
                          {"mean_fB_im", mf.imag()},
                          {"var_fB", vf}}});
    ns.push_back(N);
    var_m.push_back(vm);
    var_f.push_back(vf);
  }

  const auto& t = cfg.thresholds;
  for (const auto& [name, ys] : {std::pair{std::string("var_m"), var_m}, std::pair{std::string("var_fB"), var_f}}) {
    std::optional<SlopeFit> fit;
    if (cfg.replicates >= 30) fit = fit_loglog(ns, ys);
    if (fit) rep.slopes.emplace_back(name, *fit);
    rep.checks.push_back(check_in("slope_" + name, fit ? fit->slope : kNaN, t.variance_slope_lo,
                                  t.variance_slope_hi));
  }
  return rep;
}

ExperimentReport error_term_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                       const ExperimentConfig& cfg) {
  require_N_list(cfg);
  if (cfg.replicates < 500) throw ValidationError("error-term experiment needs >= 500 replicates");
  const double K = muA.norm_bound() + muB.norm_bound();
  if (cfg.z.eta < 2.0 * K) throw ValidationError("error-term experiment needs Im z >= 2 (K_A + K_B)");

  ExperimentReport rep;
  rep.experiment = "error-term";
  rep.note =
      "R_A is estimated from Monte Carlo covariances of m_H, f_B and diag G_H; "
      "tail probabilities are not estimated.";
  rep.config = base_config(muA, muB, cfg);
  rep.config["z"] = {cfg.z.E, cfg.z.eta};
  rep.raw_columns = {"N", "replicate", "m_re", "m_im", "fB_re", "fB_im"};

  const cplx z = cfg.z.z();
  const int batches = 10;
  std::vector<double> ns, abs_RA;
  for (std::size_t ni = 0; ni < cfg.N_list.size(); ++ni) {
    const int N = cfg.N_list[ni];
    const auto a = realize_diagonal(muA, N, Multiplicity::kLargestRemainder);
    const auto b = realize_diagonal(muB, N, Multiplicity::kLargestRemainder);
    const auto R = static_cast<std::size_t>(cfg.replicates);
    std::vector<cplx> m(R), f(R);
    std::vector<VectorXc> diagG(R);
    for_each_replicate(cfg.replicates, cfg.exec, [&](int r) {
      Philox rng(cfg.seed, stream_id(ni, r));
      const MatrixXc U = haar_matrix(N, cfg.ensemble, rng);
      const ResolventSnapshot s = resolvent_snapshot(a, conjugate_diagonal(U, b), cfg.z, true);
      const auto i = static_cast<std::size_t>(r);
      m[i] = s.m_H;
      f[i] = s.f_B;
      diagG[i] = s.G_H->diagonal();
    });

    VectorXc gA(N);
    for (int i = 0; i < N; ++i) gA[i] = 1.0 / (a[static_cast<std::size_t>(i)] - z);

    // R_A from replicates [lo, hi), with unbiased covariances.
    auto estimate = [&](std::size_t lo, std::size_t hi) -> cplx {
      const double n = static_cast<double>(hi - lo);
      cplx em = 0.0, ef = 0.0;
      VectorXc eG = VectorXc::Zero(N);
      for (std::size_t r = lo; r < hi; ++r) {
        const double k = static_cast<double>(r - lo + 1);
        em += (m[r] - em) / k;
        ef += (f[r] - ef) / k;
        eG += (diagG[r] - eG) / k;
      }
      VectorXc cov_m = VectorXc::Zero(N), cov_f = VectorXc::Zero(N);
      for (std::size_t r = lo; r < hi; ++r) {
        const VectorXc dG = diagG[r] - eG;
        cov_m += (m[r] - em) * dG;
        cov_f += (f[r] - ef) * dG;
      }
      cov_m /= (n - 1.0);
      cov_f /= (n - 1.0);
      const cplx s = ef / em;
      cplx acc = 0.0;
      for (int i = 0; i < N; ++i) {
        const cplx mult = 1.0 + s * gA[i];
        if (std::abs(mult) < 0.5)
          throw NumericalError("multiplier 1 + (Ef_B/Em_H) G_A is near-singular: z is outside the safe region");
        acc += (cov_m[i] - gA[i] * cov_f[i]) / mult;
      }
      return acc / (em * static_cast<double>(N));
    };

    const cplx RA = estimate(0, R);
    std::vector<cplx> batch_RA;
    for (int bi = 0; bi < batches; ++bi)
      batch_RA.push_back(estimate(R * bi / batches, R * (bi + 1) / batches));
    const double batch_se = std::sqrt(complex_mean_var(batch_RA).second / batches);

    for (std::size_t r = 0; r < R; ++r)
      rep.raw_rows.push_back({double(N), double(r), m[r].real(), m[r].imag(), f[r].real(), f[r].imag()});
    rep.per_N.push_back({N,
                         {{"R_A_re", RA.real()},
                          {"R_A_im", RA.imag()},
                          {"abs_R_A", std::abs(RA)},
                          {"abs_R_A_batch_stderr", batch_se}}});
    ns.push_back(N);
    abs_RA.push_back(std::abs(RA));
  }

  const auto fit = fit_loglog(ns, abs_RA);
  if (fit) rep.slopes.emplace_back("abs_R_A", *fit);
  rep.checks.push_back(check_in("slope_abs_R_A", fit ? fit->slope : kNaN,
                                cfg.thresholds.error_slope_lo, cfg.thresholds.error_slope_hi));
  if (ns.size() > 1 && abs_RA.front() > 0.0) {
    const double eta2 = cfg.z.eta * cfg.z.eta;
    const double C = abs_RA.front() * ns.front() * eta2;
    for (std::size_t i = 1; i < ns.size(); ++i) {
      std::ostringstream name;
      name << "abs_R_A_below_C_over_N_eta2_at_N" << ns[i];
      rep.checks.push_back(check_le(name.str(), abs_RA[i], C / (ns[i] * eta2)));
    }
  }
  return rep;
}

ExperimentReport identity_experiment(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                     const ExperimentConfig& cfg) {
  require_N_list(cfg);
  ExperimentReport rep;
  rep.experiment = "identity";
  rep.note = "Monte Carlo check of E(m_H G_H) = E(m_H G_A - G_A f_B G_H); gap = ||mean difference||_F / N.";
  rep.config = base_config(muA, muB, cfg);
  rep.config["z"] = {cfg.z.E, cfg.z.eta};

  std::vector<double> ns, gaps;
  for (int N : cfg.N_list) {
    const IdentityGap g = pv_identity_gap(muA, muB, N, cfg.z, cfg.replicates, cfg.seed,
                                          cfg.ensemble, cfg.exec);
    rep.per_N.push_back({N, {{"gap", g.gap}, {"stderr", g.stderr_}, {"gap_over_stderr", g.gap / g.stderr_}}});
    ns.push_back(N);
    gaps.push_back(g.gap);
    if (cfg.ensemble == Ensemble::kUnitary) {
      std::ostringstream name;
      name << "gap_within_sigmas_at_N" << N;
      rep.checks.push_back(check_le(name.str(), g.gap / g.stderr_, cfg.thresholds.identity_sigmas));
    }
  }
  if (auto fit = fit_loglog(ns, gaps)) rep.slopes.emplace_back("gap", *fit);
  return rep;
}

}  // namespace fconv
