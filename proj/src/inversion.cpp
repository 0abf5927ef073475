#include "fconv/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fconv {

namespace {

constexpr double kPi = std::numbers::pi;

double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

std::vector<double> imag_over_pi(const std::vector<SubordinationTriple>& ts) {
  std::vector<double> rho(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) rho[i] = ts[i].x1.imag() / kPi;
  return rho;
}

}  // namespace

std::vector<double> uniform_grid(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw ValidationError("grid needs n >= 2 and hi > lo");
  std::vector<double> g(static_cast<std::size_t>(n));
  const double h = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + h * i;
  g.back() = hi;
  return g;
}

std::vector<double> default_grid(const SpectralMeasure& muA, const SpectralMeasure& muB, int n) {
  const double k = muA.norm_bound() + muB.norm_bound() + 1.0;
  return uniform_grid(-k, k, n);
}

std::vector<Atom> free_convolution_atoms(const SpectralMeasure& muA,
                                         const SpectralMeasure& muB) {
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < muA.size(); ++i)
    for (std::size_t j = 0; j < muB.size(); ++j) {
      const double mass = muA.weights()[i] + muB.weights()[j] - 1.0;
      if (mass > 1e-12) atoms.push_back({muA.atoms()[i] + muB.atoms()[j], mass});
    }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.position < b.position; });
  return atoms;
}

DensityCurve density_curve(const SpectralMeasure& muA, const SpectralMeasure& muB,
                           std::span<const double> E_grid, double eta, const SolverConfig& cfg,
                           bool extrapolate, Execution exec) {
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  if (E_grid.size() < 2) throw ValidationError("density grid needs at least two points");

  DensityCurve d;
  d.E_grid.assign(E_grid.begin(), E_grid.end());
  d.eta_used = eta;
  d.atoms = free_convolution_atoms(muA, muB);

  const std::vector<double> rho_eta = imag_over_pi(solve_line(muA, muB, E_grid, eta, cfg, exec));

  if (d.a1_violated()) {
    d.rho = rho_eta;
    d.rho_continuous = rho_eta;
    for (std::size_t i = 0; i < E_grid.size(); ++i)
      for (const Atom& a : d.atoms) {
        const double dx = E_grid[i] - a.position;
        d.rho_continuous[i] -= a.mass * eta / (kPi * (dx * dx + eta * eta));
      }
    for (double& r : d.rho_continuous) r = std::max(r, 0.0);
  } else if (extrapolate) {
    const std::vector<double> rho_half =
        imag_over_pi(solve_line(muA, muB, E_grid, 0.5 * eta, cfg, exec));
    d.extrapolated = true;
    d.rho.resize(E_grid.size());
    for (std::size_t i = 0; i < E_grid.size(); ++i) d.rho[i] = 2.0 * rho_half[i] - rho_eta[i];
  } else {
    d.rho = rho_eta;
  }

  for (double& r : d.rho) {
    if (r < 0.0) {
      d.max_clamp = std::max(d.max_clamp, -r);
      r = 0.0;
    }
  }
  if (!d.a1_violated()) d.rho_continuous = d.rho;
  d.sup_density = *std::max_element(d.rho.begin(), d.rho.end());
  return d;
}

double total_mass(const DensityCurve& d) {
  double s = 0.0;
  for (std::size_t i = 1; i < d.E_grid.size(); ++i)
    s += 0.5 * (d.rho[i] + d.rho[i - 1]) * (d.E_grid[i] - d.E_grid[i - 1]);
  return s;
}

CdfCurve cdf_curve(const DensityCurve& d) {
  const std::size_t n = d.E_grid.size();
  CdfCurve c;
  c.E_grid = d.E_grid;
  c.atoms = d.atoms;
  c.sup_density = d.sup_density;

  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    cum[i] = cum[i - 1] + 0.5 * (d.rho_continuous[i] + d.rho_continuous[i - 1]) *
                              (d.E_grid[i] - d.E_grid[i - 1]);

  double atom_mass = 0.0;
  for (const Atom& a : d.atoms) atom_mass += a.mass;
  const double total = cum.back() + atom_mass;
  if (total < 0.95 || total > 1.05) throw ValidationError("support not covered");

  const double continuous_mass = std::max(1.0 - atom_mass, 0.0);
  const double scale = (cum.back() > 0.0 && continuous_mass > 1e-12)
                           ? continuous_mass / cum.back()
                           : 0.0;
  c.F_continuous.resize(n);
  c.F.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.F_continuous[i] = std::clamp(cum[i] * scale, 0.0, 1.0);
    double jumps = 0.0;
    for (const Atom& a : d.atoms)
      if (a.position <= d.E_grid[i]) jumps += a.mass;
    c.F[i] = std::clamp(c.F_continuous[i] + jumps, 0.0, 1.0);
  }
  return c;
}

double CdfCurve::at(double x) const {
  double f = interpolate(E_grid, F_continuous, x);
  for (const Atom& a : atoms)
    if (a.position <= x) f += a.mass;
  return std::clamp(f, 0.0, 1.0);
}

double CdfCurve::left_limit(double x) const {
  double f = interpolate(E_grid, F_continuous, x);
  for (const Atom& a : atoms)
    if (a.position < x) f += a.mass;
  return std::clamp(f, 0.0, 1.0);
}

double ks_distance(const SpectralMeasure& empirical, const CdfCurve& F) {
  const auto& x = empirical.atoms();
  if (x.front() < F.E_grid.front() || x.back() > F.E_grid.back())
    throw ValidationError("CDF grid does not cover the empirical support");
  double below = 0.0;
  double dist = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double above = below + empirical.weights()[i];
    dist = std::max(dist, std::abs(F.left_limit(x[i]) - below));
    dist = std::max(dist, std::abs(F.at(x[i]) - std::min(above, 1.0)));
    below = above;
  }
  return dist;
}

double bai_bound(std::span<const TransformSample> m_empirical,
                 std::span<const TransformSample> m_free, const CdfCurve& F, double eta,
                 double c1) {
  if (m_empirical.size() != m_free.size())
    throw ValidationError("transform lines must share one grid");
  double integral = 0.0;
  for (std::size_t i = 1; i < m_empirical.size(); ++i) {
    const double h = m_empirical[i].E - m_empirical[i - 1].E;
    integral += 0.5 * h *
                (std::abs(m_empirical[i].m - m_free[i].m) +
                 std::abs(m_empirical[i - 1].m - m_free[i - 1].m));
  }
  return c1 * (integral + 16.0 * F.sup_density * eta);
}

std::vector<double> free_convolution_moments(const SpectralMeasure& muA,
                                             const SpectralMeasure& muB, int max_order,
                                             const SolverConfig& cfg, int nodes) {
  if (max_order < 0) throw ValidationError("moment order must be >= 0");
  if (nodes < 8) throw ValidationError("contour needs at least 8 nodes");
  const double radius = 2.0 * (muA.norm_bound() + muB.norm_bound()) + 1.0;

  // Upper half of a full circle of 2*nodes points; the lower half follows
  // from m(conj z) = conj m(z).
  std::vector<cplx> zs(static_cast<std::size_t>(nodes));
  std::vector<cplx> ms(zs.size());
  for (int j = 0; j < nodes; ++j) {
    const double theta = kPi * (j + 0.5) / nodes;
    zs[static_cast<std::size_t>(j)] = std::polar(radius, theta);
  }
  for (std::size_t j = 0; j < zs.size(); ++j)
    ms[j] = solve_point(muA, muB, zs[j].real(), zs[j].imag(), cfg).m();

  std::vector<double> moments(static_cast<std::size_t>(max_order) + 1, 0.0);
  for (int k = 0; k <= max_order; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < zs.size(); ++j) s += (std::pow(zs[j], k + 1) * ms[j]).real();
    moments[static_cast<std::size_t>(k)] = -s / nodes;
  }
  return moments;
}

}  // namespace fconv
