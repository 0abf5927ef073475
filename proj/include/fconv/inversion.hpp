#pragma once

#include <span>
#include <vector>

#include "fconv/measures.hpp"
#include "fconv/subordination.hpp"

namespace fconv {

/// Point mass of the free convolution.
struct Atom {
  double position = 0.0;
  double mass = 0.0;
};

/// Sampled density of mu_A boxplus mu_B. When the convolution has atoms,
/// rho is the raw smoothed density Im m / pi (atoms show up as Cauchy kernels
/// of width eta) and the atoms are listed separately.
struct DensityCurve {
  std::vector<double> E_grid;
  std::vector<double> rho;
  double eta_used = 0.0;
  bool extrapolated = false;
  double sup_density = 0.0;
  double max_clamp = 0.0;  // largest negative value clamped to zero
  std::vector<Atom> atoms;
  // Absolutely continuous part (atom kernels removed); equals rho without atoms.
  std::vector<double> rho_continuous;

  bool a1_violated() const { return !atoms.empty(); }
};

struct CdfCurve {
  std::vector<double> E_grid;
  std::vector<double> F;
  std::vector<double> F_continuous;  // F without the atom jumps
  std::vector<Atom> atoms;
  double sup_density = 0.0;

  /// F(x), linear between grid points, atoms as right-continuous jumps.
  double at(double x) const;
  /// F(x-).
  double left_limit(double x) const;
};

/// Samples of a Stieltjes transform along a horizontal line.
struct TransformSample {
  double E = 0.0;
  cplx m{0.0, 0.0};
};

/// Uniform grid of n points over [-(K_A+K_B)-1, K_A+K_B+1].
std::vector<double> default_grid(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                 int n = 601);

std::vector<double> uniform_grid(double lo, double hi, int n);

/// Atoms x_A + x_B with mass w_A + w_B - 1 > 0.
std::vector<Atom> free_convolution_atoms(const SpectralMeasure& muA,
                                         const SpectralMeasure& muB);

/// rho(E) = Im m(E + i eta) / pi, first-order Richardson in eta unless the
/// convolution has atoms.
DensityCurve density_curve(const SpectralMeasure& muA, const SpectralMeasure& muB,
                           std::span<const double> E_grid, double eta, const SolverConfig& cfg,
                           bool extrapolate = true, Execution exec = Execution::kParallel);

/// Cumulative trapezoid of the continuous part plus atom jumps. Throws
/// ValidationError("support not covered") if the mass is outside [0.95, 1.05].
CdfCurve cdf_curve(const DensityCurve& d);

/// sup_x |F_emp(x) - F(x)|, exact for a step function against F.
double ks_distance(const SpectralMeasure& empirical, const CdfCurve& F);

/// c1 * (int |m_H - m_free| dE + 16 T eta); both lines on the same E grid.
double bai_bound(std::span<const TransformSample> m_empirical,
                 std::span<const TransformSample> m_free, const CdfCurve& F, double eta,
                 double c1);

/// Moments of mu_A boxplus mu_B from the solver: trapezoid rule for
/// -(1/2pi) int z^{k+1} m(z) dtheta on a circle enclosing the support.
std::vector<double> free_convolution_moments(const SpectralMeasure& muA,
                                             const SpectralMeasure& muB, int max_order,
                                             const SolverConfig& cfg, int nodes = 256);

/// Trapezoid integral of rho over its grid.
double total_mass(const DensityCurve& d);

}  // namespace fconv
