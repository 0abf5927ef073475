#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fconv/measures.hpp"

namespace fconv {

/// Unknowns of the subordination system at one point z:
/// x1 = m, x2 = S_A * m, x3 = S_B * m.
struct SubordinationTriple {
  ComplexPoint z;
  cplx x1{0.0, 0.0};
  cplx x2{0.0, 0.0};
  cplx x3{0.0, 0.0};
  int iterations = 0;
  double residual_norm = 0.0;

  cplx m() const { return x1; }
  cplx S_A() const { return x2 / x1; }
  cplx S_B() const { return x3 / x1; }
};

struct SolverConfig {
  double newton_tol = 1e-12;
  int max_newton_iters = 50;
  int damping = 20;
  double eta_top_factor = 8.0;
  double continuation_shrink = 0.7;
  double min_step_shrink = 1.0 / 64.0;
  double kappa = 0.0;
  // Allowed positive drift of Im S_A, Im S_B. Point masses give exactly real
  // subordination functions, so the strict inequality only holds up to rounding.
  double sign_slack = 1e-10;

  void validate() const;
};

struct KantorovichDiagnostic {
  double C0 = 0.0;
  double delta0 = 0.0;
  double M = 0.0;
  double h0 = 0.0;
  bool satisfied = false;
};

using Vec3c = Eigen::Vector3cd;
using Mat3c = Eigen::Matrix3cd;

/// P(x) of the limiting system (no finite-N error terms).
/// Throws DomainError when z - x3/x1 or z - x2/x1 leaves C+.
Vec3c residual(const SpectralMeasure& muA, const SpectralMeasure& muB,
               const SubordinationTriple& t);

/// Analytic derivative P'(x); third row is (z, -1, -1).
Mat3c jacobian(const SpectralMeasure& muA, const SpectralMeasure& muB,
               const SubordinationTriple& t);

/// Leading asymptotics at large |z|: m ~ -1/z, S_A ~ mean(mu_A), S_B ~ mean(mu_B).
SubordinationTriple initial_guess(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                  ComplexPoint z);

/// Damped Newton iteration from x_init at the point z.
SubordinationTriple newton_solve_at(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                    ComplexPoint z, const SubordinationTriple& x_init,
                                    const SolverConfig& cfg);

/// Continuation from eta_top down to eta_target for a single E.
SubordinationTriple solve_point(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                double E, double eta_target, const SolverConfig& cfg);

/// solve_point over every E of the grid; grid points are independent.
std::vector<SubordinationTriple> solve_line(const SpectralMeasure& muA,
                                            const SpectralMeasure& muB,
                                            std::span<const double> E_grid, double eta_target,
                                            const SolverConfig& cfg,
                                            Execution exec = Execution::kParallel);

/// Newton-Kantorovich constants at t. Throws NumericalError if P'(t) is singular.
KantorovichDiagnostic kantorovich_check(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                        const SubordinationTriple& t);

/// True if Im m > 0 and Im S_A, Im S_B <= slack.
bool satisfies_sign_invariants(const SubordinationTriple& t, double slack);

/// True if |S_A - mean(A)| <= var(A)/eta and likewise for B, the bound every
/// subordination function obeys. Rejects solutions escaping to infinity.
bool within_subordination_bounds(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                 const SubordinationTriple& t);

/// Height at which continuation starts for this pair.
double continuation_top(const SpectralMeasure& muA, const SpectralMeasure& muB,
                        const SolverConfig& cfg);

}  // namespace fconv
