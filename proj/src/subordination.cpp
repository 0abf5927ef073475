#include "fconv/subordination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

namespace fconv {

namespace {

double norm_inf(const Vec3c& v) {
  return std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
}

std::string describe(ComplexPoint z) {
  std::ostringstream os;
  os.precision(17);
  os << "z = " << z.E << " + " << z.eta << "i";
  return os.str();
}

struct Shifted {
  cplx wA;  // argument of m_A: z - S_B
  cplx wB;  // argument of m_B: z - S_A
};

Shifted shifted_arguments(const SubordinationTriple& t) {
  if (t.x1 == cplx(0.0, 0.0)) throw DomainError("subordination argument left C+ (x1 = 0)");
  const cplx z = t.z.z();
  Shifted s{z - t.x3 / t.x1, z - t.x2 / t.x1};
  if (!(s.wA.imag() > 0.0) || !(s.wB.imag() > 0.0))
    throw DomainError("subordination argument left C+");
  return s;
}

SubordinationTriple with_x(const SubordinationTriple& base, const Vec3c& x) {
  SubordinationTriple t = base;
  t.x1 = x[0];
  t.x2 = x[1];
  t.x3 = x[2];
  return t;
}

Vec3c as_vector(const SubordinationTriple& t) { return {t.x1, t.x2, t.x3}; }

std::optional<double> try_residual_norm(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                        const SubordinationTriple& t) {
  try {
    return norm_inf(residual(muA, muB, t));
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (!(newton_tol > 0.0)) throw ValidationError("newton_tol must be positive");
  if (!(continuation_shrink > 0.0 && continuation_shrink < 1.0))
    throw ValidationError("continuation_shrink must lie in (0, 1)");
  if (max_newton_iters < 1) throw ValidationError("max_newton_iters must be >= 1");
  if (damping < 0) throw ValidationError("damping must be >= 0");
  if (!(eta_top_factor > 0.0)) throw ValidationError("eta_top_factor must be positive");
  if (!(min_step_shrink > 0.0 && min_step_shrink <= 1.0))
    throw ValidationError("min_step_shrink must lie in (0, 1]");
  if (kappa < 0.0) throw ValidationError("kappa must be >= 0");
}

Vec3c residual(const SpectralMeasure& muA, const SpectralMeasure& muB,
               const SubordinationTriple& t) {
  const Shifted s = shifted_arguments(t);
  const cplx z = t.z.z();
  return {t.x1 - stieltjes_at(muA, s.wA), t.x1 - stieltjes_at(muB, s.wB),
          z * t.x1 - t.x2 - t.x3 + 1.0};
}

Mat3c jacobian(const SpectralMeasure& muA, const SpectralMeasure& muB,
               const SubordinationTriple& t) {
  const Shifted s = shifted_arguments(t);
  const cplx dA = stieltjes_derivative_at(muA, s.wA);
  const cplx dB = stieltjes_derivative_at(muB, s.wB);
  const cplx x1 = t.x1;
  Mat3c J;
  J << 1.0 - dA * t.x3 / (x1 * x1), 0.0, dA / x1,
       1.0 - dB * t.x2 / (x1 * x1), dB / x1, 0.0,
       t.z.z(), -1.0, -1.0;
  return J;
}

SubordinationTriple initial_guess(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                  ComplexPoint z) {
  const cplx inv = 1.0 / z.z();
  SubordinationTriple t;
  t.z = z;
  t.x1 = -inv;
  t.x2 = -mean(muA) * inv;
  t.x3 = -mean(muB) * inv;
  return t;
}

bool satisfies_sign_invariants(const SubordinationTriple& t, double slack) {
  return t.x1.imag() > 0.0 && t.S_A().imag() <= slack && t.S_B().imag() <= slack;
}

bool within_subordination_bounds(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                 const SubordinationTriple& t) {
  auto ok = [&](const SpectralMeasure& mu, cplx S) {
    const double bound = variance(mu) / t.z.eta;
    return std::abs(S - mean(mu)) <= bound * (1.0 + 1e-8) + 1e-9 * (1.0 + mu.norm_bound());
  };
  return ok(muA, t.S_A()) && ok(muB, t.S_B());
}

SubordinationTriple newton_solve_at(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                    ComplexPoint z, const SubordinationTriple& x_init,
                                    const SolverConfig& cfg) {
  if (!(z.eta > 0.0)) throw ValidationError("evaluation off the upper half-plane");
  if (!(x_init.x1.imag() > 0.0)) throw ValidationError("initial iterate needs Im x1 > 0");

  SubordinationTriple t = x_init;
  t.z = z;
  t.iterations = 0;
  double r = norm_inf(residual(muA, muB, t));

  auto newton_direction = [&](const SubordinationTriple& at) -> Vec3c {
    const Eigen::PartialPivLU<Mat3c> lu(jacobian(muA, muB, at));
    const Vec3c dx = lu.solve(residual(muA, muB, at));
    if (!dx.allFinite()) throw NumericalError("Jacobian singular at " + describe(z));
    return dx;
  };

  // The attainable residual is bounded below by rounding in its largest term,
  // including argument rounding amplified by m' near a pole.
  auto tolerance = [&](const SubordinationTriple& at) {
    const cplx wA = z.z() - at.x3 / at.x1;
    const cplx wB = z.z() - at.x2 / at.x1;
    const double scale = std::max({1.0, std::abs(at.x1), std::abs(at.x2), std::abs(at.x3),
                                   std::abs(z.z() * at.x1),
                                   std::abs(stieltjes_derivative_at(muA, wA)) * std::abs(wA),
                                   std::abs(stieltjes_derivative_at(muB, wB)) * std::abs(wB)});
    return std::max(cfg.newton_tol, 64.0 * std::numeric_limits<double>::epsilon() * scale);
  };

  while (r > tolerance(t)) {
    if (t.iterations >= cfg.max_newton_iters) {
      std::ostringstream os;
      os << "Newton did not converge at " << describe(z) << "; last residual " << r;
      throw NumericalError(os.str());
    }
    const Vec3c dx = newton_direction(t);
    const Vec3c x = as_vector(t);
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.damping; ++h, lambda *= 0.5) {
      const SubordinationTriple cand = with_x(t, x - lambda * dx);
      const auto rc = try_residual_norm(muA, muB, cand);
      if (rc && *rc <= r) {
        t = cand;
        r = *rc;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "step damping exhausted at " << describe(z) << "; last residual " << r;
      throw NumericalError(os.str());
    }
    ++t.iterations;
  }

  // One undamped polishing step once inside the tolerance; it is kept only if
  // it does not make the residual worse.
  if (t.iterations > 0 && r > 0.0) {
    const SubordinationTriple cand = with_x(t, as_vector(t) - newton_direction(t));
    const auto rc = try_residual_norm(muA, muB, cand);
    if (rc && *rc <= r) {
      t = cand;
      r = *rc;
    }
  }

  t.residual_norm = r;
  if (!satisfies_sign_invariants(t, cfg.sign_slack) || !within_subordination_bounds(muA, muB, t))
    throw NumericalError("spurious branch at " + describe(z));
  return t;
}

double continuation_top(const SpectralMeasure& muA, const SpectralMeasure& muB,
                        const SolverConfig& cfg) {
  double k = muA.norm_bound() + muB.norm_bound();
  if (k == 0.0) k = 1.0;
  return cfg.eta_top_factor * k;
}

SubordinationTriple solve_point(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                double E, double eta_target, const SolverConfig& cfg) {
  if (!(eta_target > 0.0)) throw ValidationError("eta_target must be positive");
  const double eta_top = continuation_top(muA, muB, cfg);
  if (eta_target >= eta_top) {
    const ComplexPoint z{E, eta_target};
    return newton_solve_at(muA, muB, z, initial_guess(muA, muB, z), cfg);
  }

  ComplexPoint z{E, eta_top};
  SubordinationTriple t = newton_solve_at(muA, muB, z, initial_guess(muA, muB, z), cfg);
  double eta = eta_top;
  while (eta > eta_target) {
    const double target = std::max(eta * cfg.continuation_shrink, eta_target);
    const double step = eta - target;
    double frac = 1.0;
    for (;;) {
      const double next = frac == 1.0 ? target : eta - frac * step;
      try {
        t = newton_solve_at(muA, muB, {E, next}, t, cfg);
        eta = next;
        break;
      } catch (const NumericalError& err) {
        frac *= 0.5;
        if (frac < cfg.min_step_shrink) {
          std::ostringstream os;
          os.precision(17);
          os << "continuation failed at E = " << E << ", eta = " << next << ": " << err.what();
          throw NumericalError(os.str());
        }
      }
    }
  }
  return t;
}

std::vector<SubordinationTriple> solve_line(const SpectralMeasure& muA,
                                            const SpectralMeasure& muB,
                                            std::span<const double> E_grid, double eta_target,
                                            const SolverConfig& cfg, Execution exec) {
  cfg.validate();
  const auto n = static_cast<std::ptrdiff_t>(E_grid.size());
  std::vector<SubordinationTriple> out(E_grid.size());
  std::vector<std::string> errors(E_grid.size());

  if (exec == Execution::kSerial) {
    for (std::ptrdiff_t i = 0; i < n; ++i)
      out[i] = solve_point(muA, muB, E_grid[i], eta_target, cfg);
    return out;
  }

#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = solve_point(muA, muB, E_grid[i], eta_target, cfg);
    } catch (const std::exception& err) {
      errors[i] = err.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError(e);
  return out;
}

KantorovichDiagnostic kantorovich_check(const SpectralMeasure& muA, const SpectralMeasure& muB,
                                        const SubordinationTriple& t) {
  const Mat3c J = jacobian(muA, muB, t);
  const Eigen::FullPivLU<Mat3c> lu(J);
  if (!lu.isInvertible()) throw NumericalError("Jacobian singular at " + describe(t.z));
  const Mat3c gamma = lu.inverse();
  if (!gamma.allFinite()) throw NumericalError("Jacobian singular at " + describe(t.z));

  KantorovichDiagnostic d;
  d.C0 = gamma.cwiseAbs().rowwise().sum().maxCoeff();
  d.delta0 = norm_inf(gamma * residual(muA, muB, t));

  // Second differences of P along fixed directions, sampled at the centre
  // and on the ball ||x - t|| <= |z|^{-1} / 2.
  const cplx I(0.0, 1.0);
  const std::array<Vec3c, 9> dirs = {
      Vec3c(1, 0, 0), Vec3c(0, 1, 0), Vec3c(0, 0, 1),
      Vec3c(I, 0, 0), Vec3c(0, I, 0), Vec3c(0, 0, I),
      Vec3c(1, 1, 1), Vec3c(1, -1, 0), Vec3c(I, 1, -I)};
  const double zabs = std::abs(t.z.z());
  const double radius = 0.5 / zabs;
  const double h = 1e-4 * zabs;
  const Vec3c x0 = as_vector(t);

  std::vector<Vec3c> centres{x0};
  for (const auto& d0 : dirs) centres.push_back(x0 + radius * d0 / norm_inf(d0));

  double M = 0.0;
  for (const auto& c : centres) {
    for (const auto& d0 : dirs) {
      const Vec3c u = d0 / norm_inf(d0);
      try {
        const Vec3c p0 = residual(muA, muB, with_x(t, c));
        const Vec3c pp = residual(muA, muB, with_x(t, c + h * u));
        const Vec3c pm = residual(muA, muB, with_x(t, c - h * u));
        M = std::max(M, norm_inf(pp - 2.0 * p0 + pm) / (h * h));
      } catch (const DomainError&) {
        // sample outside the domain of P; skip it
      }
    }
  }
  d.M = M;
  d.h0 = d.C0 * d.delta0 * d.M;
  d.satisfied = d.h0 <= 0.5;
  return d;
}

}  // namespace fconv
