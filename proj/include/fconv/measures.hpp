#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fconv/error.hpp"

namespace fconv {

using cplx = std::complex<double>;

/// Point z = E + i*eta of the upper half-plane.
struct ComplexPoint {
  double E = 0.0;
  double eta = 1.0;

  cplx z() const { return {E, eta}; }
};

/// Discrete probability measure: strictly increasing atoms with positive
/// weights summing to one.
class SpectralMeasure {
 public:
  /// Atoms closer than this are merged into one.
  static constexpr double kMergeTolerance = 1e-12;

  SpectralMeasure() = default;

  /// Validates, sorts, merges duplicates and renormalizes the weights.
  SpectralMeasure(std::vector<double> atoms, std::vector<double> weights);

  static SpectralMeasure dirac(double a) { return SpectralMeasure({a}, {1.0}); }

  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }

  /// max |atom|; the operator-norm bound K of the matrix realizing the measure.
  double norm_bound() const;

  bool operator==(const SpectralMeasure&) const = default;

 private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
};

/// Empirical measure with weight 1/N per value.
SpectralMeasure from_eigenvalues(std::span<const double> values);

/// m(z) = sum_k w_k / (lambda_k - z).
cplx stieltjes(const SpectralMeasure& mu, ComplexPoint z);

/// Same sum evaluated at an arbitrary complex argument with Im w > 0.
cplx stieltjes_at(const SpectralMeasure& mu, cplx w);

/// m'(w) = sum_k w_k / (lambda_k - w)^2.
cplx stieltjes_derivative_at(const SpectralMeasure& mu, cplx w);

/// mu((-inf, x]).
double cdf(const SpectralMeasure& mu, double x);

/// sum_i w_i lambda_i^k, 0 <= k <= 4.
double moment(const SpectralMeasure& mu, int k);

double mean(const SpectralMeasure& mu);
double variance(const SpectralMeasure& mu);

SpectralMeasure shift(const SpectralMeasure& mu, double a);

}  // namespace fconv
