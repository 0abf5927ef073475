#include "fconv/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fconv {

SpectralMeasure::SpectralMeasure(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.empty()) throw ValidationError("empty spectrum");
  if (atoms.size() != weights.size())
    throw ValidationError("atoms and weights differ in length");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!std::isfinite(atoms[i]))
      throw ValidationError("non-finite atom at index " + std::to_string(i));
    if (!std::isfinite(weights[i]) || weights[i] <= 0.0)
      throw ValidationError("weight at index " + std::to_string(i) + " is not positive");
  }

  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });

  for (std::size_t idx : order) {
    if (!atoms_.empty() && atoms[idx] - atoms_.back() <= kMergeTolerance) {
      weights_.back() += weights[idx];
    } else {
      atoms_.push_back(atoms[idx]);
      weights_.push_back(weights[idx]);
    }
  }

  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6)
    throw ValidationError("weights sum to " + std::to_string(total) + ", expected 1");
  for (double& w : weights_) w /= total;
}

double SpectralMeasure::norm_bound() const {
  double k = 0.0;
  for (double a : atoms_) k = std::max(k, std::abs(a));
  return k;
}

SpectralMeasure from_eigenvalues(std::span<const double> values) {
  if (values.empty()) throw ValidationError("empty spectrum");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw ValidationError("non-finite eigenvalue");
  std::sort(sorted.begin(), sorted.end());

  // Count runs first so each weight is an exact count/N before the division.
  const double n = static_cast<double>(sorted.size());
  std::vector<double> atoms;
  std::vector<double> weights;
  std::size_t run = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] - atoms.back() > SpectralMeasure::kMergeTolerance) {
      weights.push_back(static_cast<double>(run) / n);
      run = 0;
    }
    if (run == 0) atoms.push_back(sorted[i]);
    ++run;
  }
  weights.push_back(static_cast<double>(run) / n);
  return SpectralMeasure(std::move(atoms), std::move(weights));
}

cplx stieltjes_at(const SpectralMeasure& mu, cplx w) {
  cplx m = 0.0;
  const auto& a = mu.atoms();
  const auto& p = mu.weights();
  for (std::size_t k = 0; k < a.size(); ++k) m += p[k] / (a[k] - w);
  return m;
}

cplx stieltjes_derivative_at(const SpectralMeasure& mu, cplx w) {
  cplx d = 0.0;
  const auto& a = mu.atoms();
  const auto& p = mu.weights();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const cplx r = 1.0 / (a[k] - w);
    d += p[k] * r * r;
  }
  return d;
}

cplx stieltjes(const SpectralMeasure& mu, ComplexPoint z) {
  if (!(z.eta > 0.0)) throw ValidationError("evaluation off the upper half-plane");
  return stieltjes_at(mu, z.z());
}

double cdf(const SpectralMeasure& mu, double x) {
  const auto& a = mu.atoms();
  const auto end = std::upper_bound(a.begin(), a.end(), x);
  const auto n = static_cast<std::size_t>(end - a.begin());
  if (n == a.size()) return 1.0;
  double f = 0.0;
  for (std::size_t k = 0; k < n; ++k) f += mu.weights()[k];
  return std::min(f, 1.0);
}

double moment(const SpectralMeasure& mu, int k) {
  if (k < 0 || k > 4) throw ValidationError("moment order must be in [0, 4]");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double p = 1.0;
    for (int j = 0; j < k; ++j) p *= mu.atoms()[i];
    s += mu.weights()[i] * p;
  }
  return s;
}

double mean(const SpectralMeasure& mu) { return moment(mu, 1); }

double variance(const SpectralMeasure& mu) {
  const double m = mean(mu);
  double v = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu.atoms()[i] - m;
    v += mu.weights()[i] * d * d;
  }
  return v;
}

SpectralMeasure shift(const SpectralMeasure& mu, double a) {
  std::vector<double> atoms = mu.atoms();
  for (double& x : atoms) x += a;
  return SpectralMeasure(std::move(atoms), mu.weights());
}

}  // namespace fconv
