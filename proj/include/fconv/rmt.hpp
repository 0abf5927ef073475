#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fconv/measures.hpp"
#include "fconv/rng.hpp"

namespace fconv {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

enum class Ensemble { kUnitary, kOrthogonal };

/// How atom weights become integer multiplicities for a given N.
enum class Multiplicity {
  kExact,            // every w_i * N must be an integer
  kLargestRemainder  // floor(w_i N) plus one extra copy for the largest remainders
};

/// Haar unitary: complex Ginibre, Householder QR, columns multiplied by the
/// phases of R's diagonal.
MatrixXc haar_unitary(int N, Philox& rng);

/// Haar orthogonal: real Ginibre, QR, sign correction. Returned as complex.
MatrixXc haar_orthogonal(int N, Philox& rng);

MatrixXc haar_matrix(int N, Ensemble ensemble, Philox& rng);

/// Multiplicities realizing mu at size N. Throws ValidationError
/// ("N incompatible with weights ...") naming the offending weight.
std::vector<int> multiplicities(const SpectralMeasure& mu, int N, Multiplicity policy);

/// Diagonal of the N x N matrix realizing mu, ascending.
std::vector<double> realize_diagonal(const SpectralMeasure& mu, int N, Multiplicity policy);

/// The measure actually realized at size N.
SpectralMeasure realized_measure(const SpectralMeasure& mu, int N, Multiplicity policy);

/// All eigenvalues of a Hermitian matrix, ascending, by cyclic complex
/// Jacobi sweeps. Serial reference solver.
std::vector<double> eig_hermitian_jacobi(const MatrixXc& H);

/// Same contract via Householder tridiagonalization and implicit QR.
std::vector<double> eig_hermitian(const MatrixXc& H);

/// U diag(b) U*.
MatrixXc conjugate_diagonal(const MatrixXc& U, const std::vector<double>& b);

struct EnsembleDraw {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> eigenvalues;
  std::optional<MatrixXc> U;
  std::optional<MatrixXc> H;
};

struct DrawOptions {
  Ensemble ensemble = Ensemble::kUnitary;
  Multiplicity policy = Multiplicity::kExact;
  bool keep_matrices = false;
};

/// One realization of H = A + U B U* with A, B diagonal.
EnsembleDraw draw(const SpectralMeasure& muA, const SpectralMeasure& muB, int N,
                  std::uint64_t seed, std::uint64_t stream = 0, const DrawOptions& opts = {});

struct ResolventSnapshot {
  ComplexPoint z;
  cplx m_H{0.0, 0.0};
  cplx f_A{0.0, 0.0};
  cplx f_B{0.0, 0.0};
  double identity_residual = 0.0;  // |z m_H + 1 - f_A - f_B|
  std::optional<MatrixXc> G_H;
};

/// m_H = Tr G_H / N, f_A = Tr(A G_H) / N, f_B = Tr(B_tilde G_H) / N with
/// G_H = (A + B_tilde - z)^{-1}.
ResolventSnapshot resolvent_snapshot(const std::vector<double>& a_diag, const MatrixXc& B_tilde,
                                     ComplexPoint z, bool keep_resolvent = false);

struct IdentityGap {
  double gap = 0.0;
  double stderr_ = 0.0;  // NaN when fewer than two batches exist
  int replicates = 0;
  int batches = 0;
};

/// Monte Carlo check of E(m_H G_H) = E(m_H G_A - G_A f_B G_H):
/// gap = ||mean difference||_F / N with a batch-means standard error.
IdentityGap pv_identity_gap(const SpectralMeasure& muA, const SpectralMeasure& muB, int N,
                            ComplexPoint z, int replicates, std::uint64_t seed,
                            Ensemble ensemble = Ensemble::kUnitary,
                            Execution exec = Execution::kParallel);

}  // namespace fconv
