#include "fconv/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fconv {

MatrixXc haar_unitary(int N, Philox& rng) {
  if (N < 1) throw ValidationError("matrix dimension must be >= 1");
  const double s = std::sqrt(0.5);
  MatrixXc Z(N, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      Z(i, j) = cplx(s * re, s * im);
    }
  const Eigen::HouseholderQR<MatrixXc> qr(Z);
  MatrixXc Q = qr.householderQ() * MatrixXc::Identity(N, N);
  for (int j = 0; j < N; ++j) {
    const cplx r = qr.matrixQR()(j, j);
    const double a = std::abs(r);
    if (a > 0.0) Q.col(j) *= r / a;
  }
  return Q;
}

MatrixXc haar_orthogonal(int N, Philox& rng) {
  if (N < 1) throw ValidationError("matrix dimension must be >= 1");
  Eigen::MatrixXd Z(N, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) Z(i, j) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, N);
  for (int j = 0; j < N; ++j)
    if (qr.matrixQR()(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q.cast<cplx>();
}

MatrixXc haar_matrix(int N, Ensemble ensemble, Philox& rng) {
  return ensemble == Ensemble::kUnitary ? haar_unitary(N, rng) : haar_orthogonal(N, rng);
}

std::vector<int> multiplicities(const SpectralMeasure& mu, int N, Multiplicity policy) {
  if (N < 1) throw ValidationError("N must be >= 1");
  const auto& w = mu.weights();
  std::vector<int> counts(w.size());

  auto fail = [&](std::size_t i, const std::string& why) {
    std::ostringstream os;
    os.precision(17);
    os << "N incompatible with weights: weight " << w[i] << " of atom " << mu.atoms()[i]
       << " " << why << " at N = " << N;
    throw ValidationError(os.str());
  };

  if (policy == Multiplicity::kExact) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double c = w[i] * N;
      const double k = std::round(c);
      if (std::abs(c - k) > 1e-9 * std::max(1.0, c) || k < 1.0)
        fail(i, "is not a multiple of 1/N");
      counts[i] = static_cast<int>(k);
    }
    if (std::accumulate(counts.begin(), counts.end(), 0) != N)
      throw ValidationError("N incompatible with weights: multiplicities do not sum to N");
    return counts;
  }

  std::vector<double> rem(w.size());
  int assigned = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double c = w[i] * N;
    counts[i] = static_cast<int>(std::floor(c + 1e-9));
    rem[i] = c - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < N && k < order.size(); ++k, ++assigned) ++counts[order[k]];
  for (std::size_t i = 0; i < w.size(); ++i)
    if (counts[i] == 0) fail(i, "receives no copies");
  return counts;
}

std::vector<double> realize_diagonal(const SpectralMeasure& mu, int N, Multiplicity policy) {
  const std::vector<int> counts = multiplicities(mu, N, policy);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(N));
  for (std::size_t i = 0; i < counts.size(); ++i) d.insert(d.end(), counts[i], mu.atoms()[i]);
  return d;
}

SpectralMeasure realized_measure(const SpectralMeasure& mu, int N, Multiplicity policy) {
  const std::vector<double> d = realize_diagonal(mu, N, policy);
  return from_eigenvalues(d);
}

std::vector<double> eig_hermitian_jacobi(const MatrixXc& H) {
  const Eigen::Index n = H.rows();
  if (n != H.cols()) throw ValidationError("matrix is not square");
  MatrixXc a = 0.5 * (H + H.adjoint());
  const double scale = a.norm();
  constexpr int kMaxSweeps = 60;

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_norm() > 1e-13 * scale) {
    if (++sweep > kMaxSweeps) throw NumericalError("Jacobi eigensolver did not converge");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = std::abs(a(p, q));
        if (apq == 0.0) continue;
        const cplx phase = a(p, q) / apq;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // V = diag(1, conj(phase)) * [[c, s], [-s, c]]; a <- V* a V.
        const cplx v00 = c, v01 = s;
        const cplx v10 = -s * std::conj(phase), v11 = c * std::conj(phase);
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * v00 + akq * v10;
          a(k, q) = akp * v01 + akq * v11;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(v00) * apk + std::conj(v10) * aqk;
          a(q, k) = std::conj(v01) * apk + std::conj(v11) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i).real();
  std::sort(ev.begin(), ev.end());
  return ev;
}

std::vector<double> eig_hermitian(const MatrixXc& H) {
  if (H.rows() != H.cols()) throw ValidationError("matrix is not square");
  const Eigen::SelfAdjointEigenSolver<MatrixXc> es(H, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver did not converge");
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + H.rows());
  std::sort(ev.begin(), ev.end());
  return ev;
}

MatrixXc conjugate_diagonal(const MatrixXc& U, const std::vector<double>& b) {
  const Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
  MatrixXc out = (U * bv.cast<cplx>().asDiagonal()) * U.adjoint();
  return 0.5 * (out + out.adjoint());
}

EnsembleDraw draw(const SpectralMeasure& muA, const SpectralMeasure& muB, int N,
                  std::uint64_t seed, std::uint64_t stream, const DrawOptions& opts) {
  const std::vector<double> a = realize_diagonal(muA, N, opts.policy);
  const std::vector<double> b = realize_diagonal(muB, N, opts.policy);
  Philox rng(seed, stream);
  MatrixXc U = haar_matrix(N, opts.ensemble, rng);
  MatrixXc H = conjugate_diagonal(U, b);
  for (int i = 0; i < N; ++i) H(i, i) += a[static_cast<std::size_t>(i)];

  EnsembleDraw d;
  d.seed = seed;
  d.stream = stream;
  d.eigenvalues = eig_hermitian(H);
  if (opts.keep_matrices) {
    d.U = std::move(U);
    d.H = std::move(H);
  }
  return d;
}

ResolventSnapshot resolvent_snapshot(const std::vector<double>& a_diag, const MatrixXc& B_tilde,
                                     ComplexPoint z, bool keep_resolvent) {
  if (!(z.eta > 0.0)) throw ValidationError("evaluation off the upper half-plane");
  const auto n = static_cast<Eigen::Index>(a_diag.size());
  if (B_tilde.rows() != n || B_tilde.cols() != n)
    throw ValidationError("A and B_tilde dimensions differ");

  MatrixXc M = B_tilde;
  for (Eigen::Index i = 0; i < n; ++i) M(i, i) += a_diag[static_cast<std::size_t>(i)] - z.z();
  MatrixXc G = M.partialPivLu().inverse();
  if (!G.allFinite()) throw NumericalError("resolvent solve failed");

  const double inv_n = 1.0 / static_cast<double>(n);
  ResolventSnapshot s;
  s.z = z;
  cplx tr = 0.0, ta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    tr += G(i, i);
    ta += a_diag[static_cast<std::size_t>(i)] * G(i, i);
  }
  s.m_H = tr * inv_n;
  s.f_A = ta * inv_n;
  s.f_B = (B_tilde.transpose().cwiseProduct(G)).sum() * inv_n;
  s.identity_residual = std::abs(z.z() * s.m_H + 1.0 - s.f_A - s.f_B);
  if (keep_resolvent) s.G_H = std::move(G);
  return s;
}

IdentityGap pv_identity_gap(const SpectralMeasure& muA, const SpectralMeasure& muB, int N,
                            ComplexPoint z, int replicates, std::uint64_t seed,
                            Ensemble ensemble, Execution exec) {
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
  const std::vector<double> a = realize_diagonal(muA, N, Multiplicity::kLargestRemainder);
  const std::vector<double> b = realize_diagonal(muB, N, Multiplicity::kLargestRemainder);
  VectorXc gA(N);
  for (int i = 0; i < N; ++i) gA[i] = 1.0 / (a[static_cast<std::size_t>(i)] - z.z());

  const int batches = std::min(10, replicates);
  std::vector<MatrixXc> sums(static_cast<std::size_t>(batches), MatrixXc::Zero(N, N));
  std::vector<int> sizes(static_cast<std::size_t>(batches), 0);

  // Replicate r belongs to batch r * batches / replicates; each batch is summed
  // in replicate order so the result does not depend on the thread count.
  auto run_batch = [&](int bidx) {
    const int lo = static_cast<int>(static_cast<long long>(replicates) * bidx / batches);
    const int hi = static_cast<int>(static_cast<long long>(replicates) * (bidx + 1) / batches);
    MatrixXc& acc = sums[static_cast<std::size_t>(bidx)];
    for (int r = lo; r < hi; ++r) {
      Philox rng(seed, substream(static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(r)));
      const MatrixXc U = haar_matrix(N, ensemble, rng);
      const MatrixXc Bt = conjugate_diagonal(U, b);
      const ResolventSnapshot s = resolvent_snapshot(a, Bt, z, true);
      const MatrixXc& G = *s.G_H;
      // m_H G_H - (m_H G_A - G_A f_B G_H)
      acc += s.m_H * G + s.f_B * (gA.asDiagonal() * G);
      acc.diagonal() -= s.m_H * gA;
    }
    sizes[static_cast<std::size_t>(bidx)] = hi - lo;
  };

  if (exec == Execution::kSerial) {
    for (int bidx = 0; bidx < batches; ++bidx) run_batch(bidx);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int bidx = 0; bidx < batches; ++bidx) run_batch(bidx);
  }

  MatrixXc total = MatrixXc::Zero(N, N);
  for (const auto& s : sums) total += s;
  const MatrixXc mean = total / static_cast<double>(replicates);

  IdentityGap out;
  out.replicates = replicates;
  out.batches = batches;
  out.gap = mean.norm() / N;
  if (batches < 2) {
    out.stderr_ = std::numeric_limits<double>::quiet_NaN();
  } else {
    double ss = 0.0;
    for (int bidx = 0; bidx < batches; ++bidx) {
      const MatrixXc bm = sums[static_cast<std::size_t>(bidx)] /
                          static_cast<double>(sizes[static_cast<std::size_t>(bidx)]);
      ss += (bm - mean).squaredNorm();
    }
    out.stderr_ = std::sqrt(ss / (batches * (batches - 1.0))) / N;
  }
  return out;
}

}  // namespace fconv
