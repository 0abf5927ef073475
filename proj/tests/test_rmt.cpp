#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fconv/error.hpp"
#include "fconv/rmt.hpp"

using namespace fconv;

namespace {
const SpectralMeasure kBernoulli({-1.0, 1.0}, {0.5, 0.5});

double max_abs(const MatrixXc& M) { return M.cwiseAbs().maxCoeff(); }

MatrixXc random_hermitian(int N, Philox& rng) {
  MatrixXc X(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) X(i, j) = cplx(rng.normal(), rng.normal());
  return 0.5 * (X + X.adjoint());
}

// Two-sample Kolmogorov distance between sorted samples.
double ks_two_sample(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / x.size() - double(j) / y.size()));
  }
  return d;
}

std::vector<double> sorted_pool(const std::vector<std::vector<double>>& reps, const std::vector<int>& idx) {
  std::vector<double> out;
  for (int r : idx) out.insert(out.end(), reps[r].begin(), reps[r].end());
  std::sort(out.begin(), out.end());
  return out;
}
}  // namespace

TEST_CASE("haar unitary") {
  Philox rng(0, 0);
  const MatrixXc u1 = haar_unitary(1, rng);
  CHECK(std::abs(std::abs(u1(0, 0)) - 1.0) < 1e-14);
  const MatrixXc U = haar_unitary(64, rng);
  CHECK(max_abs(U * U.adjoint() - MatrixXc::Identity(64, 64)) <= 1e-12);
}

TEST_CASE("haar orthogonal") {
  Philox rng(0, 1);
  const double u1 = haar_orthogonal(1, rng)(0, 0).real();
  CHECK(std::abs(std::abs(u1) - 1.0) < 1e-15);
  const MatrixXc O = haar_orthogonal(64, rng);
  CHECK(O.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_abs(O * O.adjoint() - MatrixXc::Identity(64, 64)) <= 1e-12);
}

TEST_CASE("haar second moments") {
  for (auto ens : {Ensemble::kUnitary, Ensemble::kOrthogonal}) {
    const int draws = 10000, N = 8;
    double s = 0.0, s2 = 0.0;
    for (int r = 0; r < draws; ++r) {
      Philox rng(5, substream(0, static_cast<std::uint32_t>(r)));
      const double v = std::norm(haar_matrix(N, ens, rng)(0, 0));
      s += v;
      s2 += v * v;
    }
    const double mean = s / draws;
    const double se = std::sqrt((s2 / draws - mean * mean) / draws);
    CHECK(std::abs(mean - 1.0 / N) <= 4.0 * se);
  }
}

TEST_CASE("multiplicities") {
  CHECK(multiplicities(kBernoulli, 10, Multiplicity::kExact) == std::vector<int>{5, 5});
  CHECK_THROWS_WITH_AS(multiplicities(kBernoulli, 125, Multiplicity::kExact),
                       doctest::Contains("N incompatible with weights"), ValidationError);
  const auto lr = multiplicities(kBernoulli, 125, Multiplicity::kLargestRemainder);
  CHECK(lr[0] + lr[1] == 125);
  CHECK(std::abs(lr[0] - lr[1]) == 1);
  const auto diag = realize_diagonal(SpectralMeasure({0.0, 2.0}, {0.25, 0.75}), 4, Multiplicity::kExact);
  CHECK(diag == std::vector<double>{0.0, 2.0, 2.0, 2.0});
}

TEST_CASE("eigensolvers on small matrices") {
  MatrixXc D = MatrixXc::Zero(3, 3);
  D(0, 0) = 3.0;
  D(1, 1) = 1.0;
  D(2, 2) = 2.0;
  CHECK(eig_hermitian_jacobi(D) == std::vector<double>{1.0, 2.0, 3.0});
  MatrixXc X(2, 2);
  X << 0.0, 1.0, 1.0, 0.0;
  const auto ev = eig_hermitian_jacobi(X);
  CHECK(ev[0] == doctest::Approx(-1.0));
  CHECK(ev[1] == doctest::Approx(1.0));
}

TEST_CASE("eigensolver trace identities and agreement") {
  Philox rng(3, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXc H = random_hermitian(16, rng);
    const auto jac = eig_hermitian_jacobi(H);
    const auto eig = eig_hermitian(H);
    REQUIRE(std::is_sorted(jac.begin(), jac.end()));
    const double tr = H.trace().real();
    const double fro2 = H.squaredNorm();
    double s1 = 0.0, s2 = 0.0;
    for (double l : jac) {
      s1 += l;
      s2 += l * l;
    }
    CHECK(std::abs(s1 - tr) <= 1e-10);
    CHECK(std::abs(s2 - fro2) <= 1e-9);
    for (std::size_t i = 0; i < jac.size(); ++i) CHECK(std::abs(jac[i] - eig[i]) <= 1e-11);
  }
}

TEST_CASE("draw reductions") {
  const SpectralMeasure A({-1.0, 0.5, 2.0}, {0.25, 0.25, 0.5});
  const auto d0 = draw(A, SpectralMeasure::dirac(0.0), 8, 1);
  CHECK(d0.eigenvalues == realize_diagonal(A, 8, Multiplicity::kExact));

  const auto d1 = draw(SpectralMeasure::dirac(0.7), A, 8, 1);
  const auto b = realize_diagonal(A, 8, Multiplicity::kExact);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(d1.eigenvalues[i] - (0.7 + b[i])) <= 1e-12);

  CHECK_THROWS_WITH_AS(draw(kBernoulli, kBernoulli, 7, 0), doctest::Contains("0.5"), ValidationError);
}

TEST_CASE("draw invariants") {
  const SpectralMeasure A({-1.0, 0.5, 2.0}, {0.25, 0.25, 0.5});
  const SpectralMeasure B({-2.0, 1.0}, {0.5, 0.5});
  DrawOptions opts;
  opts.keep_matrices = true;
  for (auto ens : {Ensemble::kUnitary, Ensemble::kOrthogonal}) {
    opts.ensemble = ens;
    for (std::uint64_t r = 0; r < 5; ++r) {
      const auto d = draw(A, B, 40, 9, r, opts);
      REQUIRE(d.eigenvalues.size() == 40);
      CHECK(d.eigenvalues.front() >= -3.0 - 1e-8);
      CHECK(d.eigenvalues.back() <= 3.0 + 1e-8);
      const auto a = realize_diagonal(A, 40, Multiplicity::kExact);
      const auto bd = realize_diagonal(B, 40, Multiplicity::kExact);
      const double trA = std::accumulate(a.begin(), a.end(), 0.0);
      const double trB = std::accumulate(bd.begin(), bd.end(), 0.0);
      const double trH = std::accumulate(d.eigenvalues.begin(), d.eigenvalues.end(), 0.0);
      CHECK(std::abs(trH - trA - trB) <= 1e-9 * 40 * 2.0);
      const MatrixXc& H = *d.H;
      CHECK(max_abs(H - H.adjoint()) == 0.0);
      const MatrixXc Bt = conjugate_diagonal(*d.U, bd);
      double trA2 = 0.0, trB2 = 0.0;
      for (double x : a) trA2 += x * x;
      for (double x : bd) trB2 += x * x;
      cplx cross = 0.0;
      for (int i = 0; i < 40; ++i) cross += a[static_cast<std::size_t>(i)] * Bt(i, i);
      double trH2 = 0.0;
      for (double l : d.eigenvalues) trH2 += l * l;
      CHECK(std::abs(trH2 - trA2 - trB2 - 2.0 * cross.real()) <= 1e-9 * 40 * 4.0);
    }
  }
}

TEST_CASE("draw determinism") {
  const auto a = draw(kBernoulli, kBernoulli, 50, 123, 4);
  const auto b = draw(kBernoulli, kBernoulli, 50, 123, 4);
  const auto c = draw(kBernoulli, kBernoulli, 50, 123, 5);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.eigenvalues != c.eigenvalues);
}

TEST_CASE("arcsine closed form against a Monte Carlo histogram") {
  const auto d = draw(kBernoulli, kBernoulli, 1000, 2024);
  const double width = 0.2;
  for (double lo = -1.8; lo < 1.8 - 1e-9; lo += width) {
    const double hi = lo + width;
    const auto n = std::count_if(d.eigenvalues.begin(), d.eigenvalues.end(),
                                 [&](double x) { return x > lo && x <= hi; });
    const double exact = (std::asin(hi / 2.0) - std::asin(lo / 2.0)) / M_PI;
    CHECK(std::abs(static_cast<double>(n) / 1000.0 - exact) <= 0.01);
  }
  // m(2i) of the closed form against the empirical transform.
  const cplx z{0.0, 2.0};
  cplx m = 0.0;
  for (double l : d.eigenvalues) m += 1.0 / (l - z);
  m /= 1000.0;
  CHECK(std::abs(m - cplx(0.0, 1.0 / (2.0 * std::sqrt(2.0)))) <= 2e-3);
}

TEST_CASE("semicircle sum against a Monte Carlo window count") {
  // 200-atom quantile discretization of the standard semicircle.
  std::vector<double> atoms(200), w(200, 1.0 / 200);
  for (int i = 0; i < 200; ++i) {
    const double q = (i + 0.5) / 200;
    double lo = -2.0, hi = 2.0;
    for (int it = 0; it < 200; ++it) {
      const double x = 0.5 * (lo + hi);
      const double F = 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * M_PI) + std::asin(x / 2.0) / M_PI;
      (F < q ? lo : hi) = x;
    }
    atoms[i] = 0.5 * (lo + hi);
  }
  const SpectralMeasure sc(atoms, w);
  double total = 0.0;
  for (std::uint64_t r = 0; r < 4; ++r) {
    const auto d = draw(sc, sc, 1000, 77, r);
    total += static_cast<double>(std::count_if(d.eigenvalues.begin(), d.eigenvalues.end(),
                                               [](double x) { return std::abs(x) <= 0.2; }));
  }
  // Semicircle of variance 2: density 1/(pi sqrt 2) at the origin, nearly flat on [-0.2, 0.2].
  const double density = total / 4.0 / 1000.0 / 0.4;
  CHECK(std::abs(density - 1.0 / (M_PI * std::sqrt(2.0))) <= 5e-3);
}

TEST_CASE("resolvent snapshot reductions") {
  const std::vector<double> a{-1.0, 0.0, 0.5, 2.0};
  const ComplexPoint z{0.2, 1.0};
  const auto s = resolvent_snapshot(a, MatrixXc::Zero(4, 4), z);
  CHECK(s.f_B == cplx(0.0));
  cplx mA = 0.0;
  for (double x : a) mA += 0.25 / (x - z.z());
  CHECK(std::abs(s.m_H - mA) <= 1e-15);

  Philox rng(8, 0);
  const MatrixXc U = haar_unitary(4, rng);
  const auto t = resolvent_snapshot(std::vector<double>(4, 0.0), conjugate_diagonal(U, a), z);
  CHECK(t.f_A == cplx(0.0));
  CHECK(std::abs(z.z() * t.m_H + 1.0 - t.f_B) <= 1e-14);
  CHECK(t.m_H.imag() > 0.0);

  const auto d = draw(kBernoulli, SpectralMeasure({-0.5, 0.25, 1.0, 3.0}, {0.25, 0.25, 0.25, 0.25}), 8, 3,
                      0, {Ensemble::kUnitary, Multiplicity::kExact, true});
  const auto b = realize_diagonal(SpectralMeasure({-0.5, 0.25, 1.0, 3.0}, {0.25, 0.25, 0.25, 0.25}), 8,
                                  Multiplicity::kExact);
  const auto u = resolvent_snapshot(realize_diagonal(kBernoulli, 8, Multiplicity::kExact),
                                    conjugate_diagonal(*d.U, b), {0.0, 1.0});
  CHECK(u.identity_residual <= 1e-12);
}

TEST_CASE("identity gap trivial case") {
  const auto g = pv_identity_gap(kBernoulli, SpectralMeasure::dirac(0.0), 8, {0.0, 2.0}, 1, 0);
  CHECK(g.gap <= 1e-12);
  CHECK(std::isnan(g.stderr_));
  CHECK_THROWS_AS(pv_identity_gap(kBernoulli, kBernoulli, 8, {0.0, 2.0}, 0, 0), ValidationError);
}

TEST_CASE("identity gap is deterministic across execution modes") {
  const auto p = pv_identity_gap(kBernoulli, kBernoulli, 6, {0.0, 2.0}, 300, 1, Ensemble::kUnitary,
                                 Execution::kParallel);
  const auto s = pv_identity_gap(kBernoulli, kBernoulli, 6, {0.0, 2.0}, 300, 1, Ensemble::kUnitary,
                                 Execution::kSerial);
  CHECK(p.gap == s.gap);
  CHECK(p.stderr_ == s.stderr_);
}

TEST_CASE("orthogonal ensemble breaks the identity at order 1/N") {
  const auto g8 = pv_identity_gap(kBernoulli, kBernoulli, 8, {0.0, 2.0}, 100000, 0, Ensemble::kOrthogonal);
  const auto g16 = pv_identity_gap(kBernoulli, kBernoulli, 16, {0.0, 2.0}, 50000, 0, Ensemble::kOrthogonal);
  CHECK(g8.gap > 4.0 * g8.stderr_);
  // Noise-corrected gap.
  auto signal = [](const IdentityGap& g) { return std::sqrt(std::max(0.0, g.gap * g.gap - g.stderr_ * g.stderr_)); };
  const double ratio = signal(g16) / signal(g8);
  CHECK(ratio > 0.25);
  CHECK(ratio < 0.7);
}

TEST_CASE("spectrum law is invariant under conjugating A") {
  const int N = 8, reps = 200;
  const std::vector<double> a{-1.0, -1.0, 0.0, 0.5, 0.5, 1.0, 2.0, 2.0};
  const std::vector<double> b{-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0};
  Philox vr(99, 0);
  const MatrixXc V = haar_unitary(N, vr);
  MatrixXc A = MatrixXc::Zero(N, N);
  for (int i = 0; i < N; ++i) A(i, i) = a[static_cast<std::size_t>(i)];
  const MatrixXc VAV = V * A * V.adjoint();

  std::vector<std::vector<double>> pools;
  for (int r = 0; r < 2 * reps; ++r) {
    Philox rng(100, substream(1, static_cast<std::uint32_t>(r)));
    const MatrixXc Bt = conjugate_diagonal(haar_unitary(N, rng), b);
    pools.push_back(eig_hermitian((r < reps ? A : VAV) + Bt));
  }
  std::vector<int> idx(2 * reps);
  std::iota(idx.begin(), idx.end(), 0);
  auto stat = [&](const std::vector<int>& order) {
    const std::vector<int> first(order.begin(), order.begin() + reps), second(order.begin() + reps, order.end());
    return ks_two_sample(sorted_pool(pools, first), sorted_pool(pools, second));
  };
  const double observed = stat(idx);

  // Permutation null at the replicate level.
  Philox prng(101, 0);
  std::vector<double> null;
  for (int p = 0; p < 500; ++p) {
    auto perm = idx;
    for (int i = 2 * reps - 1; i > 0; --i) std::swap(perm[i], perm[prng() % static_cast<std::uint32_t>(i + 1)]);
    null.push_back(stat(perm));
  }
  std::sort(null.begin(), null.end());
  CHECK(observed <= null[static_cast<std::size_t>(0.99 * null.size())]);
}
