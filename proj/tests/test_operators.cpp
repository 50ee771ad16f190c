#include <gtest/gtest.h>

#include <map>

#include "satsol/operators.hpp"

using namespace satsol;

namespace {

// Minimal-mass frequency of Type1(4,2) with amplitude coupling (frozen; recomputed in test_soliton)
constexpr double kOmega0 = 0.2136229873;

Nonlinearity t1_amplitude() { return {NonlinearitySpec::type1(4, 2), Coupling::Amplitude}; }

const SolitonProfile& profile0() {
  static SolitonProfile p = solve_profile(t1_amplitude(), kOmega0);
  return p;
}

const DiscreteSoliton& soliton(int n) {
  static std::map<int, DiscreteSoliton> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, discretize_soliton(profile0(), RadialGrid::make_uniform(40.0, n))).first;
  return it->second;
}

double rel_asym(const MatrixXd& A) { return (A - A.transpose()).norm() / A.norm(); }

}  // namespace

TEST(RadialGrid, GaussianMomentQuadrature) {
  auto g = RadialGrid::make_uniform(12.0, 599);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.w[i] * std::exp(-g.r[i] * g.r[i]);
  EXPECT_NEAR(s, std::sqrt(M_PI) / 4, 1e-10);
}

TEST(RadialGrid, NodesIncreasingWeightsPositive) {
  for (const auto& g : {RadialGrid::make_uniform(10.0, 50), RadialGrid::make_geometric(1e-3, 50.0, 200)}) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_GT(g.w[i], 0.0);
      if (i) EXPECT_GT(g.r[i], g.r[i - 1]);
    }
  }
  EXPECT_THROW(RadialGrid::make_uniform(10.0, 4), ConfigError);
  EXPECT_THROW(RadialGrid::make_uniform(10.0, 50, -1), DomainError);
}

TEST(Operators, Symmetric) {
  const auto& ds = soliton(399);
  for (int l : {0, 1, 2, 5})
    for (Which w : {Which::Minus, Which::Plus}) EXPECT_LE(rel_asym(build_L(ds, w, l).A), 1e-12);
}

TEST(Operators, HamiltonianBlocks) {
  auto mh = build_hamiltonian(soliton(300), 1);
  const auto n = mh.n();
  EXPECT_EQ(mh.H.topLeftCorner(n, n).norm(), 0.0);
  EXPECT_EQ(mh.H.bottomRightCorner(n, n).norm(), 0.0);
  EXPECT_EQ((mh.H.topRightCorner(n, n) - mh.Lminus.A).norm(), 0.0);
  EXPECT_EQ((mh.H.bottomLeftCorner(n, n) + mh.Lplus.A).norm(), 0.0);
}

TEST(Operators, PhaseKernelVector) {
  const auto& ds = soliton(400);
  auto Lm = build_L(ds, Which::Minus, 0);
  VectorXd x = Lm.to_sym(ds.R);
  EXPECT_LE((Lm.A * x).norm() / x.norm(), 1e-6);
}

TEST(Operators, TranslationKernelVector) {
  const auto& ds = soliton(400);
  auto Lp = build_L(ds, Which::Plus, 1);
  VectorXd x = Lp.to_sym(radial_derivative(ds));
  EXPECT_LE((Lp.A * x).norm() / x.norm(), 1e-4);
}

TEST(Operators, FreeOperatorBoundedBelowByOmega) {
  auto g = RadialGrid::make_uniform(30.0, 300);
  for (int l : {0, 1, 3}) {
    auto sp = discrete_spectrum(free_operator(g.with_ell(l), 0.7), 1);
    EXPECT_GE(sp.values[0], 0.7);
  }
}

TEST(Operators, SpectrumShift) {
  auto op = build_L(soliton(300), Which::Plus, 0);
  auto a = discrete_spectrum(op, 5);
  op.A.diagonal().array() += 2.5;
  auto b = discrete_spectrum(op, 5);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(b.values[k], a.values[k] + 2.5, 1e-10);
}

TEST(Operators, EigenpairResidual) {
  auto op = build_L(soliton(300), Which::Plus, 2);
  auto sp = discrete_spectrum(op, 4);
  for (int k = 0; k < 4; ++k) {
    VectorXd v = sp.vectors.col(k);
    EXPECT_LE((op.A * v - sp.values[k] * v).norm(), 1e-8);
  }
}

TEST(Operators, BoundStateStableUnderRefinement) {
  // ground state of L+ (l = 0) is negative and isolated
  double a = discrete_spectrum(build_L(soliton(399), Which::Plus, 0), 1).values[0];
  double b = discrete_spectrum(build_L(soliton(799), Which::Plus, 0), 1).values[0];
  EXPECT_LT(a, 0.0);
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(Operators, ShortWallRejected) {
  EXPECT_THROW(discretize_soliton(profile0(), RadialGrid::make_uniform(15.0, 150)), ConfigError);
  EXPECT_THROW(build_L(soliton(300), Which::Minus, -1), DomainError);
}

TEST(OperatorPower, Identities) {
  auto op = free_operator(RadialGrid::make_uniform(10.0, 60, 1), 0.5);
  const MatrixXd& A = op.A;
  const MatrixXd I = MatrixXd::Identity(A.rows(), A.cols());
  EXPECT_LE((operator_power(A, 1.0) - A).norm(), 1e-12 * A.norm());
  MatrixXd S = operator_power(A, 0.5);
  EXPECT_LE((S * S - A).norm(), 1e-9 * A.norm());
  for (double a : {0.25, 0.5, 1.0}) EXPECT_LE((operator_power(A, a) * operator_power(A, -a) - I).norm(), 1e-9);
}

TEST(OperatorPower, ContourMatchesEigendecomposition) {
  auto op = free_operator(RadialGrid::make_uniform(8.0, 50), 1.0);
  for (double a : {0.5, 0.25, 1.5}) {
    MatrixXd E = operator_power(op, a, PowerBackend::Eigendecomposition);
    MatrixXd C = operator_power(op, a, PowerBackend::Contour);
    EXPECT_LE((E - C).norm(), 1e-6 * E.norm()) << "a = " << a;
  }
}

TEST(OperatorPower, IndefiniteOperatorRejected) {
  auto op = build_L(soliton(300), Which::Plus, 0);
  try {
    operator_power(op, 0.5);
    FAIL() << "expected SpectralError";
  } catch (const SpectralError& e) {
    EXPECT_LT(e.eigenvalue, 0.0);
  }
}

TEST(OperatorPower, DeflatedPowerOfLminus) {
  // L- is nonnegative with kernel R; the deflated square root squares back to L-
  auto Lm = build_L(soliton(300), Which::Minus, 0);
  MatrixXd S = operator_power_deflated(Lm.A, 0.5, 1e-6);
  EXPECT_LE((S * S - Lm.A).norm(), 1e-8 * Lm.A.norm());
  VectorXd x = Lm.to_sym(soliton(300).R);
  EXPECT_LE((S * x).norm() / x.norm(), 1e-3);
}

TEST(NullSpace, DimensionAtMinimalMass) {
  // l = 0: phase chain of length 4 at the minimal-mass frequency; l = 1: translations, length 2
  const auto& ds = soliton(300);
  auto n0 = generalized_null_space(build_hamiltonian(ds, 0));
  auto n1 = generalized_null_space(build_hamiltonian(ds, 1));
  auto n2 = generalized_null_space(build_hamiltonian(ds, 2));
  EXPECT_EQ(n0.dimension(), 4);
  EXPECT_EQ(n1.dimension(), 2);
  EXPECT_EQ(n2.dimension(), 0);
  // three copies of the l = 1 sector
  EXPECT_EQ(n0.dimension() + 3 * n1.dimension(), 2 * 3 + 4);
}

TEST(NullSpace, DeflatedSpectrumHasNoSmallEigenvalues) {
  const auto& ds = soliton(300);
  for (int l : {0, 1}) {
    auto mh = build_hamiltonian(ds, l);
    auto ns = generalized_null_space(mh);
    auto ev = deflated_eigenvalues(mh, ns);
    // the deflated block keeps dimension() exact zeros, then the continuum starts near omega
    const auto first = ev[static_cast<std::size_t>(ns.dimension())];
    EXPECT_GT(std::abs(first), 0.9 * kOmega0) << "l = " << l;
  }
}
