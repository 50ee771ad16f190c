#include <gtest/gtest.h>

#include <random>

#include "satsol/distorted.hpp"

using namespace satsol;

namespace {

constexpr double kOmega0 = 0.2136229873;

const SolitonProfile& profile0() {
  static SolitonProfile p = solve_profile({NonlinearitySpec::type1(4, 2), Coupling::Amplitude}, kOmega0);
  return p;
}

const ScatteringProblem& problem0() {
  static ScatteringProblem pb = ScatteringProblem::from_profile(profile0());
  return pb;
}

const ThresholdEstimate& threshold0() {
  static ThresholdEstimate t = estimate_threshold(problem0());
  return t;
}

const ModeVerifier& verifier0() {
  static ModeVerifier mv = ModeVerifier::from_problem(problem0(), 8);
  return mv;
}

double rel_diff(const VectorXcd& a, const VectorXcd& b) { return (a - b).norm() / b.norm(); }

// Field grid shared by the transform tests: r <= 40, h = 0.1
const RadialGrid& field0() {
  static RadialGrid g = RadialGrid::make_uniform(40.0, 399, 0);
  return g;
}

const SectorTransform& transform0() {
  static SectorTransform T = build_transform(problem0(), field0(), threshold0().M);
  return T;
}

const MatrixHamiltonian& hamiltonian0() {
  static MatrixHamiltonian mh = build_hamiltonian(discretize_soliton(profile0(), field0()), 0);
  return mh;
}

// Random smooth radial data: sums of r^{2k} exp(-r^2/(2 s^2)), k = 0, 1, 2.
struct SmoothFamily {
  std::mt19937_64 rng{0};
  std::uniform_real_distribution<double> U{-1.0, 1.0};
  VectorXcd draw(const RadialGrid& g) {
    const double s = 2.25 + 0.75 * U(rng);
    const double c0 = U(rng), c1 = 0.3 * U(rng) / (s * s), c2 = 0.05 * U(rng) / std::pow(s, 4);
    return g.sample([&](double r) { return (c0 + c1 * r * r + c2 * std::pow(r, 4)) * std::exp(-r * r / (2 * s * s)); })
        .cast<cplx>();
  }
};

}  // namespace

TEST(FreeModes, PlaneWaveReduction) {
  auto pb = ScatteringProblem::free(kOmega0);
  std::vector<double> t = {0.05, 0.7, 3.0, 9.0, 25.0};
  for (int l : {0, 2, 5}) {
    auto m = born_solve(pb, 1.3, l);
    EXPECT_EQ(m.iterations, 1);
    auto f = fredholm_solve(pb, 1.3, l);
    VectorXcd u, v;
    mode_values(pb, f, t, u, v);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double j = std::sph_bessel(l, 1.3 * t[k]);
      EXPECT_NEAR(std::abs(u[k] - j), 0.0, 1e-6);
      EXPECT_NEAR(std::abs(v[k] - j), 0.0, 1e-6);
    }
  }
}

TEST(FreeModes, ThresholdVanishes) {
  EXPECT_EQ(estimate_threshold(ScatteringProblem::free(1.0)).M, 0.0);
}

TEST(FreeModes, PairFromScalarGivesEqualComponents) {
  auto pb = ScatteringProblem::free(kOmega0);
  auto mv = ModeVerifier::from_problem(pb, 1);
  auto p = pair_from_scalar(pb, mv, born_solve(pb, 1.0, 1), 1e-4);
  EXPECT_LE(mv.masked_norm(p.u - p.v), 1e-4 * mv.masked_norm(p.v));
}

TEST(Threshold, MinimalMassSoliton) {
  const auto& t = threshold0();
  EXPECT_GT(t.C, 0.0);
  EXPECT_NEAR(t.M, 4 * t.C * t.C, 1e-12);
  // rho decreases across the probe window
  for (std::size_t k = 1; k < t.rho.size(); ++k) EXPECT_LT(t.rho[k], t.rho[k - 1]);
}

TEST(Threshold, StableUnderGridRefinement) {
  const double M = threshold0().M;
  const double Mf = estimate_threshold(problem0().resampled(0.5 * problem0().opt.h)).M;
  EXPECT_LE(std::abs(Mf - M), 0.25 * M);
}

TEST(Born, ContractsAtTwiceThreshold) {
  const double M = threshold0().M;
  for (int l : {0, 1, 2}) {
    auto m = born_solve(problem0(), 2 * M, l);
    ASSERT_FALSE(m.ratios.empty());
    for (double q : m.ratios) EXPECT_LE(q, 0.5) << "l = " << l;
  }
}

TEST(Born, RatioScalesWithInverseRootFrequency) {
  // iterate-norm ratio at 4M should be half of the ratio at M (C xi^{-1/2}), within 30%
  const double M = threshold0().M;
  const double qM = born_solve(problem0(), M, 0).ratios.back();
  const double q4 = born_solve(problem0(), 4 * M, 0).ratios.back();
  EXPECT_NEAR(q4 / qM, 0.5, 0.3 * 0.5) << "ratio(M) = " << qM << ", ratio(4M) = " << q4;
}

TEST(Born, StrongPotentialRaisesThresholdError) {
  auto pb = ScatteringProblem::from_potentials(
      1.0, [](double r) { return 60.0 * std::exp(-r * r); }, [](double) { return 0.0; });
  EXPECT_THROW(born_solve(pb, 0.5, 0), ThresholdError);
}

TEST(Fredholm, AgreesWithBornAboveThreshold) {
  const double M = threshold0().M;
  for (double xi : {M, M + 0.1, M + 0.5}) {
    auto b = born_solve(problem0(), xi, 0), f = fredholm_solve(problem0(), xi, 0);
    EXPECT_LE(rel_diff(b.z, f.z), 1e-5) << "xi = " << xi;
  }
}

TEST(Fredholm, NearSingularGuard) {
  auto pb = problem0();
  pb.opt.delta_res = 1.0;  // sigma_min at the threshold is well below one
  try {
    fredholm_solve(pb, 0.0, 0);
    FAIL() << "expected NearSingularError";
  } catch (const NearSingularError& e) {
    EXPECT_LT(e.sigma_min, 1.0);
    EXPECT_GT(e.sigma_min, problem0().opt.delta_res);
  }
}

TEST(Fredholm, FreeSolutionHasNoScatteredPart) {
  auto pb = ScatteringProblem::free(1.0);
  auto m = fredholm_solve(pb, 0.8, 3);
  ChannelOperator K(pb, 0.8, 3);
  EXPECT_LE((m.z - K.source()).norm(), 1e-14);
}

TEST(ModeResiduals, HighFrequencyAllSectors) {
  const double M = threshold0().M;
  for (int l = 0; l <= 8; ++l) {
    auto m = solve_mode(problem0(), 2 * M, l, M);
    EXPECT_EQ(m.regime, Regime::Born);
    auto r = verifier0().check(problem0(), m);
    EXPECT_LE(r.h2, 1e-4) << "l = " << l;
    EXPECT_LE(r.intertwine_minus, 1e-4) << "l = " << l;
    EXPECT_LE(r.intertwine_plus, 1e-4) << "l = " << l;
  }
}

TEST(ModeResiduals, LowFrequencyAllSectors) {
  const double M = threshold0().M;
  for (int l = 0; l <= 8; ++l) {
    auto m = solve_mode(problem0(), 0.3, l, M);
    EXPECT_EQ(m.regime, Regime::Fredholm);
    EXPECT_LE(verifier0().check(problem0(), m).max(), 1e-4) << "l = " << l;
  }
}

TEST(PairFromScalar, IntertwiningAtUnitFrequency) {
  const auto& mv = verifier0();
  auto m = solve_mode(problem0(), 1.0, 0, threshold0().M);
  auto p = pair_from_scalar(problem0(), mv, m);
  const auto& Lp = mv.sector(0).second;
  const double E = m.energy();
  VectorXcd Lu = Lp.apply(p.u);
  EXPECT_LE(mv.masked_norm(Lu - E * p.v), 1e-4 * mv.masked_norm(p.v));
  // least-squares constant in L+ u = C v over the unmasked nodes
  cplx num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i + mv.margin < p.v.size(); ++i) {
    num += mv.grid.w[i] * std::conj(p.v[i]) * Lu[i];
    den += mv.grid.w[i] * std::norm(p.v[i]);
  }
  EXPECT_NEAR(std::abs(num / den - E), 0.0, 1e-5 * E);
}

TEST(PairFromScalar, InconsistentModeRejected) {
  const auto& mv = verifier0();
  auto m = solve_mode(problem0(), 1.0, 0, threshold0().M);
  m.z *= 1.5;  // no longer a solution
  EXPECT_THROW(pair_from_scalar(problem0(), mv, m), ConsistencyError);
}

TEST(Transform, FreeGaussianRoundTrip) {
  auto pb = ScatteringProblem::free(1.0);
  auto field = RadialGrid::make_uniform(20.0, 199, 0);
  auto T = build_transform(pb, field, 0.0, {.xi_max = 12.0, .dxi = 0.05});
  VectorXcd a = field.sample([](double r) { return std::exp(-r * r); }).cast<cplx>();
  VectorXcd b = field.sample([](double r) { return r * r * std::exp(-r * r); }).cast<cplx>();
  auto [ac, bc] = T.project(a, b);
  EXPECT_LE(T.field_norm(VectorXcd(ac - a), VectorXcd(bc - b)), 1e-6 * T.field_norm(a, b));
  // free Plancherel identity
  EXPECT_NEAR(T.spectral_norm(T.forward(a, b)) / T.field_norm(a, b), 1.0, 1e-6);
}

TEST(Transform, Idempotent) {
  const auto& T = transform0();
  SmoothFamily fam;
  for (int k = 0; k < 5; ++k) {
    VectorXcd a = fam.draw(T.field), b = fam.draw(T.field);
    auto [ac, bc] = T.project(a, b);
    auto [acc, bcc] = T.project(ac, bc);
    EXPECT_LE(T.field_norm(VectorXcd(acc - ac), VectorXcd(bcc - bc)), 1e-5 * T.field_norm(ac, bc));
  }
}

TEST(Transform, QuasiPlancherel) {
  const auto& T = transform0();
  SmoothFamily fam;
  for (int k = 0; k < 20; ++k) {
    VectorXcd a = fam.draw(T.field), b = fam.draw(T.field);
    auto [ac, bc] = T.project(a, b);
    const double q = T.spectral_norm(T.forward(a, b)) / T.field_norm(ac, bc);
    EXPECT_GE(q, 2.0 / 3.0);
    EXPECT_LE(q, 1.5);
  }
}

TEST(Transform, CompletesDiscreteProjector) {
  const auto& T = transform0();
  const auto& mh = hamiltonian0();
  const auto ns = generalized_null_space(mh);
  const MatrixXd Pd = biorthogonal_projector(ns.right, ns.left);
  const auto& Lm = mh.Lminus;
  const Eigen::Index n = mh.n();
  SmoothFamily fam;
  for (int k = 0; k < 3; ++k) {
    VectorXcd a = fam.draw(T.field), b = fam.draw(T.field);
    auto [ac, bc] = T.project(a, b);
    VectorXcd x(2 * n);
    x << Lm.to_sym(a), Lm.to_sym(b);
    VectorXcd xd = Pd.cast<cplx>() * x;
    VectorXcd ad = Lm.from_sym(VectorXcd(xd.head(n))), bd = Lm.from_sym(VectorXcd(xd.tail(n)));
    EXPECT_LE(T.field_norm(VectorXcd(a - ac - ad), VectorXcd(b - bc - bd)), 1e-3 * T.field_norm(a, b));
  }
}

TEST(Transform, RemovesNullVectors) {
  const auto& T = transform0();
  const auto& mh = hamiltonian0();
  const auto ns = generalized_null_space(mh);
  const Eigen::Index n = mh.n();
  ASSERT_GT(ns.dimension(), 0);
  for (int j = 0; j < ns.dimension(); ++j) {
    VectorXd x = ns.right.col(j);
    VectorXcd a = mh.Lminus.from_sym(VectorXd(x.head(n))).cast<cplx>();
    VectorXcd b = mh.Lminus.from_sym(VectorXd(x.tail(n))).cast<cplx>();
    auto [ac, bc] = T.project(a, b);
    EXPECT_LE(T.field_norm(ac, bc), 0.05 * T.field_norm(a, b)) << "null vector " << j;
  }
}

TEST(Transform, Linear) {
  const auto& T = transform0();
  SmoothFamily fam;
  VectorXcd a1 = fam.draw(T.field), b1 = fam.draw(T.field), a2 = fam.draw(T.field), b2 = fam.draw(T.field);
  const cplx c(0.3, -1.2);
  auto [p1, q1] = T.project(a1, b1);
  auto [p2, q2] = T.project(a2, b2);
  auto [p, q] = T.project(VectorXcd(a1 + c * a2), VectorXcd(b1 + c * b2));
  EXPECT_LE(T.field_norm(VectorXcd(p - p1 - c * p2), VectorXcd(q - q1 - c * q2)), 1e-12 * T.field_norm(p, q));
}

TEST(Transform, CommutesWithHamiltonian) {
  const auto& T = transform0();
  // H [a; b] = [L- b; -L+ a] with the potentials the modes were built from
  VectorXd V1 = T.field.sample(T.problem.V1f), V2 = T.field.sample(T.problem.V2f);
  auto Lm = assemble_operator(T.field, T.omega, V1, "L-");
  auto Lp = assemble_operator(T.field, T.omega, VectorXd(V1 + V2), "L+");
  // P_c f keeps the exponential tail of P_d f, which the Dirichlet wall cuts; the last nodes are left out
  const Eigen::Index keep = static_cast<Eigen::Index>(T.field.size()) - 8;
  auto norm = [&](const VectorXcd& x, const VectorXcd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < keep; ++i) s += T.field.w[i] * (std::norm(x[i]) + std::norm(y[i]));
    return std::sqrt(s);
  };
  SmoothFamily fam;
  for (int k = 0; k < 3; ++k) {
    VectorXcd a = fam.draw(T.field), b = fam.draw(T.field);
    auto [ac, bc] = T.project(a, b);
    VectorXcd ha = Lm.apply(b), hb = -Lp.apply(a);
    auto [hac, hbc] = T.project(ha, hb);
    VectorXcd cha = Lm.apply(bc), chb = -Lp.apply(ac);
    EXPECT_LE(norm(VectorXcd(hac - cha), VectorXcd(hbc - chb)), 1e-3 * norm(cha, chb));
  }
}

TEST(Transform, TFPRouteAgrees) {
  const auto& T = transform0();
  const auto& mh = hamiltonian0();
  const auto ds = discretize_soliton(profile0(), T.field);
  VectorXcd R = ds.R.cast<cplx>();
  SmoothFamily fam;
  VectorXcd a = fam.draw(T.field), b = fam.draw(T.field);
  a -= R * (T.field.dot(R, a) / T.field.dot(R, R));
  auto c1 = T.forward(a, b);
  auto c2 = forward_tfp(T, mh.Lminus, a, b);
  const double d = std::sqrt((c1.plus - c2.plus).squaredNorm() + (c1.minus - c2.minus).squaredNorm());
  EXPECT_LE(d, 1e-6 * std::sqrt(c1.plus.squaredNorm() + c1.minus.squaredNorm()));
}

TEST(SymbolProbe, GrowthExponents) {
  const double M = threshold0().M;
  std::vector<double> xis = logspace(M, 8 * M, 7);
  auto sp = symbol_bound_probe(profile0(), xis);
  EXPECT_NEAR(sp.fit[0].slope, 2.0, 0.3);
  EXPECT_NEAR(sp.fit[1].slope, 1.0, 0.3);
  for (int a = 0; a < 3; ++a)
    for (double s : sp.sup[a]) EXPECT_TRUE(std::isfinite(s));
}
