#include <gtest/gtest.h>

#include <random>

#include "satsol/kernels.hpp"

using namespace satsol;

namespace {

VectorXcd sector_gaussian(const RadialGrid& g) {
  VectorXcd f(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = std::exp(-g.r[i] * g.r[i]) * std::pow(g.r[i], g.ell);
  return f;
}

// max |(A u)_i - f_i| away from the wall, where the truncated integral leaves a boundary layer
double interior_error(const VectorXcd& Au, const VectorXcd& f, int margin) {
  double e = 0.0;
  for (Eigen::Index i = 0; i + margin < f.size(); ++i) e = std::max(e, std::abs(Au[i] - f[i]));
  return e;
}

const NormProbeResult& reference_probe() {
  static NormProbeResult r = mapping_norm_probe({4, 8, 16, 32, 64}, 1.0, reference_potential, reference_potential);
  return r;
}

}  // namespace

TEST(Kernels, HelmholtzStaticLimitIsReal) {
  KernelParams p{0.0, 1.0, Branch::Plus};
  for (double r : {0.1, 1.0, 7.0}) {
    EXPECT_EQ(helmholtz_kernel(p, r).imag(), 0.0);
    EXPECT_NEAR(helmholtz_kernel(p, r).real(), c_G / r, 1e-15);
  }
}

TEST(Kernels, HelmholtzModulusTimesRadiusConstant) {
  KernelParams p{2.3, 1.0, Branch::Plus};
  for (double r : {0.01, 0.7, 3.0, 40.0}) EXPECT_NEAR(std::abs(helmholtz_kernel(p, r)) * r, c_G, 1e-14);
  EXPECT_THROW(helmholtz_kernel(p, 0.0), DomainError);
}

TEST(Kernels, FourthOrderOriginLimit) {
  KernelParams p{1.0, 1.0, Branch::Plus};
  const cplx expected = c_K / 2.0 * cplx(std::sqrt(3.0), 1.0);
  EXPECT_NEAR(std::abs(fourth_order_kernel(p, 0.0) - expected), 0.0, 1e-15);
  // continuity at the origin
  EXPECT_NEAR(std::abs(fourth_order_kernel(p, 1e-7) - expected), 0.0, 1e-8);
  for (double r : {1e-6, 1e-3, 0.1}) EXPECT_LT(std::abs(fourth_order_kernel(p, r)), 2 * std::abs(expected));
}

TEST(Kernels, BranchesAreConjugate) {
  for (double mu : {0.5, 2.0})
    for (double r : {0.0, 0.3, 5.0}) {
      KernelParams pp{mu, 0.7, Branch::Plus}, pm{mu, 0.7, Branch::Minus};
      EXPECT_NEAR(std::abs(fourth_order_kernel(pp, r) - std::conj(fourth_order_kernel(pm, r))), 0.0, 1e-15);
      if (r > 0) EXPECT_NEAR(std::abs(helmholtz_kernel(pp, r) - std::conj(helmholtz_kernel(pm, r))), 0.0, 1e-15);
    }
}

TEST(Kernels, ClosedFormsMatchContourOracle) {
  for (double mu : {0.5, 1.0, 3.0})
    for (Branch b : {Branch::Plus, Branch::Minus})
      for (double r : {0.1, 0.5, 1.0, 3.0, 10.0}) {
        KernelParams p{mu, 1.0, b};
        cplx g = helmholtz_kernel(p, r), k = fourth_order_kernel(p, r);
        EXPECT_LE(std::abs(g - helmholtz_kernel_oracle(p, r)), 1e-6 * std::abs(g));
        EXPECT_LE(std::abs(k - fourth_order_kernel_oracle(p, r)), 1e-6 * std::abs(k));
      }
}

TEST(Kernels, RejectsBadParameters) {
  EXPECT_THROW(helmholtz_kernel({1.0, 0.0, Branch::Plus}, 1.0), DomainError);
  EXPECT_THROW(fourth_order_kernel({-1.0, 1.0, Branch::Plus}, 1.0), DomainError);
}

TEST(Convolution, ZeroInput) {
  auto g = RadialGrid::make_uniform(10.0, 99);
  auto out = convolve_partial_wave(PartialWaveKernel::helmholtz({1.0, 1.0}), VectorXcd::Zero(99), g);
  EXPECT_EQ(out.norm(), 0.0);
}

TEST(Convolution, NegativeEllRejected) {
  auto g = RadialGrid::make_uniform(10.0, 99);
  g.ell = -1;
  EXPECT_THROW(PartialWaveConvolution(PartialWaveKernel::helmholtz({1.0, 1.0}), g), DomainError);
}

TEST(Convolution, Linear) {
  auto g = RadialGrid::make_uniform(10.0, 199, 2);
  PartialWaveConvolution K(PartialWaveKernel::fourth_order({1.5, 0.8}), g);
  std::mt19937_64 rng(0);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 5; ++t) {
    VectorXcd f(199), h(199);
    for (int i = 0; i < 199; ++i) f[i] = cplx(nd(rng), nd(rng)), h[i] = cplx(nd(rng), nd(rng));
    const cplx c(nd(rng), nd(rng));
    VectorXcd Kf = K.apply(f), Kh = K.apply(h);
    const double s = Kf.norm() + Kh.norm();
    EXPECT_LE((K.apply(VectorXcd(f + h)) - Kf - Kh).norm(), 1e-12 * s);
    EXPECT_LE((K.apply(VectorXcd(c * f)) - c * Kf).norm(), 1e-12 * std::abs(c) * Kf.norm());
  }
}

TEST(Convolution, HelmholtzInvertsOperator) {
  for (int l : {0, 1})
    for (double mu : {0.0, 1.0, 3.0}) {
      auto g = RadialGrid::make_uniform(20.0, 399, l);
      VectorXcd f = sector_gaussian(g);
      VectorXcd u = convolve_partial_wave(PartialWaveKernel::helmholtz({mu, 1.0}), f, g);
      VectorXcd Lu = free_operator(g, -mu * mu).apply(u);
      EXPECT_LE(interior_error(Lu, f, 5), 1e-4) << "l = " << l << " mu = " << mu;
    }
}

TEST(Convolution, FourthOrderEquation) {
  const double omega = 1.0;
  for (int l : {0, 1})
    for (double mu : {0.0, 1.0, 3.0}) {
      auto g = RadialGrid::make_uniform(20.0, 399, l);
      VectorXcd f = sector_gaussian(g);
      VectorXcd v = convolve_partial_wave(PartialWaveKernel::fourth_order({mu, omega}), f, g);
      auto A = free_operator(g, -mu * mu), B = free_operator(g, 2 * omega + mu * mu);
      VectorXcd L4 = A.apply(VectorXcd(B.apply(v)));
      EXPECT_LE(interior_error(L4, f, 10), 1e-4) << "l = " << l << " mu = " << mu;
    }
}

TEST(Convolution, ExteriorEvaluationMatchesNodes) {
  auto g = RadialGrid::make_uniform(10.0, 199, 1);
  PartialWaveConvolution K(PartialWaveKernel::fourth_order({2.0, 1.0}), g);
  VectorXcd f = sector_gaussian(g);
  VectorXcd at_nodes = K.apply(f);
  std::vector<double> t(g.r.begin(), g.r.end());
  VectorXcd at_targets = K.evaluate_at(f, t);
  EXPECT_LE((at_nodes - at_targets).norm(), 1e-12 * at_nodes.norm());
  // beyond the last node only the outgoing part survives, with |h_1(x)| x = sqrt(1 + 1/x^2)
  auto far = K.evaluate_at(f, {30.0, 60.0});
  auto scaled = [&](int k, double r) { return std::abs(far[k]) * r / std::sqrt(1 + 1 / (4 * r * r)); };
  EXPECT_NEAR(scaled(0, 30.0), scaled(1, 60.0), 1e-8 * scaled(0, 30.0));
}

TEST(NormProbe, DecaySlope) {
  const auto& r = reference_probe();
  EXPECT_GE(r.fit.slope, -0.7);
  EXPECT_LE(r.fit.slope, -0.3);
}

TEST(NormProbe, NormDecreases) {
  const auto& r = reference_probe();
  double n4 = 0, n16 = 0;
  for (const auto& row : r.rows) {
    if (row.mu == 4) n4 = row.norm_est;
    if (row.mu == 16) n16 = row.norm_est;
  }
  EXPECT_LT(n16, n4);
}

TEST(NormProbe, GridRefinement) {
  NormProbeOptions fine;
  fine.h_outer *= 0.5;
  fine.n_inner *= 2;
  auto a = mapping_norm_probe({4, 16}, 1.0, reference_potential, reference_potential);
  auto b = mapping_norm_probe({4, 16}, 1.0, reference_potential, reference_potential, fine);
  for (int k = 0; k < 2; ++k)
    EXPECT_LE(std::abs(a.rows[k].norm_est - b.rows[k].norm_est), 0.1 * a.rows[k].norm_est);
}

TEST(NormProbe, RejectsLowFrequency) {
  EXPECT_THROW(mapping_norm_probe({0.5}, 1.0, reference_potential, reference_potential), DomainError);
}
