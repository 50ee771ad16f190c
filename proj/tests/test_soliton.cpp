#include <gtest/gtest.h>

#include "satsol/soliton.hpp"

using namespace satsol;

namespace {

Nonlinearity t1_squared() { return {NonlinearitySpec::type1(4, 2), Coupling::Squared}; }
Nonlinearity t1_amplitude() { return {NonlinearitySpec::type1(4, 2), Coupling::Amplitude}; }

SolitonProfile synthetic(double r_max, int n, double (*f)(double)) {
  SolitonProfile p;
  p.nl = t1_squared();
  p.omega = 1.0;
  p.r = linspace(0.0, r_max, n);
  p.R.resize(n);
  for (int i = 0; i < n; ++i) p.R[i] = f(p.r[i]);
  p.meta.r_splice = r_max;
  return p;
}

const SolitonProfile& omega1() {
  static SolitonProfile p = solve_profile(t1_squared(), 1.0);
  return p;
}

}  // namespace

TEST(Soliton, RejectsBadArguments) {
  EXPECT_THROW(solve_profile(t1_squared(), 0.0), DomainError);
  EXPECT_THROW(solve_profile(t1_squared(), 1.0, {}, -1.0), DomainError);
}

TEST(Soliton, ResidualOnFinerVerificationGrid) {
  const auto& p = omega1();
  GridParams fine{p.r_max(), 2 * (static_cast<int>(p.r.size()) - 1) + 1};
  auto q = solve_profile(p.nl, 1.0, fine);
  EXPECT_LE(profile_residual(q), 1e-8);
  EXPECT_NEAR(q.meta.R0, p.meta.R0, 1e-12 * p.meta.R0);
}

TEST(Soliton, PositiveAndNonincreasing) {
  const auto& p = omega1();
  for (std::size_t i = 0; i + 1 < p.R.size(); ++i) {
    EXPECT_GT(p.R[i], 0.0);
    EXPECT_LE(p.R[i + 1] - p.R[i], 0.0);
  }
}

TEST(Soliton, TailSlope) {
  // R ~ A exp(-sqrt(omega) r)/r, so the slope of log(rR) tends to -sqrt(omega)
  for (double w : {1.0, 0.3}) {
    auto p = solve_profile(t1_squared(), w);
    const std::size_t n = p.r.size(), i0 = n * 9 / 10;
    double s = (std::log(p.r[n - 1] * p.R[n - 1]) - std::log(p.r[i0] * p.R[i0])) / (p.r[n - 1] - p.r[i0]);
    EXPECT_NEAR(s / -std::sqrt(w), 1.0, 0.05);
  }
}

TEST(Soliton, MassOfGaussianAndZero) {
  auto g = synthetic(12.0, 4001, [](double r) { return std::exp(-r * r / 2); });
  EXPECT_NEAR(mass(g), 0.5 * std::pow(M_PI, 1.5), 1e-10);
  auto z = synthetic(12.0, 101, [](double) { return 0.0; });
  EXPECT_EQ(mass(z), 0.0);
  EXPECT_EQ(energy(z), 0.0);
}

TEST(Soliton, EnergyOfGaussianMatchesClosedForm) {
  // Type1(4,2) squared: G(t) = t^2/2 - t + log(1+t); compare against tanh-sinh quadrature of the integrand
  auto g = synthetic(12.0, 4001, [](double r) { return std::exp(-r * r / 2); });
  // kinetic part: (1/2) 4 pi int r^2 e^{-r^2} r^2 dr = (1/2) 4 pi (3 sqrt(pi)/8)
  const double kin = 0.5 * 4 * M_PI * 3 * std::sqrt(M_PI) / 8;
  std::vector<double> f(g.r.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = g.nl.G(g.R[i]) * g.r[i] * g.r[i];
  const double pot = 0.5 * 4 * M_PI * simpson(f, g.h());
  EXPECT_NEAR(energy(g), kin - pot, 1e-9);
}

TEST(Soliton, MassRefinementStable) {
  auto a = solve_profile(t1_squared(), 1.0, {0.0, 4001});
  auto b = solve_profile(t1_squared(), 1.0, {0.0, 8001});
  EXPECT_LE(std::abs(mass(a) - mass(b)), 1e-8 * mass(a));
  EXPECT_LE(std::abs(energy(a) - energy(b)), 1e-6 * std::abs(energy(a)));
}

TEST(Soliton, EnergyQuadratureCrossCheck) {
  const auto& p = omega1();
  double es = energy(p, Quadrature::Simpson), et = energy(p, Quadrature::Trapezoid);
  EXPECT_LE(std::abs(es - et), 1e-6 * std::abs(es));
}

TEST(Soliton, SquaredCouplingCurveIsMonotone) {
  auto c = soliton_curve(t1_squared(), 0.05, 5.0, 9);
  for (std::size_t i = 0; i + 1 < c.Q_values.size(); ++i) EXPECT_GT(c.Q_values[i], c.Q_values[i + 1]);
  EXPECT_FALSE(c.omega_min_mass.has_value());
}

TEST(Soliton, AmplitudeCouplingCurveHasInteriorMinimum) {
  auto c = soliton_curve(t1_amplitude(), 0.05, 5.0, 21);
  ASSERT_TRUE(c.omega_min_mass.has_value());
  EXPECT_GT(*c.omega_min_mass, 0.05);
  EXPECT_LT(*c.omega_min_mass, 5.0);
  for (double q : c.Q_values) EXPECT_GT(q, 0.0);
  EXPECT_LE(*c.Q_min, *std::min_element(c.Q_values.begin(), c.Q_values.end()) + 1e-9);
}

TEST(Soliton, HamiltonianIdentity) {
  auto c41 = soliton_curve(t1_squared(), 0.05, 5.0, 41, {.refine_minimum = false});
  auto c81 = soliton_curve(t1_squared(), 0.05, 5.0, 81, {.refine_minimum = false});
  double r41 = hamiltonian_identity_check(c41), r81 = hamiltonian_identity_check(c81);
  EXPECT_LE(r41, 1e-2);
  EXPECT_LE(r81, 0.5 * r41);
}

TEST(Soliton, HamiltonianIdentityConstantCurve) {
  SolitonCurve c;
  c.omegas = {1, 2, 3, 4, 5};
  c.Q_values.assign(5, 2.0);
  c.E_values.assign(5, 3.0);
  EXPECT_EQ(hamiltonian_identity_check(c), 0.0);
}

TEST(Soliton, StabilityIndicator) {
  auto c = soliton_curve(t1_amplitude(), 0.05, 5.0, 41);
  ASSERT_TRUE(c.omega_min_mass.has_value());
  EXPECT_EQ(stability_indicator(c, 3.0), Stability::Stable);
  EXPECT_EQ(stability_indicator(c, 0.07), Stability::Unstable);
  EXPECT_EQ(stability_indicator(c, *c.omega_min_mass), Stability::Degenerate);
  EXPECT_THROW(stability_indicator(c, 10.0), DomainError);
}
