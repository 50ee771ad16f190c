#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "satsol/nonlinearity.hpp"

using namespace satsol;

namespace {

double tanh_sinh_G(const NonlinearitySpec& sp, double t) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([&](double s) { return beta(sp, s); }, 0.0, t);
}

std::vector<NonlinearitySpec> specs() {
  return {NonlinearitySpec::type1(4, 2), NonlinearitySpec::type1(5, 1), NonlinearitySpec::type1(3.5, 0.8),
          NonlinearitySpec::type1(6, 2), NonlinearitySpec::type2(2), NonlinearitySpec::type2(1),
          NonlinearitySpec::type2(0.5)};
}

}  // namespace

TEST(Nonlinearity, ValidationRejectsBadExponents) {
  EXPECT_THROW(NonlinearitySpec::type1(3.0, 1.0), ConfigError);  // p <= 2 + 4/3
  EXPECT_THROW(NonlinearitySpec::type1(4.0, 0.0), ConfigError);
  EXPECT_THROW(NonlinearitySpec::type1(4.0, 5.0), ConfigError);
  EXPECT_THROW(NonlinearitySpec::type2(-1.0), ConfigError);
  EXPECT_THROW(NonlinearitySpec::type2(2.5), ConfigError);
  NonlinearitySpec s{Kind::Type1, 4, 2, 2};
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_TRUE(NonlinearitySpec::type1(4, 1).strictly_subcritical());
  EXPECT_FALSE(NonlinearitySpec::type1(4, 2).strictly_subcritical());
}

TEST(Nonlinearity, BetaValues) {
  auto t1 = NonlinearitySpec::type1(4, 2);
  auto t2 = NonlinearitySpec::type2(2);
  EXPECT_NEAR(beta(t1, 1.0), 0.5, 1e-15);
  EXPECT_EQ(beta(t1, 0.0), 0.0);
  EXPECT_EQ(beta(t2, 0.0), 0.0);
  EXPECT_NEAR(beta(t2, 3.0), 3.0, 1e-15);
  EXPECT_THROW(beta(t1, -1e-3), DomainError);
}

TEST(Nonlinearity, BetaPrimeValues) {
  auto t1 = NonlinearitySpec::type1(4, 2);
  auto t2 = NonlinearitySpec::type2(2);
  EXPECT_NEAR(beta_prime(t1, 1.0), 0.75, 1e-15);
  EXPECT_EQ(beta_prime(t1, 0.0), 0.0);
  EXPECT_NEAR(beta_prime(t2, 5.0), 1.0, 1e-15);
  EXPECT_THROW(beta_prime(t2, -1.0), DomainError);
}

TEST(Nonlinearity, GValues) {
  auto t1 = NonlinearitySpec::type1(4, 2);
  auto t2 = NonlinearitySpec::type2(2);
  EXPECT_EQ(G_antiderivative(t1, 0.0), 0.0);
  EXPECT_NEAR(G_antiderivative(t2, 2.0), 2.0, 1e-14);
  // closed form for s^2/(1+s): t^2/2 - t + log(1+t)
  EXPECT_NEAR(G_antiderivative(t1, 1.0), 0.5 - 1.0 + std::log(2.0), 1e-14);
  EXPECT_NEAR(G_antiderivative(t1, 1.0), tanh_sinh_G(t1, 1.0), 1e-10);
  EXPECT_THROW(G_antiderivative(t1, -2.0), DomainError);
}

TEST(Nonlinearity, GMatchesIndependentQuadrature) {
  for (const auto& sp : specs())
    for (double t : {1e-3, 0.05, 0.3, 0.9, 1.0, 2.5, 10.0, 70.0}) {
      double ref = tanh_sinh_G(sp, t);
      EXPECT_NEAR(G_antiderivative(sp, t), ref, 1e-10 * std::max(1.0, std::abs(ref)))
          << to_string(sp.kind) << " p=" << sp.p << " q=" << sp.q << " t=" << t;
    }
}

TEST(Nonlinearity, BetaNonnegativeAndAsymptotes) {
  for (const auto& sp : specs()) {
    for (double s = 1e-10; s < 1e14; s *= 3.7) EXPECT_GE(beta(sp, s), 0.0);
    if (sp.kind == Kind::Type1) {
      EXPECT_NEAR(beta(sp, 1e-6) / std::pow(1e-6, sp.p / 2), 1.0, 1e-2);
      EXPECT_NEAR(beta(sp, 1e8) / std::pow(1e8, sp.q / 2), 1.0, 1e-2);
    } else {
      EXPECT_NEAR(beta(sp, 1e-6) / 1e-6, 1.0, 1e-2);
    }
  }
}

TEST(Nonlinearity, LogSpaceBranchIsFinite) {
  auto sp = NonlinearitySpec::type1(40, 1);
  double b = beta(sp, 1e20);
  EXPECT_TRUE(std::isfinite(b));
  EXPECT_NEAR(b / std::pow(1e20, 0.5), 1.0, 1e-10);
  EXPECT_GT(beta(sp, 1e-13), 0.0 - 1e-300);
}

TEST(Nonlinearity, BetaPrimeMatchesFiniteDifferences) {
  for (const auto& sp : specs()) {
    for (int i = 0; i < 100; ++i) {
      double s = std::pow(10.0, -4.0 + 8.0 * i / 99.0);
      double h = 1e-5 * s;
      double fd = (beta(sp, s + h) - beta(sp, s - h)) / (2 * h);
      double an = beta_prime(sp, s);
      EXPECT_NEAR(an, fd, 1e-6 * std::max(std::abs(an), 1e-300) + 1e-14) << "s=" << s;
    }
  }
}

TEST(Nonlinearity, GIsMonotone) {
  for (const auto& sp : specs()) {
    double prev = 0.0;
    for (double t = 1e-4; t < 1e3; t *= 1.3) {
      double g = G_antiderivative(sp, t);
      EXPECT_GE(g, prev);
      prev = g;
    }
  }
}

TEST(Nonlinearity, CouplingPotentials) {
  Nonlinearity sq{NonlinearitySpec::type1(4, 2), Coupling::Squared};
  Nonlinearity am{NonlinearitySpec::type1(4, 2), Coupling::Amplitude};
  const double R = 1.3;
  EXPECT_NEAR(sq.V1(R), beta(sq.spec, R * R), 1e-15);
  EXPECT_NEAR(sq.V2(R), 2 * beta_prime(sq.spec, R * R) * R * R, 1e-14);
  EXPECT_NEAR(am.V1(R), beta(am.spec, R), 1e-15);
  // V2 = 2 b'(R^2) R^2 with b(s) = beta(sqrt s)
  EXPECT_NEAR(am.V2(R), beta_prime(am.spec, R) * R, 1e-14);
  // dG/dR = 2 R b(R^2) = 2 force(R)
  for (const auto* nl : {&sq, &am}) {
    double h = 1e-5;
    double dG = (nl->G(R + h) - nl->G(R - h)) / (2 * h);
    EXPECT_NEAR(dG, 2 * nl->force(R), 1e-8);
    double dF = (nl->force(R + h) - nl->force(R - h)) / (2 * h);
    EXPECT_NEAR(dF, nl->force_prime(R), 1e-8);
  }
}
