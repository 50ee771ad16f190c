#pragma once
// Saturated focusing nonlinearities beta(s), their derivatives, and the
// antiderivative G(t) = int_0^t beta.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "satsol/errors.hpp"

namespace satsol {

enum class Kind { Type1, Type2 };

// How the nonlinearity enters the soliton equation: beta(R^2) R or beta(R) R.
enum class Coupling { Squared, Amplitude };

inline std::string to_string(Kind k) { return k == Kind::Type1 ? "type1" : "type2"; }
inline std::string to_string(Coupling c) { return c == Coupling::Squared ? "squared" : "amplitude"; }

struct NonlinearitySpec {
  Kind kind = Kind::Type1;
  double p = 4.0;  // Type1 only
  double q = 2.0;
  int d = 3;

  static NonlinearitySpec type1(double p, double q) {
    NonlinearitySpec s{Kind::Type1, p, q, 3};
    s.validate();
    return s;
  }
  static NonlinearitySpec type2(double q) {
    NonlinearitySpec s{Kind::Type2, 0.0, q, 3};
    s.validate();
    return s;
  }

  void validate() const {
    if (d != 3) throw ConfigError("nonlinearity: only d = 3 is supported");
    if (!(q > 0.0)) throw ConfigError("nonlinearity: q must be positive");
    if (kind == Kind::Type1) {
      if (!(p > 2.0 + 4.0 / d)) throw ConfigError("nonlinearity: type1 needs p > 2 + 4/d");
      if (!(q < p)) throw ConfigError("nonlinearity: type1 needs q < p");
    } else if (!(q <= 2.0)) {
      throw ConfigError("nonlinearity: type2 needs q <= 2");
    }
  }

  // The strict subcritical bound q < 4/d of the definitions.
  bool strictly_subcritical() const { return q < 4.0 / d; }
};

namespace detail {

inline void require_nonnegative(double s, const char* what) {
  if (!(s >= 0.0)) throw DomainError(std::string(what) + ": argument must be nonnegative");
}

inline bool is_positive_integer(double x) { return x >= 1.0 && std::floor(x) == x; }

// sum_n (-1)^n t^{k+na+1}/(k+na+1), the expansion of int_0^t s^k/(1+s^a) for t < 1
inline double ratio_series(double k, double a, double t) {
  double sum = 0.0, ta = std::pow(t, a), term = std::pow(t, k + 1);
  for (int n = 0; n < 400; ++n) {
    double c = term / (k + n * a + 1);
    sum += (n % 2 == 0) ? c : -c;
    term *= ta;
    if (std::abs(c) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// int_0^t s^k / (1 + s^a) ds for integers 0 <= k < a.
inline double int_proper_ratio(int k, int a, double t) {
  if (t < 0.5) return ratio_series(k, a, t);
  // partial fractions over the roots of s^a = -1
  std::complex<double> acc(0.0, 0.0);
  for (int j = 0; j < a; ++j) {
    std::complex<double> w = std::polar(1.0, M_PI * (2.0 * j + 1.0) / a);
    acc += std::pow(w, k + 1) * std::log(1.0 - t / w);
  }
  return -acc.real() / a;
}

// int_0^t s^m / (1 + s^a) ds for integers m >= 0, a >= 1.
inline double int_power_ratio(int m, int a, double t) {
  if (t < 0.5) return ratio_series(m, a, t);
  if (m < a) return int_proper_ratio(m, a, t);
  int J = m / a, k = m - J * a;
  double poly = 0.0;
  for (int i = 1; i <= J; ++i) {
    int e = m - i * a + 1;
    double c = std::pow(t, e) / e;
    poly += (i % 2 == 1) ? c : -c;
  }
  double rest = int_proper_ratio(k, a, t);
  return poly + ((J % 2 == 0) ? rest : -rest);
}

template <class F>
double kronrod61(F&& f, double a, double b) {
  if (b <= a) return 0.0;
  // map to [0, 1] and normalize so the stopping test does not stall on tiny intervals or values
  const double w = b - a, s = std::abs(f(b));
  const double scale = s > 0.0 && std::isfinite(s) ? s : 1.0;
  auto g = [&](double u) { return f(a + w * u) / scale; };
  return w * scale * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, 1.0, 20, 1e-12);
}

}  // namespace detail

inline double beta(const NonlinearitySpec& sp, double s) {
  detail::require_nonnegative(s, "beta");
  if (s == 0.0) return 0.0;
  if (sp.kind == Kind::Type2) return s * std::pow(1.0 + s, -(2.0 - sp.q) / 2.0);
  const double a = (sp.p - sp.q) / 2.0;
  if (s < 1e-12 || s > 1e12) {
    const double ls = std::log(s), x = a * ls;
    const double l1p = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    return std::exp(0.5 * sp.p * ls - l1p);
  }
  return std::pow(s, 0.5 * sp.p) / (1.0 + std::pow(s, a));
}

inline double beta_prime(const NonlinearitySpec& sp, double s) {
  detail::require_nonnegative(s, "beta_prime");
  if (sp.kind == Kind::Type2) {
    const double c = (2.0 - sp.q) / 2.0;
    return std::pow(1.0 + s, -c - 1.0) * (1.0 + s - c * s);
  }
  if (s == 0.0) return sp.p > 2.0 ? 0.0 : 1.0;
  const double a = (sp.p - sp.q) / 2.0;
  const double sigma = 1.0 / (1.0 + std::exp(-a * std::log(s)));
  return beta(sp, s) / s * (0.5 * sp.p - a * sigma);
}

inline double G_antiderivative(const NonlinearitySpec& sp, double t) {
  detail::require_nonnegative(t, "G_antiderivative");
  if (t == 0.0) return 0.0;
  if (sp.kind == Kind::Type2) {
    const double c = (2.0 - sp.q) / 2.0;
    if (c == 0.0) return 0.5 * t * t;
    if (t < 0.1) {
      // int_0^t s (1+s)^{-c} ds as a binomial series
      double sum = 0.0, coef = 1.0, tp = t * t;
      for (int n = 0; n < 200; ++n) {
        double term = coef * tp / (n + 2);
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        coef *= (-c - n) / (n + 1);
        tp *= t;
      }
      return sum;
    }
    const double u = 1.0 + t;
    return (std::pow(u, 2.0 - c) - 1.0) / (2.0 - c) - (std::pow(u, 1.0 - c) - 1.0) / (1.0 - c);
  }
  const double a = (sp.p - sp.q) / 2.0, m = sp.p / 2.0;
  if (detail::is_positive_integer(a) && std::floor(m) == m)
    return detail::int_power_ratio(static_cast<int>(m), static_cast<int>(a), t);
  if (t < 0.5) return detail::ratio_series(m, a, t);
  return detail::kronrod61([&](double s) { return beta(sp, s); }, 0.0, t);
}

// The nonlinearity as seen by the radial profile: b(R^2) is the coefficient of R
// in the soliton equation, so b = beta (Squared) or b(s) = beta(sqrt(s)) (Amplitude).
struct Nonlinearity {
  NonlinearitySpec spec;
  Coupling coupling = Coupling::Squared;

  // V1 = b(R^2)
  double V1(double R) const {
    const double x = std::abs(R);
    return coupling == Coupling::Squared ? beta(spec, x * x) : beta(spec, x);
  }
  // V2 = 2 b'(R^2) R^2
  double V2(double R) const {
    const double x = std::abs(R);
    return coupling == Coupling::Squared ? 2.0 * beta_prime(spec, x * x) * x * x
                                         : beta_prime(spec, x) * x;
  }
  // F(R) = b(R^2) R, the nonlinear term of the profile equation
  double force(double R) const { return V1(R) * R; }
  // dF/dR = V1 + V2
  double force_prime(double R) const { return V1(R) + V2(R); }
  // G_b(R^2) where G_b' = b
  double G(double R) const {
    const double x = std::abs(R);
    if (coupling == Coupling::Squared) return G_antiderivative(spec, x * x);
    if (spec.kind == Kind::Type1) {
      const double a = (spec.p - spec.q) / 2.0, m = 1.0 + spec.p / 2.0;
      if (detail::is_positive_integer(a) && std::floor(m) == m)
        return 2.0 * detail::int_power_ratio(static_cast<int>(m), static_cast<int>(a), x);
      if (x < 0.5) return 2.0 * detail::ratio_series(m, a, x);
    }
    return 2.0 * detail::kronrod61([&](double y) { return y * beta(spec, y); }, 0.0, x);
  }
};

}  // namespace satsol
