#pragma once
// Radial ground states of  R'' + (2/r) R' - omega R + b(R^2) R = 0  by shooting on R(0),
// mass/energy functionals, the soliton curve and its minimal-mass point.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "satsol/errors.hpp"
#include "satsol/nonlinearity.hpp"
#include "satsol/numerics.hpp"

namespace satsol {

struct GridParams {
  double r_max = 0.0;  // 0 selects 15/sqrt(omega)
  int n = 4001;        // nodes including r = 0
};

struct SolverMeta {
  double R0 = 0.0;
  double bracket_lo = 0.0, bracket_hi = 0.0;
  int bisections = 0;
  double r_splice = 0.0;  // asymptotic tail used beyond this radius
  double tol = 0.0;
};

struct SolitonProfile {
  Nonlinearity nl;
  double omega = 0.0;
  std::vector<double> r;
  std::vector<double> R;
  SolverMeta meta;

  double h() const { return r.size() > 1 ? r[1] - r[0] : 0.0; }
  double r_max() const { return r.empty() ? 0.0 : r.back(); }
};

namespace detail {

using State = std::array<double, 2>;

enum class Shot { Crossed, TurnedUp, Survived };

struct ShotResult {
  Shot kind = Shot::Survived;
  double r_event = 0.0;
};

inline double series_start_radius(double omega) { return 1e-4 / std::sqrt(std::max(omega, 1e-8)); }

inline State series_state(const Nonlinearity& nl, double omega, double R0, double r) {
  const double a = (omega * R0 - nl.force(R0)) / 6.0;
  return {R0 + a * r * r, 2.0 * a * r};
}

struct ProfileRhs {
  const Nonlinearity* nl;
  double omega;
  void operator()(const State& y, State& dy, double r) const {
    dy[0] = y[1];
    dy[1] = -2.0 / r * y[1] + omega * y[0] - nl->force(y[0]);
  }
};

using Stepper = boost::numeric::odeint::runge_kutta_dopri5<State>;

// Integrates from the series start, classifying the trajectory. When `nodes` is
// given the controlled stepper lands on every node (no interpolation), and the
// solution is sampled there until the first event.
inline ShotResult shoot(const Nonlinearity& nl, double omega, double R0, double r_max, double rtol,
                        const std::vector<double>* nodes = nullptr, std::vector<double>* R_out = nullptr,
                        std::vector<double>* dR_out = nullptr) {
  namespace ode = boost::numeric::odeint;
  const double r0 = series_start_radius(omega);
  State y = series_state(nl, omega, R0, r0);
  auto st = ode::make_controlled(rtol * 1e-2, rtol, Stepper());
  ProfileRhs rhs{&nl, omega};
  std::size_t k = 0;
  if (nodes) {
    R_out->assign(nodes->size(), 0.0);
    if (dR_out) dR_out->assign(nodes->size(), 0.0);
    while (k < nodes->size() && (*nodes)[k] <= r0) {
      State s = series_state(nl, omega, R0, (*nodes)[k]);
      (*R_out)[k] = s[0];
      if (dR_out) (*dR_out)[k] = s[1];
      ++k;
    }
  }
  double r = r0, dt = 1e-3 * r0;
  ShotResult res;
  int guard = 0;
  while (r < r_max) {
    const double target = (nodes && k < nodes->size()) ? std::min((*nodes)[k], r_max) : r_max;
    double step = std::min(dt, target - r);
    const bool clipped = step < dt;
    if (st.try_step(rhs, y, r, step) == ode::fail) {
      dt = step;
      if (++guard > 1000000) throw ConvergenceError("shooting integrator stalled");
      continue;
    }
    if (!clipped || step > dt) dt = step;  // keep the grown step unless we only clipped to a node
    if (nodes && k < nodes->size() && r >= (*nodes)[k]) {
      (*R_out)[k] = y[0];
      if (dR_out) (*dR_out)[k] = y[1];
      ++k;
    }
    if (y[0] < 0.0) {
      res.kind = Shot::Crossed;
      res.r_event = r;
      if (nodes && k > 0 && (*R_out)[k - 1] < 0.0) --k, (*R_out)[k] = 0.0;
      return res;
    }
    if (y[1] > 0.0) {
      res.kind = Shot::TurnedUp;
      res.r_event = r;
      return res;
    }
  }
  res.kind = Shot::Survived;
  res.r_event = r_max;
  return res;
}

// Root of b(R^2) = omega: below it the profile cannot start decreasing.
inline double plateau_amplitude(const Nonlinearity& nl, double omega) {
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (nl.V1(hi) < omega) {
    hi *= 2.0;
    if (++guard > 200) throw BracketError("plateau root not found: b(R^2) stays below omega");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double m = 0.5 * (lo + hi);
    (nl.V1(m) < omega ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Shooting solve. tol is the relative bisection tolerance on R(0).
inline SolitonProfile solve_profile(const Nonlinearity& nl, double omega, GridParams grid = {},
                                    double tol = 1e-14) {
  if (!(omega > 0.0)) throw DomainError("solve_profile: omega must be positive");
  if (!(tol > 0.0)) throw DomainError("solve_profile: tol must be positive");
  if (grid.n < 5) throw ConfigError("solve_profile: need at least 5 grid nodes");
  const double kappa = std::sqrt(omega);
  const double r_max = grid.r_max > 0.0 ? grid.r_max : 15.0 / kappa;
  const double rtol = 1e-12;
  const double shoot_to = r_max * 1.5;

  const double Rp = detail::plateau_amplitude(nl, omega);
  double lo = Rp, hi = 10.0 * Rp;
  if (detail::shoot(nl, omega, lo, shoot_to, rtol).kind == detail::Shot::Crossed)
    throw BracketError("solve_profile: plateau amplitude already overshoots");
  int expand = 0;
  while (detail::shoot(nl, omega, hi, shoot_to, rtol).kind != detail::Shot::Crossed) {
    lo = hi;
    hi *= 2.0;
    if (++expand > 40) {
      std::ostringstream os;
      os << "solve_profile: no sign change of the shooting map above the plateau root (omega=" << omega << ")";
      throw BracketError(os.str());
    }
  }
  SolverMeta meta;
  meta.bracket_lo = lo, meta.bracket_hi = hi, meta.tol = tol;
  int it = 0;
  const int max_it = 200;
  while (hi - lo > tol * hi) {
    if (++it > max_it) throw ConvergenceError("solve_profile: bisection did not converge");
    double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    auto s = detail::shoot(nl, omega, m, shoot_to, rtol);
    (s.kind == detail::Shot::Crossed ? hi : lo) = m;
  }
  meta.bisections = it;
  meta.R0 = lo;

  SolitonProfile prof;
  prof.nl = nl;
  prof.omega = omega;
  prof.r = linspace(0.0, r_max, static_cast<std::size_t>(grid.n));
  std::vector<double> Rlo, Rhi, dRlo, dRhi;
  detail::shoot(nl, omega, lo, shoot_to, 0.1 * rtol, &prof.r, &Rlo, &dRlo);
  detail::shoot(nl, omega, hi, shoot_to, 0.1 * rtol, &prof.r, &Rhi, &dRhi);
  prof.R.assign(prof.r.size(), 0.0);
  prof.R[0] = 0.5 * (lo + hi);
  // The two bracketing trajectories agree until the shooting instability separates them;
  // beyond that point the linearized tail A exp(-kappa r)/r is spliced in.
  std::size_t splice = prof.r.size();
  for (std::size_t i = 1; i < prof.r.size(); ++i) {
    double a = Rlo[i], b = Rhi[i];
    bool ok = a > 0.0 && b > 0.0 && std::abs(a - b) <= 1e-6 * a && dRlo[i] < 0.0;
    if (!ok) {
      splice = i;
      break;
    }
    prof.R[i] = 0.5 * (a + b);
  }
  if (splice < prof.r.size()) {
    // back off a little so the match point is well inside the agreement region
    std::size_t m = std::max<std::size_t>(splice > 20 ? splice - 10 : splice - 1, 1);
    const double rm = prof.r[m], Rm = prof.R[m];
    // decay rate matched to the log-derivative there so the join is C^1
    const double dRm = 0.5 * (dRlo[m] + dRhi[m]);
    const double k = std::max(-(dRm / Rm + 1.0 / rm), 0.5 * kappa);
    for (std::size_t i = m + 1; i < prof.r.size(); ++i) {
      double ri = prof.r[i];
      prof.R[i] = Rm * rm / ri * std::exp(-k * (ri - rm));
    }
    meta.r_splice = rm;
  } else {
    meta.r_splice = r_max;
  }
  prof.meta = meta;
  return prof;
}

// Q = (1/2) 4 pi int R^2 r^2 dr
inline double mass(const SolitonProfile& p) {
  std::vector<double> f(p.r.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = p.R[i] * p.R[i] * p.r[i] * p.r[i];
  return 0.5 * 4.0 * M_PI * simpson(f, p.h());
}

enum class Quadrature { Simpson, Trapezoid };

// E = (1/2) 4 pi int (R'^2 - G(R^2)) r^2 dr; the factor 1/2 pairs E with Q so that
// dE/domega = -omega dQ/domega along the curve.
inline double energy(const SolitonProfile& p, Quadrature rule = Quadrature::Simpson) {
  const double h = p.h();
  std::vector<double> dR = derivative4(p.R, h, +1), f(p.r.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = (dR[i] * dR[i] - p.nl.G(p.R[i])) * p.r[i] * p.r[i];
  const double I = rule == Quadrature::Simpson ? simpson(f, h) : trapezoid(f, h);
  return 0.5 * 4.0 * M_PI * I;
}

// Max |R'' + (2/r)R' - omega R + b(R^2)R| over interior nodes up to r_to (default: the
// splice radius). Verification uses 7-point (6th-order) central differences so that the
// check is not dominated by the differencing error of the 4th-order stencils.
inline double profile_residual(const SolitonProfile& p, double r_from = 0.0, double r_to = -1.0) {
  const double h = p.h();
  if (r_to < 0.0) r_to = p.meta.r_splice;
  const long n = static_cast<long>(p.r.size());
  auto at = [&](long i) { return p.R[static_cast<std::size_t>(i < 0 ? -i : i)]; };
  double worst = 0.0;
  for (long i = 1; i + 3 < n; ++i) {
    const double r = p.r[static_cast<std::size_t>(i)];
    if (r < r_from || r > r_to) continue;
    double d1 = (-at(i - 3) + 9 * at(i - 2) - 45 * at(i - 1) + 45 * at(i + 1) - 9 * at(i + 2) + at(i + 3)) / (60 * h);
    double d2 = (2 * at(i - 3) - 27 * at(i - 2) + 270 * at(i - 1) - 490 * at(i) + 270 * at(i + 1) -
                 27 * at(i + 2) + 2 * at(i + 3)) /
                (180 * h * h);
    double res = d2 + 2.0 / r * d1 - p.omega * at(i) + p.nl.force(at(i));
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

struct SolitonCurve {
  Nonlinearity nl;
  std::vector<double> omegas, Q_values, E_values;
  std::optional<double> omega_min_mass;
  std::optional<double> Q_min;
};

struct CurveOptions {
  GridParams grid{};
  double tol = 1e-14;
  bool log_spacing = true;
  bool refine_minimum = true;
  double refine_rel_tol = 1e-7;
  unsigned jobs = 1;
};

namespace detail {

inline std::pair<double, double> mass_energy_at(const Nonlinearity& nl, double w, const CurveOptions& o) {
  try {
    auto p = solve_profile(nl, w, o.grid, o.tol);
    return {mass(p), energy(p)};
  } catch (const NumericError& e) {
    std::ostringstream os;
    os << "soliton curve failed at omega=" << w << ": " << e.what();
    throw NumericError(os.str());
  }
}

}  // namespace detail

inline SolitonCurve soliton_curve(const Nonlinearity& nl, double w_min, double w_max, int n,
                                  const CurveOptions& opt = {}) {
  if (!(w_min > 0.0 && w_min < w_max)) throw DomainError("soliton_curve: need 0 < omega_min < omega_max");
  if (n < 3) throw DomainError("soliton_curve: need at least 3 points");
  SolitonCurve c;
  c.nl = nl;
  c.omegas = opt.log_spacing ? logspace(w_min, w_max, n) : linspace(w_min, w_max, n);
  c.Q_values.assign(n, 0.0);
  c.E_values.assign(n, 0.0);
  parallel_for(static_cast<std::size_t>(n), opt.jobs, [&](std::size_t i) {
    auto [q, e] = detail::mass_energy_at(nl, c.omegas[i], opt);
    c.Q_values[i] = q;
    c.E_values[i] = e;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.Q_values.size(); ++i)
    if (c.Q_values[i] < c.Q_values[best]) best = i;
  if (best > 0 && best + 1 < c.Q_values.size() && c.Q_values[best] < c.Q_values[best - 1] &&
      c.Q_values[best] < c.Q_values[best + 1]) {
    double wmin = c.omegas[best];
    double qmin = c.Q_values[best];
    if (opt.refine_minimum) {
      auto Qf = [&](double w) { return detail::mass_energy_at(nl, w, opt).first; };
      wmin = golden_section(Qf, c.omegas[best - 1], c.omegas[best + 1], opt.refine_rel_tol);
      qmin = Qf(wmin);
    }
    c.omega_min_mass = wmin;
    c.Q_min = qmin;
  }
  return c;
}

// Nonuniform centered first derivative at interior node i.
inline double centered_derivative(const std::vector<double>& x, const std::vector<double>& y, std::size_t i) {
  const double h1 = x[i] - x[i - 1], h2 = x[i + 1] - x[i];
  return (-h2 * h2 * y[i - 1] + (h2 * h2 - h1 * h1) * y[i] + h1 * h1 * y[i + 1]) / (h1 * h2 * (h1 + h2));
}

// max over interior omega of |dE + omega dQ| / (|dE| + |omega dQ| + eps)
inline double hamiltonian_identity_check(const SolitonCurve& c, double eps = 1e-300) {
  if (c.omegas.size() < 5) throw DomainError("hamiltonian_identity_check: need at least 5 points");
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < c.omegas.size(); ++i) {
    double dE = centered_derivative(c.omegas, c.E_values, i);
    double wdQ = c.omegas[i] * centered_derivative(c.omegas, c.Q_values, i);
    double den = std::abs(dE) + std::abs(wdQ) + eps;
    if (std::abs(dE) + std::abs(wdQ) == 0.0) continue;
    worst = std::max(worst, std::abs(dE + wdQ) / den);
  }
  return worst;
}

enum class Stability { Stable, Unstable, Degenerate };

inline std::string to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    default: return "degenerate";
  }
}

// delta''(omega) for delta = E + omega Q, from the cubic through the four nearest points.
inline double delta_second_derivative(const SolitonCurve& c, double w) {
  const std::size_t n = c.omegas.size();
  std::size_t j = 0;
  while (j + 1 < n && c.omegas[j + 1] < w) ++j;
  std::size_t s = j >= 1 ? j - 1 : 0;
  if (s + 4 > n) s = n - 4;
  double x[4], y[4];
  for (int k = 0; k < 4; ++k) {
    x[k] = c.omegas[s + k];
    y[k] = c.E_values[s + k] + x[k] * c.Q_values[s + k];
  }
  // second derivative of the Lagrange cubic at w
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    double den = 1.0;
    for (int m = 0; m < 4; ++m)
      if (m != k) den *= (x[k] - x[m]);
    int o[3], t = 0;
    for (int m = 0; m < 4; ++m)
      if (m != k) o[t++] = m;
    double num = 2.0 * ((w - x[o[0]]) + (w - x[o[1]]) + (w - x[o[2]]));
    acc += y[k] * num / den;
  }
  return acc;
}

// Degenerate when |omega delta''/delta'| with delta' = Q falls below rel_tol.
inline Stability stability_indicator(const SolitonCurve& c, double w, double rel_tol = 1e-2) {
  if (c.omegas.size() < 4) throw DomainError("stability_indicator: need at least 4 points");
  if (!(w > c.omegas.front() && w < c.omegas.back())) throw DomainError("stability_indicator: omega outside the curve");
  double d2 = delta_second_derivative(c, w);
  std::size_t j = 0;
  while (j + 1 < c.omegas.size() && c.omegas[j + 1] < w) ++j;
  double q = c.Q_values[j];
  if (std::abs(w * d2) <= rel_tol * std::abs(q)) return Stability::Degenerate;
  return d2 > 0 ? Stability::Stable : Stability::Unstable;
}

}  // namespace satsol
