#pragma once
// Distorted Fourier modes of the matrix Hamiltonian in one partial-wave sector.
//
// With s = (u + v)/2 and d = (u - v)/2 the pair  L- v = E u,  L+ u = E v,  E = omega + xi^2,
// becomes the two-channel Lippmann-Schwinger system
//   s = j_l(xi r) + G_xi [a s + b d],     d = Y_kappa [b s + a d],
// a = (2 V1 + V2)/2, b = V2/2, kappa = sqrt(2 omega + xi^2). Modes are normalized like j_l, so
// the free modes are u = v = j_l(xi r).

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "satsol/errors.hpp"
#include "satsol/kernels.hpp"
#include "satsol/numerics.hpp"
#include "satsol/operators.hpp"
#include "satsol/soliton.hpp"

namespace satsol {

struct ScatteringOptions {
  double h = 0.02;           // spacing of the integral-equation grid
  double r_support = 15.0;   // potentials are cut off beyond this radius
  double taper = 3.0;        // width of the smooth cutoff
  double born_tol = 1e-11;   // relative size of the last Picard correction
  int born_max_iter = 400;
  double delta_res = 1e-3;   // sigma_min floor of I - K Vt
  double guard_h = 0.1;      // grid of the sigma_min guard (dense LU)
  double gmres_tol = 1e-12;
  int gmres_max_iter = 300;
};

struct ScatteringProblem {
  double omega = 1.0;
  std::function<double(double)> V1f, V2f;  // zero beyond r_support
  RadialGrid grid;                          // nodes h, 2h, ..., r_support (ell = 0)
  VectorXd V1, V2;
  ScatteringOptions opt;

  bool is_free() const { return V1.cwiseAbs().maxCoeff() == 0.0 && V2.cwiseAbs().maxCoeff() == 0.0; }

  template <class F1, class F2>
  static ScatteringProblem from_potentials(double omega, F1 V1, F2 V2, const ScatteringOptions& o = {}) {
    if (!(omega > 0.0)) throw DomainError("ScatteringProblem: omega must be positive");
    if (!(o.h > 0.0) || !(o.r_support >= 8.0 * o.h) || !(o.taper > 0.0 && o.taper < o.r_support)) throw ConfigError("ScatteringProblem: bad grid");
    ScatteringProblem pb;
    pb.omega = omega;
    pb.opt = o;
    const double rs = o.r_support, rt = o.r_support - o.taper;
    // smooth (C-infinity) cutoff on [r_support - taper, r_support]
    auto cut = [rs, rt](double r) {
      if (r <= rt) return 1.0;
      if (r >= rs) return 0.0;
      const double x = (r - rt) / (rs - rt);
      const double e0 = std::exp(-1.0 / (1.0 - x)), e1 = std::exp(-1.0 / x);
      return e0 / (e0 + e1);
    };
    pb.V1f = [V1, cut](double r) { return cut(r) == 0.0 ? 0.0 : cut(r) * static_cast<double>(V1(r)); };
    pb.V2f = [V2, cut](double r) { return cut(r) == 0.0 ? 0.0 : cut(r) * static_cast<double>(V2(r)); };
    pb.set_grid(o.h);
    return pb;
  }

  // Same potentials on another spacing.
  ScatteringProblem resampled(double h) const {
    ScatteringProblem pb = *this;
    pb.opt.h = h;
    pb.set_grid(h);
    return pb;
  }

  void set_grid(double h) {
    const int n = static_cast<int>(std::lround(opt.r_support / h));
    grid = RadialGrid::make_uniform((n + 1) * h, n);
    V1 = grid.sample(V1f);
    V2 = grid.sample(V2f);
  }

  static ScatteringProblem from_profile(const SolitonProfile& p, const ScatteringOptions& o = {}) {
    auto prof = std::make_shared<SolitonProfile>(p);
    return from_potentials(
        p.omega, [prof](double r) { return prof->nl.V1(detail::interpolate_profile(*prof, r)); },
        [prof](double r) { return prof->nl.V2(detail::interpolate_profile(*prof, r)); }, o);
  }

  static ScatteringProblem free(double omega, const ScatteringOptions& o = {}) {
    auto zero = [](double) { return 0.0; };
    return from_potentials(omega, zero, zero, o);
  }
};

// z = [s; d] -> K Vt z on the nodes of the problem grid.
class ChannelOperator {
 public:
  ChannelOperator(const ScatteringProblem& pb, double xi, int ell)
      : xi_(xi),
        omega_(pb.omega),
        grid_(pb.grid.with_ell(ell)),
        G_(PartialWaveKernel::helmholtz({xi, pb.omega, Branch::Plus}), grid_),
        Y_(PartialWaveKernel::yukawa(std::sqrt(2.0 * pb.omega + xi * xi)), grid_) {
    if (ell < 0) throw DomainError("distorted modes: ell must be nonnegative");
    if (!(xi >= 0.0)) throw DomainError("distorted modes: xi must be nonnegative");
    a_ = 0.5 * (2.0 * pb.V1 + pb.V2);
    b_ = 0.5 * pb.V2;
  }

  Eigen::Index n() const { return static_cast<Eigen::Index>(grid_.size()); }
  int ell() const { return grid_.ell; }
  double xi() const { return xi_; }
  const RadialGrid& grid() const { return grid_; }

  VectorXcd source() const {
    VectorXcd z = VectorXcd::Zero(2 * n());
    for (Eigen::Index i = 0; i < n(); ++i) z[i] = detail::sph_j(ell(), xi_ * grid_.r[i]);
    return z;
  }

  VectorXcd apply(const VectorXcd& z) const {
    VectorXcd out(2 * n());
    auto [qs, qd] = densities(z);
    out.head(n()) = G_.apply(qs);
    out.tail(n()) = Y_.apply(qd);
    return out;
  }

  MatrixXcd matrix() const {
    const Eigen::Index m = n();
    MatrixXcd G = G_.matrix(), Y = Y_.matrix();
    MatrixXcd K(2 * m, 2 * m);
    K.block(0, 0, m, m) = G * a_.asDiagonal();
    K.block(0, m, m, m) = G * b_.asDiagonal();
    K.block(m, 0, m, m) = Y * b_.asDiagonal();
    K.block(m, m, m, m) = Y * a_.asDiagonal();
    return K;
  }

  // Weighted L2 norm of a two-channel vector.
  double norm(const VectorXcd& z) const {
    return std::sqrt(grid_.norm(VectorXcd(z.head(n()))) * grid_.norm(VectorXcd(z.head(n()))) +
                     grid_.norm(VectorXcd(z.tail(n()))) * grid_.norm(VectorXcd(z.tail(n()))));
  }

  // u and v at arbitrary radii from the solution z = [s; d] at the nodes.
  void evaluate(const VectorXcd& z, const std::vector<double>& t, VectorXcd& u, VectorXcd& v) const {
    auto [qs, qd] = densities(z);
    VectorXcd s = G_.evaluate_at(qs, t), d = Y_.evaluate_at(qd, t);
    for (std::size_t k = 0; k < t.size(); ++k) s[static_cast<Eigen::Index>(k)] += detail::sph_j(ell(), xi_ * t[k]);
    u = s + d;
    v = s - d;
  }

 private:
  std::pair<VectorXcd, VectorXcd> densities(const VectorXcd& z) const {
    const Eigen::Index m = n();
    if (z.size() != 2 * m) throw ConfigError("ChannelOperator: size mismatch");
    VectorXcd s = z.head(m), d = z.tail(m);
    VectorXcd qs = a_.cast<cplx>().cwiseProduct(s) + b_.cast<cplx>().cwiseProduct(d);
    VectorXcd qd = b_.cast<cplx>().cwiseProduct(s) + a_.cast<cplx>().cwiseProduct(d);
    return {qs, qd};
  }

  double xi_, omega_;
  RadialGrid grid_;
  PartialWaveConvolution G_, Y_;
  VectorXd a_, b_;
};

enum class Regime { Born, Fredholm };
inline std::string to_string(Regime r) { return r == Regime::Born ? "born" : "fredholm"; }

struct SectorMode {
  int ell = 0;
  double xi = 0.0;
  double omega = 0.0;
  Regime regime = Regime::Born;
  VectorXcd z;                 // [s; d] at the integral-equation nodes
  int iterations = 0;
  std::vector<double> ratios;  // successive Picard correction ratios
  double sigma_min = std::numeric_limits<double>::quiet_NaN();

  double energy() const { return omega + xi * xi; }
};

namespace detail {

// Smallest singular value of A from its LU factors, by inverse iteration on A^H A.
inline double smallest_singular_value(const Eigen::PartialPivLU<MatrixXcd>& lu, Eigen::Index n, int iters = 60) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = cplx(nd(rng), nd(rng));
  x.normalize();
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    VectorXcd y = lu.solve(VectorXcd(lu.adjoint().solve(x)));
    const double ln = y.norm();
    if (!std::isfinite(ln)) return 0.0;
    x = y / ln;
    if (k > 3 && std::abs(ln - lam) <= 1e-10 * ln) {
      lam = ln;
      break;
    }
    lam = ln;
  }
  return 1.0 / std::sqrt(lam);
}

// I - K Vt in sqrt-weight coordinates, so that singular values refer to the weighted L2 norm.
inline MatrixXcd weighted_resolvent_matrix(const ChannelOperator& K, VectorXd& sw) {
  const Eigen::Index m = K.n();
  VectorXd s1 = K.grid().sqrt_weights();
  sw.resize(2 * m);
  sw << s1, s1;
  MatrixXcd A = -(sw.cast<cplx>().asDiagonal() * K.matrix() * sw.cwiseInverse().cast<cplx>().asDiagonal());
  A.diagonal().array() += 1.0;
  return A;
}

}  // namespace detail

// Picard iteration g <- K Vt (z0 + g). Fails with ThresholdError when it stops contracting.
inline SectorMode born_solve(const ChannelOperator& K, const ScatteringProblem& pb) {
  SectorMode m;
  m.ell = K.ell();
  m.xi = K.xi();
  m.omega = pb.omega;
  m.regime = Regime::Born;
  const VectorXcd z0 = K.source();
  VectorXcd g = VectorXcd::Zero(z0.size());
  double prev = 0.0;
  int growing = 0;
  for (int it = 1; it <= pb.opt.born_max_iter; ++it) {
    VectorXcd gn = K.apply(z0 + g);
    const double diff = K.norm(gn - g);
    g = std::move(gn);
    m.iterations = it;
    if (it >= 2 && prev > 0.0) {
      const double q = diff / prev;
      m.ratios.push_back(q);
      growing = q >= 1.0 ? growing + 1 : 0;
    }
    if (diff <= pb.opt.born_tol * K.norm(z0 + g)) {
      m.z = z0 + g;
      return m;
    }
    if (growing >= 3 || !std::isfinite(diff))
      throw ThresholdError("born_solve: iteration does not contract at xi = " + std::to_string(K.xi()));
    prev = diff;
  }
  throw ThresholdError("born_solve: no convergence within the iteration budget");
}

inline SectorMode born_solve(const ScatteringProblem& pb, double xi, int ell) {
  return born_solve(ChannelOperator(pb, xi, ell), pb);
}

namespace detail {

struct GmresResult {
  VectorXcd x;
  int iterations = 0;
  double residual = 0.0;  // relative
};

// Unrestarted GMRES with modified Gram-Schmidt; the operator is I - (compact), so the Krylov
// space needed stays small.
template <class Op>
GmresResult gmres(Op&& A, const VectorXcd& b, double tol, int max_iter) {
  const Eigen::Index n = b.size();
  GmresResult out;
  out.x = VectorXcd::Zero(n);
  const double beta = b.norm();
  if (beta == 0.0) return out;
  std::vector<VectorXcd> Q{b / beta};
  MatrixXcd H = MatrixXcd::Zero(max_iter + 1, max_iter);
  std::vector<std::complex<double>> cs, sn;
  VectorXcd g = VectorXcd::Zero(max_iter + 1);
  g[0] = beta;
  int k = 0;
  for (; k < max_iter; ++k) {
    VectorXcd w = A(Q[k]);
    for (int i = 0; i <= k; ++i) {
      H(i, k) = Q[i].dot(w);
      w -= H(i, k) * Q[i];
    }
    const double hn = w.norm();
    H(k + 1, k) = hn;
    for (int i = 0; i < k; ++i) {
      const cplx t = std::conj(cs[i]) * H(i, k) + std::conj(sn[i]) * H(i + 1, k);
      H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
      H(i, k) = t;
    }
    const double den = std::hypot(std::abs(H(k, k)), std::abs(H(k + 1, k)));
    const cplx c = den == 0.0 ? cplx(1.0) : H(k, k) / den, sv = den == 0.0 ? cplx(0.0) : H(k + 1, k) / den;
    cs.push_back(c);
    sn.push_back(sv);
    H(k, k) = den;
    H(k + 1, k) = 0.0;
    g[k + 1] = -sv * g[k];
    g[k] = std::conj(c) * g[k];
    out.residual = std::abs(g[k + 1]) / beta;
    if (out.residual <= tol || hn == 0.0) {
      ++k;
      break;
    }
    Q.push_back(w / hn);
  }
  VectorXcd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
  for (int i = 0; i < k; ++i) out.x += y[i] * Q[i];
  out.iterations = k;
  return out;
}

}  // namespace detail

// sigma_min(I - K Vt) on the coarse guard grid.
inline double resolvent_sigma_min(const ScatteringProblem& pb, double xi, int ell) {
  const ScatteringProblem coarse = pb.opt.guard_h > pb.opt.h ? pb.resampled(pb.opt.guard_h) : pb;
  ChannelOperator K(coarse, xi, ell);
  VectorXd sw;
  Eigen::PartialPivLU<MatrixXcd> lu(detail::weighted_resolvent_matrix(K, sw));
  return detail::smallest_singular_value(lu, 2 * K.n());
}

// (I - K Vt) g = K Vt z0 by GMRES in sqrt-weight coordinates, after a sigma_min guard.
inline SectorMode fredholm_solve(const ChannelOperator& K, const ScatteringProblem& pb) {
  SectorMode m;
  m.ell = K.ell();
  m.xi = K.xi();
  m.omega = pb.omega;
  m.regime = Regime::Fredholm;
  m.sigma_min = resolvent_sigma_min(pb, K.xi(), K.ell());
  if (m.sigma_min < pb.opt.delta_res)
    throw NearSingularError("fredholm_solve: I - K Vt is nearly singular (possible embedded resonance)",
                            m.sigma_min);
  VectorXd s1 = K.grid().sqrt_weights();
  VectorXcd sw(2 * K.n());
  sw << s1.cast<cplx>(), s1.cast<cplx>();
  const VectorXcd z0 = K.source();
  auto op = [&](const VectorXcd& x) -> VectorXcd {
    VectorXcd g = x.cwiseQuotient(sw);
    return x - sw.cwiseProduct(K.apply(g));
  };
  auto res = detail::gmres(op, VectorXcd(sw.cwiseProduct(K.apply(z0))), pb.opt.gmres_tol, pb.opt.gmres_max_iter);
  if (res.residual > 1e3 * pb.opt.gmres_tol)
    throw ConvergenceError("fredholm_solve: GMRES did not converge");
  m.z = z0 + res.x.cwiseQuotient(sw);
  m.iterations = res.iterations;
  return m;
}

inline SectorMode fredholm_solve(const ScatteringProblem& pb, double xi, int ell) {
  return fredholm_solve(ChannelOperator(pb, xi, ell), pb);
}

// Born above the threshold M, Fredholm below it (and as a fallback).
inline SectorMode solve_mode(const ChannelOperator& K, const ScatteringProblem& pb, double M) {
  if (K.xi() >= M) {
    try {
      return born_solve(K, pb);
    } catch (const ThresholdError&) {
    }
  }
  return fredholm_solve(K, pb);
}

inline SectorMode solve_mode(const ScatteringProblem& pb, double xi, int ell, double M) {
  return solve_mode(ChannelOperator(pb, xi, ell), pb, M);
}

// Values of a mode at arbitrary radii.
inline void mode_values(const ScatteringProblem& pb, const SectorMode& m, const std::vector<double>& t, VectorXcd& u,
                        VectorXcd& v) {
  ChannelOperator(pb, m.xi, m.ell).evaluate(m.z, t, u, v);
}

// ---------------------------------------------------------------------------------------
// Born threshold from the measured contraction rate of K Vt.

struct ThresholdOptions {
  double xi_lo = 2.0, xi_hi = 16.0;
  int n_probe = 7;
  int ell_max = 2;
  double safety = 4.0;  // M = safety * C^2 makes the contraction at xi = M at most 1/2
  int iterations = 80;
};

struct ThresholdEstimate {
  double M = 0.0;
  double C = 0.0;  // sup over the window of rho(xi) xi^{1/2}
  std::vector<double> xi, rho;
};

// Spectral radius of K Vt by power iteration (geometric mean of the late norm ratios).
inline double contraction_rate(const ScatteringProblem& pb, double xi, int ell, int iterations = 80) {
  ChannelOperator K(pb, xi, ell);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  VectorXcd x(2 * K.n());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = cplx(nd(rng), nd(rng));
  x /= K.norm(x);
  double logsum = 0.0;
  int counted = 0;
  for (int k = 0; k < iterations; ++k) {
    VectorXcd y = K.apply(x);
    const double ny = K.norm(y);
    if (ny == 0.0) return 0.0;
    if (k >= iterations / 2) logsum += std::log(ny), ++counted;
    x = y / ny;
  }
  return std::exp(logsum / counted);
}

inline ThresholdEstimate estimate_threshold(const ScatteringProblem& pb, const ThresholdOptions& o = {}) {
  if (!(o.xi_lo > 0.0 && o.xi_hi > o.xi_lo) || o.n_probe < 2) throw ConfigError("estimate_threshold: bad window");
  ThresholdEstimate t;
  t.xi = logspace(o.xi_lo, o.xi_hi, static_cast<std::size_t>(o.n_probe));
  for (double xi : t.xi) {
    double rho = 0.0;
    if (!pb.is_free())
      for (int l = 0; l <= o.ell_max; ++l) rho = std::max(rho, contraction_rate(pb, xi, l, o.iterations));
    t.rho.push_back(rho);
    t.C = std::max(t.C, rho * std::sqrt(xi));
  }
  t.M = o.safety * t.C * t.C;
  return t;
}

// ---------------------------------------------------------------------------------------
// sigma_min(I - K Vt) along a frequency grid, with a quadratic dip estimate between samples.

struct SigmaSweep {
  std::vector<double> xi;
  std::vector<int> ells;
  MatrixXd sigma;  // rows: xi, columns: ell
  double min_sigma = std::numeric_limits<double>::infinity();
  double xi_at_min = 0.0;
  int ell_at_min = 0;
  bool near_singular = false;
};

inline SigmaSweep sigma_min_sweep(const ScatteringProblem& pb, double xi_max, double dxi, int ell_max,
                                  unsigned jobs = 1) {
  if (!(xi_max > 0.0 && dxi > 0.0) || ell_max < 0) throw ConfigError("sigma_min_sweep: bad arguments");
  SigmaSweep sw;
  const int nx = static_cast<int>(std::floor(xi_max / dxi + 1e-9)) + 1;
  for (int i = 0; i < nx; ++i) sw.xi.push_back(i * dxi);
  for (int l = 0; l <= ell_max; ++l) sw.ells.push_back(l);
  sw.sigma.resize(nx, ell_max + 1);
  if (pb.is_free()) {  // K Vt = 0
    sw.sigma.setOnes();
    sw.min_sigma = 1.0;
    return sw;
  }
  for (int l = 0; l <= ell_max; ++l) {
    parallel_for(static_cast<std::size_t>(nx), jobs, [&](std::size_t i) {
      ChannelOperator K(pb, sw.xi[i], l);
      VectorXd w;
      Eigen::PartialPivLU<MatrixXcd> lu(detail::weighted_resolvent_matrix(K, w));
      sw.sigma(static_cast<Eigen::Index>(i), l) = detail::smallest_singular_value(lu, 2 * K.n());
    });
    for (int i = 0; i < nx; ++i) {
      double est = sw.sigma(i, l), at = sw.xi[i];
      if (i > 0 && i + 1 < nx && sw.sigma(i, l) < sw.sigma(i - 1, l) && sw.sigma(i, l) <= sw.sigma(i + 1, l)) {
        const double y0 = sw.sigma(i - 1, l), y1 = sw.sigma(i, l), y2 = sw.sigma(i + 1, l);
        const double c2 = 0.5 * (y0 - 2 * y1 + y2), c1 = 0.5 * (y2 - y0);
        if (c2 > 0.0) {
          const double x = -c1 / (2 * c2);
          est = std::max(0.0, y1 + c1 * x + c2 * x * x);
          at = sw.xi[i] + x * dxi;
        }
      }
      if (est < sw.min_sigma) sw.min_sigma = est, sw.xi_at_min = at, sw.ell_at_min = l;
    }
  }
  sw.near_singular = sw.min_sigma < pb.opt.delta_res;
  return sw;
}

// ---------------------------------------------------------------------------------------
// Residual checks of modes against the finite-difference operators of the operators module.

struct ModeResiduals {
  double intertwine_minus = 0.0;  // |L- v - E u| / |u|
  double intertwine_plus = 0.0;   // |L+ u - E v| / |v|
  double h2 = 0.0;                // |H^2 [u; v] + E^2 [u; v]| / |[u; v]| in the diagonal form
  double max() const { return std::max({intertwine_minus, intertwine_plus, h2}); }
};

struct ModeVerifier {
  double omega = 1.0;
  RadialGrid grid;  // ell = 0
  VectorXd V1, V2;
  int margin = 8;   // nodes next to the wall left out (the modes do not vanish there)
  std::map<int, std::pair<PartialWaveOperator, PartialWaveOperator>> ops;

  static ModeVerifier from_problem(const ScatteringProblem& pb, int ell_max, double r_max = 8.0, int n = 399) {
    ModeVerifier mv;
    mv.omega = pb.omega;
    mv.grid = RadialGrid::make_uniform(r_max, n);
    mv.V1 = mv.grid.sample(pb.V1f);
    mv.V2 = mv.grid.sample(pb.V2f);
    for (int l = 0; l <= ell_max; ++l) {
      RadialGrid g = mv.grid.with_ell(l);
      mv.ops.emplace(l, std::make_pair(assemble_operator(g, pb.omega, mv.V1, "L-"),
                                       assemble_operator(g, pb.omega, VectorXd(mv.V1 + mv.V2), "L+")));
    }
    return mv;
  }

  const std::pair<PartialWaveOperator, PartialWaveOperator>& sector(int l) const {
    auto it = ops.find(l);
    if (it == ops.end()) throw ConfigError("ModeVerifier: sector not prepared");
    return it->second;
  }

  double masked_norm(const VectorXcd& f) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i + margin < f.size(); ++i) s += grid.w[static_cast<std::size_t>(i)] * std::norm(f[i]);
    return std::sqrt(s);
  }

  void values(const ScatteringProblem& pb, const SectorMode& m, VectorXcd& u, VectorXcd& v) const {
    mode_values(pb, m, grid.r, u, v);
  }

  ModeResiduals check(const ScatteringProblem& pb, const SectorMode& m) const {
    const auto& [Lm, Lp] = sector(m.ell);
    VectorXcd u, v;
    values(pb, m, u, v);
    const double E = m.energy();
    ModeResiduals r;
    VectorXcd Lv = Lm.apply(v), Lu = Lp.apply(u);
    const double nu = masked_norm(u), nv = masked_norm(v);
    if (nu == 0.0 && nv == 0.0) return r;  // xi = 0 in sectors l > 0: the mode vanishes
    r.intertwine_minus = masked_norm(Lv - E * u) / nu;
    r.intertwine_plus = masked_norm(Lu - E * v) / nv;
    VectorXcd a = Lm.apply(Lu) - E * E * u, b = Lp.apply(Lv) - E * E * v;
    r.h2 = std::sqrt(std::pow(masked_norm(a), 2) + std::pow(masked_norm(b), 2)) / std::sqrt(nu * nu + nv * nv);
    return r;
  }
};

// u recomputed from v by the discrete intertwining u = L- v / E, checked against the channel u.
struct ScalarPair {
  VectorXcd u, v;             // at the verifier nodes
  double consistency = 0.0;   // |u_fd - u| / |u|
};

inline ScalarPair pair_from_scalar(const ScatteringProblem& pb, const ModeVerifier& mv, const SectorMode& m,
                                   double mode_tol = 1e-4) {
  ScalarPair p;
  VectorXcd u;
  mv.values(pb, m, u, p.v);
  p.u = mv.sector(m.ell).first.apply(p.v) / m.energy();
  p.consistency = mv.masked_norm(p.u - u) / mv.masked_norm(u);
  if (p.consistency > 10.0 * mode_tol)
    throw ConsistencyError("pair_from_scalar: intertwining residual too large", p.consistency);
  return p;
}

// ---------------------------------------------------------------------------------------
// Distorted transform of one sector on a field grid:
//   Psi_pm(xi) = (<v_xi, a> -+ i <u_xi, b>)/sqrt 2,
//   a_c = sum_k mu_k u_k (Psi_+ + Psi_-)/sqrt 2,   b_c = i sum_k mu_k v_k (Psi_+ - Psi_-)/sqrt 2,
// with mu_k = (2/pi) xi_k^2 dxi (trapezoid in xi). Under e^{tH} the coefficients evolve as
// Psi_pm -> e^{pm i t E} Psi_pm.

struct XiGrid {
  std::vector<double> xi, mu;
  double dxi = 0.0;
  std::size_t size() const { return xi.size(); }
};

inline XiGrid make_xi_grid(double xi_max, double dxi) {
  if (!(xi_max > 0.0 && dxi > 0.0)) throw ConfigError("make_xi_grid: bad arguments");
  const int n = static_cast<int>(std::ceil(xi_max / dxi - 1e-9));
  XiGrid g;
  g.dxi = xi_max / n;
  for (int k = 0; k <= n; ++k) {
    const double x = k * g.dxi;
    g.xi.push_back(x);
    g.mu.push_back((k == n ? 0.5 : 1.0) * 2.0 / M_PI * x * x * g.dxi);
  }
  return g;
}

struct TransformOptions {
  double xi_max = 0.0;  // 0: max(4 sqrt(omega), 2 M)
  double dxi = 0.015;
  unsigned jobs = 0;
};

struct SpectralCoefficients {
  VectorXcd plus, minus;
};

struct SectorTransform {
  int ell = 0;
  double omega = 0.0;
  double threshold = 0.0;
  XiGrid xi;
  RadialGrid field;  // nodal data live here
  ScatteringProblem problem;
  std::vector<SectorMode> modes;
  MatrixXcd U, V;  // mode values at the field nodes, one column per xi

  SpectralCoefficients forward(const VectorXcd& a, const VectorXcd& b) const {
    const Eigen::Index n = static_cast<Eigen::Index>(field.size());
    if (a.size() != n || b.size() != n) throw ConfigError("SectorTransform: size mismatch");
    VectorXcd wa = a.cwiseProduct(w()), wb = b.cwiseProduct(w());
    VectorXcd pa = V.adjoint() * wa, pb = U.adjoint() * wb;  // <v_k, a>, <u_k, b>
    const cplx I(0.0, 1.0);
    return {(pa - I * pb) / std::sqrt(2.0), (pa + I * pb) / std::sqrt(2.0)};
  }

  std::pair<VectorXcd, VectorXcd> inverse(const SpectralCoefficients& c) const {
    VectorXcd m = Eigen::Map<const VectorXd>(xi.mu.data(), static_cast<Eigen::Index>(xi.size())).cast<cplx>();
    const cplx I(0.0, 1.0);
    VectorXcd sa = m.cwiseProduct(c.plus + c.minus) / std::sqrt(2.0);
    VectorXcd sb = m.cwiseProduct(c.plus - c.minus) * (I / std::sqrt(2.0));
    return {U * sa, V * sb};
  }

  std::pair<VectorXcd, VectorXcd> project(const VectorXcd& a, const VectorXcd& b) const { return inverse(forward(a, b)); }

  // (sum_k mu_k (|Psi_+|^2 + |Psi_-|^2))^{1/2}
  double spectral_norm(const SpectralCoefficients& c) const {
    double s = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) {
      auto i = static_cast<Eigen::Index>(k);
      s += xi.mu[k] * (std::norm(c.plus[i]) + std::norm(c.minus[i]));
    }
    return std::sqrt(s);
  }

  double field_norm(const VectorXcd& a, const VectorXcd& b) const {
    return std::sqrt(std::pow(field.norm(a), 2) + std::pow(field.norm(b), 2));
  }

  // Mode values at other radii (columns per xi).
  void sample(const std::vector<double>& t, MatrixXcd& Ut, MatrixXcd& Vt, unsigned jobs = 0) const {
    const Eigen::Index n = static_cast<Eigen::Index>(t.size());
    Ut.resize(n, static_cast<Eigen::Index>(modes.size()));
    Vt.resize(n, static_cast<Eigen::Index>(modes.size()));
    if (problem.is_free()) {  // u = v = j_l(xi r)
      for (std::size_t k = 0; k < modes.size(); ++k)
        for (Eigen::Index i = 0; i < n; ++i)
          Ut(i, static_cast<Eigen::Index>(k)) = detail::sph_j(ell, xi.xi[k] * t[static_cast<std::size_t>(i)]);
      Vt = Ut;
      return;
    }
    parallel_for(modes.size(), jobs ? jobs : default_jobs(), [&](std::size_t k) {
      VectorXcd u, v;
      mode_values(problem, modes[k], t, u, v);
      Ut.col(static_cast<Eigen::Index>(k)) = u;
      Vt.col(static_cast<Eigen::Index>(k)) = v;
    });
  }

 private:
  VectorXcd w() const {
    return Eigen::Map<const VectorXd>(field.w.data(), static_cast<Eigen::Index>(field.size())).cast<cplx>();
  }
};

inline SectorTransform build_transform(const ScatteringProblem& pb, const RadialGrid& field, double M,
                                       const TransformOptions& o = {}) {
  SectorTransform T;
  T.ell = field.ell;
  T.omega = pb.omega;
  T.threshold = M;
  T.field = field;
  T.problem = pb;
  const double xi_max = o.xi_max > 0.0 ? o.xi_max : std::max(4.0 * std::sqrt(pb.omega), 2.0 * M);
  T.xi = make_xi_grid(xi_max, o.dxi);
  const std::size_t nk = T.xi.size();
  T.modes.resize(nk);
  const Eigen::Index n = static_cast<Eigen::Index>(field.size());
  T.U.resize(n, static_cast<Eigen::Index>(nk));
  T.V.resize(n, static_cast<Eigen::Index>(nk));
  parallel_for(nk, o.jobs ? o.jobs : default_jobs(), [&](std::size_t k) {
    ChannelOperator K(pb, T.xi.xi[k], field.ell);
    T.modes[k] = solve_mode(K, pb, M);
    VectorXcd u, v;
    K.evaluate(T.modes[k].z, field.r, u, v);
    T.U.col(static_cast<Eigen::Index>(k)) = u;
    T.V.col(static_cast<Eigen::Index>(k)) = v;
  });
  return T;
}

// The same coefficients through T F~ P: P = diag(L-^{-1/2}, L-^{1/2}), F~ pairs with
// L-^{1/2} v / sqrt(E), T = [[E^{1/2}, -i E^{-1/2}], [E^{1/2}, i E^{-1/2}]] / sqrt 2. The kernel of L-
// is deflated, so the routes agree for a orthogonal to it.
inline SpectralCoefficients forward_tfp(const SectorTransform& T, const PartialWaveOperator& Lminus, const VectorXcd& a,
                                        const VectorXcd& b, double zero_tol = 1e-6) {
  if (Lminus.n() != static_cast<Eigen::Index>(T.field.size())) throw ConfigError("forward_tfp: grid mismatch");
  const MatrixXd Sp = operator_power_deflated(Lminus.A, 0.5, zero_tol);
  const MatrixXd Sm = operator_power_deflated(Lminus.A, -0.5, zero_tol);
  const VectorXcd Pa = Sm.cast<cplx>() * Lminus.to_sym(a), Pb = Sp.cast<cplx>() * Lminus.to_sym(b);
  const std::size_t nk = T.xi.size();
  SpectralCoefficients c{VectorXcd(nk), VectorXcd(nk)};
  const cplx I(0.0, 1.0);
  for (std::size_t k = 0; k < nk; ++k) {
    auto i = static_cast<Eigen::Index>(k);
    const double E = T.omega + T.xi.xi[k] * T.xi.xi[k];
    VectorXcd phi = Sp.cast<cplx>() * Lminus.to_sym(VectorXcd(T.V.col(i))) / std::sqrt(E);
    const cplx fa = phi.dot(Pa), fb = phi.dot(Pb);  // conjugate-linear in phi
    c.plus[i] = (std::sqrt(E) * fa - I * fb / std::sqrt(E)) / std::sqrt(2.0);
    c.minus[i] = (std::sqrt(E) * fa + I * fb / std::sqrt(E)) / std::sqrt(2.0);
  }
  return c;
}

inline std::pair<VectorXcd, VectorXcd> project_continuous(const SectorTransform& T, const VectorXcd& a,
                                                          const VectorXcd& b) {
  return T.project(a, b);
}

// ---------------------------------------------------------------------------------------
// Symbol bounds of the source f0(x, xi) = e^{-i x.xi} Vt(x, D) e^{i x.xi} with
// Vt(x, D) = (-Delta + omega - V1) V2 + V1 (-Delta + omega):
//   f0 = -Delta V2 - 2 i xi cos(theta) V2' + (xi^2 + omega)(V1 + V2) - V1 V2.
// Reports sup_x <x>^N |d_xi^alpha f0| for |alpha| = 0, 1, 2 and fitted growth exponents.

struct SymbolProbe {
  std::vector<double> xi;
  std::array<std::vector<double>, 3> sup;
  std::array<LinearFit, 3> fit;
  double weight_power = 2.0;
};

inline SymbolProbe symbol_bound_probe(const SolitonProfile& p, const std::vector<double>& xis, double N = 2.0,
                                      double r_max = 15.0, int n_r = 600) {
  if (xis.size() < 2) throw ConfigError("symbol_bound_probe: need at least two frequencies");
  const double w = p.omega;
  struct Pt {
    double r, V1, V2, dV2, lapV2;
  };
  std::vector<Pt> pts;
  for (int i = 1; i <= n_r; ++i) {
    const double r = r_max * i / n_r;
    const double dr = 1e-4;
    auto R = [&](double x) { return detail::interpolate_profile(p, x); };
    const double R0 = R(r), Rp = (R(r + dr) - R(r - dr)) / (2 * dr);
    const double dR = 1e-5 * std::max(R0, 1e-3);
    auto V2 = [&](double x) { return p.nl.V2(std::max(x, 0.0)); };
    const double d1 = (V2(R0 + dR) - V2(R0 - dR)) / (2 * dR);
    const double d2 = (V2(R0 + dR) - 2 * V2(R0) + V2(R0 - dR)) / (dR * dR);
    const double lapR = w * R0 - p.nl.V1(R0) * R0;
    pts.push_back({r, p.nl.V1(R0), V2(R0), d1 * Rp, d2 * Rp * Rp + d1 * lapR});
  }
  auto f0 = [&](const Pt& q, double c, double xi) {
    return cplx(-q.lapV2 + (xi * xi + w) * (q.V1 + q.V2) - q.V1 * q.V2, -2.0 * xi * c * q.dV2);
  };
  SymbolProbe sp;
  sp.xi = xis;
  sp.weight_power = N;
  for (double xi : xis) {
    const double d = 1e-3 * std::max(xi, 1.0);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (const auto& q : pts) {
      const double wt = std::pow(1.0 + q.r * q.r, 0.5 * N);
      for (double c : {-1.0, 1.0}) {
        const cplx fm = f0(q, c, xi - d), f = f0(q, c, xi), fp = f0(q, c, xi + d);
        s0 = std::max(s0, wt * std::abs(f));
        s1 = std::max(s1, wt * std::abs((fp - fm) / (2 * d)));
        s2 = std::max(s2, wt * std::abs((fp - 2.0 * f + fm) / (d * d)));
      }
    }
    sp.sup[0].push_back(s0);
    sp.sup[1].push_back(s1);
    sp.sup[2].push_back(s2);
  }
  for (int a = 0; a < 3; ++a) sp.fit[a] = fit_loglog(xis, sp.sup[a]);
  return sp;
}

}  // namespace satsol
