#pragma once
// Limiting-absorption kernels of -Delta - mu^2 and of the fourth-order operator
// (-Delta - mu^2)(-Delta + 2 omega + mu^2), their partial-wave integral operators,
// and an L^{4/3} -> L^4 norm probe for the composed scattering operator.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <Eigen/Dense>

#include "satsol/errors.hpp"
#include "satsol/numerics.hpp"
#include "satsol/operators.hpp"

namespace satsol {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// Normalizations fixed by (-Delta - mu^2) G f = f (standard 3D Fourier convention).
inline constexpr double c_G = 1.0 / (4.0 * M_PI);
inline constexpr double c_K = 1.0 / (8.0 * M_PI);

enum class Branch { Plus, Minus };

struct KernelParams {
  double mu = 0.0;
  double omega = 1.0;
  Branch sign = Branch::Plus;

  void validate() const {
    if (!(omega > 0.0)) throw DomainError("KernelParams: omega must be positive");
    if (!(mu >= 0.0)) throw DomainError("KernelParams: mu must be nonnegative");
  }
  double kappa() const { return std::sqrt(mu * mu + 2.0 * omega); }
  double s() const { return sign == Branch::Plus ? 1.0 : -1.0; }
};

inline cplx helmholtz_kernel(const KernelParams& p, double r) {
  p.validate();
  if (!(r > 0.0)) throw DomainError("helmholtz_kernel: singular at r = 0");
  return c_G * std::exp(cplx(0.0, p.s() * p.mu * r)) / r;
}

inline cplx fourth_order_kernel(const KernelParams& p, double r) {
  p.validate();
  if (r < 0.0) throw DomainError("fourth_order_kernel: r must be nonnegative");
  const double k = p.kappa(), pref = c_K / (p.mu * p.mu + p.omega);
  if (r == 0.0) return pref * cplx(k, p.s() * p.mu);
  // expm1 forms keep the difference accurate for small r
  const double th = p.s() * p.mu * r, sh = std::sin(0.5 * th);
  const cplx em1(-2.0 * sh * sh, std::sin(th));
  return pref * (em1 - std::expm1(-k * r)) / r;
}

namespace detail {

// (1/(4 pi^2 i r)) int_R k e^{ikr} / symbol(k) dk, with the real line rotated onto the rays
// arg k = theta and pi - theta. The rays are damped; the crossed pole at k = s mu contributes
// an explicit residue.
template <class Sym, class Res>
cplx contour_inverse(Sym&& symbol, Res&& residue, double r, double theta = M_PI / 4) {
  boost::math::quadrature::exp_sinh<double> es;
  const cplx e1 = std::polar(1.0, theta), e2 = std::polar(1.0, M_PI - theta);
  auto g = [&](cplx k) { return k * std::exp(cplx(0.0, 1.0) * k * r) / symbol(k); };
  auto re = [&](double t) { return (g(t * e1) * e1 - g(t * e2) * e2).real(); };
  auto im = [&](double t) { return (g(t * e1) * e1 - g(t * e2) * e2).imag(); };
  cplx ray(es.integrate(re, 1e-13), es.integrate(im, 1e-13));
  // original contour = rays + 2 pi i (residues between the real axis and the rays)
  cplx total = ray + cplx(0.0, 2.0 * M_PI) * residue(r);
  return total / (cplx(0.0, 4.0 * M_PI * M_PI) * r);
}

}  // namespace detail

// Independent quadrature of the inverse Fourier transform of 1/(|k|^2 - mu^2 -+ i0).
inline cplx helmholtz_kernel_oracle(const KernelParams& p, double r) {
  p.validate();
  if (!(p.mu > 0.0 && r > 0.0)) throw DomainError("kernel oracle: needs mu > 0 and r > 0");
  const double s = p.s(), mu = p.mu;
  auto sym = [&](cplx k) { return k * k - mu * mu; };
  // pole at k = s mu lies inside the rotated sector (above the real axis for Plus,
  // at -mu above the axis for Minus): residue of k e^{ikr}/((k - k0)(k + k0)) is e^{i k0 r}/2
  auto res = [&](double rr) { return 0.5 * std::exp(cplx(0.0, s * mu * rr)); };
  return detail::contour_inverse(sym, res, r);
}

inline cplx fourth_order_kernel_oracle(const KernelParams& p, double r) {
  p.validate();
  if (!(p.mu > 0.0 && r > 0.0)) throw DomainError("kernel oracle: needs mu > 0 and r > 0");
  const double s = p.s(), mu = p.mu, k2 = p.kappa() * p.kappa();
  auto sym = [&](cplx k) { return (k * k - mu * mu) * (k * k + k2); };
  auto res = [&](double rr) { return 0.5 * std::exp(cplx(0.0, s * mu * rr)) / (mu * mu + k2); };
  return detail::contour_inverse(sym, res, r);
}

// ---------------------------------------------------------------------------------------
// Partial-wave integral operators  (K f)(r) = int_0^inf k_l(r, s) f(s) s^2 ds with
// semi-separable kernels k_l(r, s) = phi(r_<) chi(r_>) e^{-alpha (r_> - r_<)}.

namespace detail {

inline double sph_j(int l, double x) { return std::sph_bessel(static_cast<unsigned>(l), x); }
inline double sph_y(int l, double x) { return std::sph_neumann(static_cast<unsigned>(l), x); }

// e^{-x} i_l(x) and e^{x} k_l(x), k_l(x) = sqrt(2/(pi x)) K_{l+1/2}(x).
inline double scaled_i(int l, double x) {
  if (x == 0.0) return l == 0 ? 1.0 : 0.0;
  if (x < 300.0) return std::sqrt(M_PI / (2 * x)) * boost::math::cyl_bessel_i(l + 0.5, x) * std::exp(-x);
  double sum = 0.0, c = 1.0;
  for (int k = 0; k <= l; ++k) {
    if (k > 0) c *= double((l + k) * (l - k + 1)) / k / (-2.0 * x);
    sum += c;
  }
  return sum / (2 * x);
}
inline double scaled_k(int l, double x) {
  double sum = 0.0, c = 1.0;
  for (int k = 0; k <= l; ++k) {
    if (k > 0) c *= double((l + k) * (l - k + 1)) / k / (2.0 * x);
    sum += c;
  }
  return sum / x;
}

}  // namespace detail

enum class WaveKind { Outgoing, Yukawa };

// One semi-separable term: coef * phi(r<) chi(r>) e^{-alpha (r> - r<)}.
struct KernelTerm {
  WaveKind kind = WaveKind::Outgoing;
  double k = 0.0;  // mu (outgoing) or kappa (Yukawa)
  Branch sign = Branch::Plus;
  cplx coef = 1.0;

  double alpha() const { return kind == WaveKind::Yukawa ? k : 0.0; }
  cplx phi(int l, double r) const {
    if (kind == WaveKind::Yukawa) return detail::scaled_i(l, k * r);
    if (k == 0.0) return std::pow(r, l);
    return detail::sph_j(l, k * r);
  }
  cplx chi(int l, double r) const {
    if (kind == WaveKind::Yukawa) return k * detail::scaled_k(l, k * r);
    if (k == 0.0) return std::pow(r, -l - 1) / (2.0 * l + 1.0);
    const double s = sign == Branch::Plus ? 1.0 : -1.0;
    const double x = k * r;
    return cplx(0.0, s * k) * cplx(detail::sph_j(l, x), s * detail::sph_y(l, x));
  }
};

// Partial-wave form of a radial convolution kernel as a sum of semi-separable terms.
struct PartialWaveKernel {
  std::vector<KernelTerm> terms;

  // e^{i mu |x-y|}/(4 pi |x-y|)
  static PartialWaveKernel helmholtz(const KernelParams& p) {
    p.validate();
    return {{KernelTerm{WaveKind::Outgoing, p.mu, p.sign, 1.0}}};
  }
  // e^{-kappa |x-y|}/(4 pi |x-y|)
  static PartialWaveKernel yukawa(double kappa) {
    if (!(kappa > 0.0)) throw DomainError("yukawa kernel: kappa must be positive");
    return {{KernelTerm{WaveKind::Yukawa, kappa, Branch::Plus, 1.0}}};
  }
  // fourth_order_kernel = (G - Y)/(2 (mu^2 + omega)), Y with kappa = sqrt(mu^2 + 2 omega)
  static PartialWaveKernel fourth_order(const KernelParams& p) {
    p.validate();
    const double c = 0.5 / (p.mu * p.mu + p.omega);
    return {{KernelTerm{WaveKind::Outgoing, p.mu, p.sign, c}, KernelTerm{WaveKind::Yukawa, p.kappa(), Branch::Plus, -c}}};
  }
};

// Radial operator of a PartialWaveKernel on the nodes of a grid. The cumulative integrals
// int_0^r phi f s^2 and int_r^R chi f s^2 are accumulated cell by cell (cells are the gaps
// between 0, r_1, ..., r_n). On each cell f is replaced by its quintic interpolant through six
// neighbouring nodes (cubic through four on non-uniform grids) and the remaining factor, phi s^2 or chi s^2 together with the scaling
// exponential, is integrated by 8-point Gauss-Legendre. This keeps the small-r behaviour
// s^{l+2} exact, which the 1/r^{l+1} growth of chi would otherwise amplify.
struct PartialWaveConvolution {
  static constexpr int kStencil = 6;
  PartialWaveKernel kernel;
  int ell = 0;
  std::vector<double> x;                     // 0, r_1, ..., r_n
  std::vector<std::array<int, kStencil>> stencil;  // per cell, node indices 1..n
  std::vector<std::array<double, kStencil>> pos;   // interpolation abscissae (mirrored nodes are negative)
  std::vector<std::array<double, kStencil>> sgn;   // parity factor of mirrored nodes
  struct TermData {
    std::vector<cplx> phi, chi;              // at x
    std::vector<std::array<cplx, kStencil>> wf, wb;  // per cell
    std::vector<double> decay;               // e^{-alpha (x_{j+1} - x_j)}
  };
  std::vector<TermData> data;
  bool constant_first = false;
  int width = kStencil;  // slots past width carry zero weight

  // Interpolation basis of cell j at s.
  double basis(int j, int q, double s) const {
    if (constant_first && j == 0) return q == 0 ? 1.0 : 0.0;
    if (q >= width) return 0.0;
    double L = 1.0;
    for (int o = 0; o < width; ++o)
      if (o != q) L *= (s - pos[j][o]) / (pos[j][q] - pos[j][o]);
    return L;
  }

  PartialWaveConvolution(PartialWaveKernel k, const RadialGrid& g) : kernel(std::move(k)), ell(g.ell) {
    if (ell < 0) throw DomainError("convolve_partial_wave: ell must be nonnegative");
    if (g.size() < kStencil) throw ConfigError("convolve_partial_wave: grid has too few nodes");
    x.reserve(g.size() + 1);
    x.push_back(0.0);
    x.insert(x.end(), g.r.begin(), g.r.end());
    const int m = static_cast<int>(x.size()) - 1;
    // On strongly graded grids the cell [0, r_1] is much wider than the first stencil;
    // extrapolation there would amplify node noise, so f is held constant instead.
    constant_first = x[1] > x[4] - x[1];
    // On uniform grids the stencils near the origin stay centred by mirroring nodes with
    // f(-r) = (-1)^l f(r), the parity of sector functions r^l * (even function).
    const bool mirror = g.uniform && !constant_first;
    // High-order stencils on graded grids oscillate across the changing spacing
    if (!g.uniform) width = 4;
    const double par = ell % 2 == 0 ? 1.0 : -1.0;
    stencil.resize(m);
    pos.resize(m);
    sgn.resize(m);
    for (int j = 0; j < m; ++j) {
      int s0 = j - width / 2 + 1;
      if (!mirror) s0 = std::max(s0, 1);
      s0 = std::min(s0, m - width + 1);
      stencil[j].fill(1);
      pos[j].fill(0.0);
      sgn[j].fill(0.0);
      int k = s0;
      for (int q = 0; q < width; ++q, ++k) {
        if (k == 0) ++k;  // the origin is not a node
        const int idx = std::abs(k);
        stencil[j][q] = idx;
        pos[j][q] = k > 0 ? x[idx] : -x[idx];
        sgn[j][q] = k > 0 ? 1.0 : par;
      }
    }
    const double* gx = gauss_x();
    const double* gw = gauss_w();
    for (const auto& t : kernel.terms) {
      TermData d;
      const double al = t.alpha();
      d.phi.resize(x.size());
      d.chi.resize(x.size());
      for (int i = 1; i <= m; ++i) d.phi[i] = t.phi(ell, x[i]), d.chi[i] = t.chi(ell, x[i]);
      d.wf.resize(m);
      d.wb.resize(m);
      d.decay.resize(m);
      for (int j = 0; j < m; ++j) {
        const double a = x[j], b = x[j + 1], hc = b - a;
        d.decay[j] = al > 0 ? std::exp(-al * hc) : 1.0;
        std::array<cplx, kStencil> wf{}, wb{};
        for (int gq = 0; gq < 8; ++gq) {
          const double s = a + 0.5 * hc * (gx[gq] + 1.0), ww = 0.5 * hc * gw[gq];
          const cplx pf = t.phi(ell, s) * s * s * (al > 0 ? std::exp(-al * (b - s)) : 1.0);
          const cplx pb = j == 0 ? cplx(0.0) : t.chi(ell, s) * s * s * (al > 0 ? std::exp(-al * (s - a)) : 1.0);
          for (int q = 0; q < kStencil; ++q) {
            const double L = basis(j, q, s);
            wf[q] += ww * L * pf;
            wb[q] += ww * L * pb;
          }
        }
        for (int q = 0; q < kStencil; ++q) wf[q] *= sgn[j][q], wb[q] *= sgn[j][q];
        d.wf[j] = wf;
        d.wb[j] = wb;
      }
      data.push_back(std::move(d));
    }
  }

  static const double* gauss_x() {
    static const double v[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                0.7966664774136267,  0.9602898564975363};
    return v;
  }
  static const double* gauss_w() {
    static const double v[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                0.2223810344533745, 0.1012285362903763};
    return v;
  }

  std::size_t size() const { return x.size() - 1; }

  // Optionally returns, per term, coef * int_0^{r_n} phi f s^2 e^{-alpha (r_n - s)} ds, which fixes
  // the exterior solution coef^{-1} * moment * chi(r) e^{-alpha (r - r_n)} beyond the last node.
  VectorXcd apply(const VectorXcd& f, std::vector<cplx>* moments = nullptr) const {
    const int m = static_cast<int>(x.size()) - 1;
    if (f.size() != m) throw ConfigError("convolve_partial_wave: input size mismatch");
    VectorXcd out = VectorXcd::Zero(m);
    if (moments) moments->assign(kernel.terms.size(), 0.0);
    std::vector<cplx> F(m + 1), B(m + 1);
    for (std::size_t t = 0; t < kernel.terms.size(); ++t) {
      const auto& d = data[t];
      F[0] = 0.0;
      for (int j = 0; j < m; ++j) {
        cplx acc = F[j] * d.decay[j];
        for (int q = 0; q < kStencil; ++q) acc += d.wf[j][q] * f[stencil[j][q] - 1];
        F[j + 1] = acc;
      }
      B[m] = 0.0;
      for (int j = m - 1; j >= 1; --j) {
        cplx acc = B[j + 1] * d.decay[j];
        for (int q = 0; q < kStencil; ++q) acc += d.wb[j][q] * f[stencil[j][q] - 1];
        B[j] = acc;
      }
      const cplx c = kernel.terms[t].coef;
      for (int i = 1; i <= m; ++i) out[i - 1] += c * (d.chi[i] * F[i] + d.phi[i] * B[i]);
      if (moments) (*moments)[t] = c * F[m];
    }
    return out;
  }

  // (K f)(t) at arbitrary radii t >= 0, with f known at the nodes and zero beyond r_n. Targets
  // between nodes get partial-cell integrals; beyond r_n the exterior form is exact.
  VectorXcd evaluate_at(const VectorXcd& f, const std::vector<double>& targets) const {
    const int m = static_cast<int>(x.size()) - 1;
    if (f.size() != m) throw ConfigError("convolve_partial_wave: input size mismatch");
    const double* gx = gauss_x();
    const double* gw = gauss_w();
    VectorXcd out = VectorXcd::Zero(static_cast<Eigen::Index>(targets.size()));
    std::vector<cplx> F(m + 1), B(m + 1);
    for (std::size_t t = 0; t < kernel.terms.size(); ++t) {
      const auto& d = data[t];
      const auto& term = kernel.terms[t];
      const double al = term.alpha();
      F[0] = 0.0;
      for (int j = 0; j < m; ++j) {
        cplx acc = F[j] * d.decay[j];
        for (int q = 0; q < kStencil; ++q) acc += d.wf[j][q] * f[stencil[j][q] - 1];
        F[j + 1] = acc;
      }
      B[m] = 0.0;
      for (int j = m - 1; j >= 0; --j) {
        cplx acc = B[j + 1] * d.decay[j];
        for (int q = 0; q < kStencil; ++q) acc += d.wb[j][q] * f[stencil[j][q] - 1];
        B[j] = acc;
      }
      // B[0] above omits the first cell (its chi weights are zero); it is rebuilt per target
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const double tau = targets[k];
        if (!(tau >= 0.0)) throw DomainError("convolve_partial_wave: radii must be nonnegative");
        cplx val;
        if (tau >= x[m]) {
          val = term.chi(ell, tau) * F[m] * (al > 0 ? std::exp(-al * (tau - x[m])) : 1.0);
        } else {
          int j = static_cast<int>(std::upper_bound(x.begin(), x.end(), tau) - x.begin()) - 1;
          const double a = x[j], b = x[j + 1];
          auto fint = [&](double s) {
            cplx p = 0.0;
            for (int q = 0; q < kStencil; ++q) p += basis(j, q, s) * sgn[j][q] * f[stencil[j][q] - 1];
            return p;
          };
          cplx Ft = F[j] * (al > 0 ? std::exp(-al * (tau - a)) : 1.0);
          cplx Bt = B[j + 1] * (al > 0 ? std::exp(-al * (b - tau)) : 1.0);
          if (tau > a) {
            const double hc = tau - a;
            for (int gq = 0; gq < 8; ++gq) {
              const double s = a + 0.5 * hc * (gx[gq] + 1.0), ww = 0.5 * hc * gw[gq];
              Ft += ww * term.phi(ell, s) * s * s * (al > 0 ? std::exp(-al * (tau - s)) : 1.0) * fint(s);
            }
          }
          const double hc = b - tau;
          for (int gq = 0; gq < 8; ++gq) {
            const double s = tau + 0.5 * hc * (gx[gq] + 1.0), ww = 0.5 * hc * gw[gq];
            Bt += ww * term.chi(ell, s) * s * s * (al > 0 ? std::exp(-al * (s - tau)) : 1.0) * fint(s);
          }
          val = term.phi(ell, tau) * Bt;
          if (tau > 0.0) val += term.chi(ell, tau) * Ft;
        }
        out[static_cast<Eigen::Index>(k)] += term.coef * val;
      }
    }
    return out;
  }

  MatrixXcd matrix() const {
    const Eigen::Index n = static_cast<Eigen::Index>(size());
    MatrixXcd M(n, n);
    VectorXcd e = VectorXcd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      e[k] = 1.0;
      M.col(k) = apply(e);
      e[k] = 0.0;
    }
    return M;
  }
};

inline VectorXcd convolve_partial_wave(const PartialWaveKernel& k, const VectorXcd& f, const RadialGrid& g) {
  return PartialWaveConvolution(k, g).apply(f);
}

// ---------------------------------------------------------------------------------------
// L^{4/3} -> L^4 norm probe of the composed operator  T = diag(G_mu, Y_kappa) * Vt  in the
// two-channel form of the fourth-order scattering problem, restricted to radial (l = 0) inputs.
// Vt = (1/2) [[2 V1 + V2, V2], [V2, 2 V1 + V2]].

struct NormProbeOptions {
  double r_support = 4.0;     // inputs live where the potential does
  double r_inner = 0.05;      // geometric part of the grid
  int n_inner = 120;
  double h_outer = 0.01;      // uniform spacing beyond r_inner (resolves mu <= 64)
  int iterations = 60;
  int restarts = 4;
  std::uint64_t seed = 0;
  double tol = 1e-7;
  double p = 4.0 / 3.0, q = 4.0;
};

struct NormProbeRow {
  double mu = 0.0;
  double norm_est = 0.0;
  int iterations = 0;
};

struct NormProbeResult {
  std::vector<NormProbeRow> rows;
  LinearFit fit;              // log(norm) against log(mu)
  double window_lo = 0.0, window_hi = 0.0;
};

namespace detail {

inline RadialGrid probe_grid(const NormProbeOptions& o) {
  std::vector<double> r = logspace(1e-4, o.r_inner, static_cast<std::size_t>(o.n_inner));
  for (double x = o.r_inner + o.h_outer; x <= o.r_support + 1e-12; x += o.h_outer) r.push_back(x);
  RadialGrid g;
  g.uniform = false;
  g.r = r;
  g.w.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    double left = i == 0 ? r[0] : 0.5 * (r[i] - r[i - 1]);
    double right = i + 1 == r.size() ? 0.5 * (r[i] - r[i - 1]) : 0.5 * (r[i + 1] - r[i]);
    g.w[i] = (left + right) * r[i] * r[i];
  }
  g.wall = r.back();
  return g;
}

}  // namespace detail

template <class F1, class F2>
NormProbeResult mapping_norm_probe(const std::vector<double>& mus, double omega, F1&& V1, F2&& V2,
                                   const NormProbeOptions& o = {}) {
  if (mus.empty()) throw DomainError("mapping_norm_probe: no frequencies");
  for (double mu : mus)
    if (!(mu >= 1.0)) throw DomainError("mapping_norm_probe: mu must be >= 1");
  const RadialGrid g = detail::probe_grid(o);
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  VectorXd a(n), b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v1 = V1(g.r[i]), v2 = V2(g.r[i]);
    a[i] = 0.5 * (2 * v1 + v2);
    b[i] = 0.5 * v2;
  }
  // 3D L^p weights (4 pi r^2 dr) on the input/output nodes
  VectorXd wn = 4.0 * M_PI * Eigen::Map<const VectorXd>(g.w.data(), n);
  const double R = g.r.back();
  NormProbeResult res;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> nd;
  for (double mu : mus) {
    KernelParams kp{mu, omega, Branch::Plus};
    PartialWaveConvolution Gc(PartialWaveKernel::helmholtz(kp), g), Yc(PartialWaveKernel::yukawa(kp.kappa()), g);
    MatrixXcd G = Gc.matrix(), Y = Yc.matrix();
    // exterior of the outgoing channel: chi(r) * moment with |chi| = 1/r for l = 0,
    // so int_R^inf |.|^q 4 pi r^2 dr = 4 pi |moment|^q R^{3-q}/(q-3)
    Eigen::RowVectorXcd mom(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      VectorXcd e = VectorXcd::Zero(n);
      e[k] = 1.0;
      std::vector<cplx> m;
      Gc.apply(e, &m);
      mom[k] = m[0];
    }
    const double w_tail = 4.0 * M_PI * std::pow(R, 3.0 - o.q) / (o.q - 3.0);
    // T: (s, d) -> (G(a s + b d), Y(b s + a d), tail moment)
    MatrixXcd T = MatrixXcd::Zero(2 * n + 1, 2 * n);
    T.block(0, 0, n, n) = G * a.asDiagonal();
    T.block(0, n, n, n) = G * b.asDiagonal();
    T.block(n, 0, n, n) = Y * b.asDiagonal();
    T.block(n, n, n, n) = Y * a.asDiagonal();
    T.block(2 * n, 0, 1, n) = mom * a.asDiagonal();
    T.block(2 * n, n, 1, n) = mom * b.asDiagonal();
    VectorXd win(2 * n), wout(2 * n + 1);
    win << wn, wn;
    wout << wn, wn, w_tail;
    auto pnorm = [](const VectorXcd& v, const VectorXd& w, double p) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) s += w[i] * std::pow(std::abs(v[i]), p);
      return std::pow(s, 1.0 / p);
    };
    auto dual = [](const VectorXcd& v, double p) {
      VectorXcd d(v.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        double m = std::abs(v[i]);
        d[i] = m == 0.0 ? cplx(0.0) : std::pow(m, p - 2.0) * v[i];
      }
      return d;
    };
    const double pd = o.p / (o.p - 1.0);
    // adjoint with respect to the weighted pairings: T* = Win^{-1} T^H Wout
    NormProbeRow row;
    row.mu = mu;
    bool converged = false;
    for (int rs = 0; rs < o.restarts; ++rs) {
      VectorXcd x(2 * n);
      if (rs == 0) {
        // concentrated start at scale 1/mu in the first channel
        for (Eigen::Index i = 0; i < n; ++i) x[i] = std::exp(-std::pow(mu * g.r[i], 2)), x[n + i] = 0.0;
      } else {
        for (Eigen::Index i = 0; i < 2 * n; ++i) x[i] = cplx(nd(rng), nd(rng));
      }
      x /= pnorm(x, win, o.p);
      double est = 0.0;
      int it = 0;
      for (; it < o.iterations; ++it) {
        VectorXcd y = T * x;
        double e = pnorm(y, wout, o.q);
        VectorXcd z = dual(y, o.q).cwiseProduct(wout.cast<cplx>());
        VectorXcd u = (T.adjoint() * z).cwiseQuotient(win.cast<cplx>());
        VectorXcd xn = dual(u, pd);
        double nx = pnorm(xn, win, o.p);
        if (!(nx > 0.0) || !std::isfinite(nx)) throw NumericError("mapping_norm_probe: power iteration broke down");
        x = xn / nx;
        if (it > 0 && std::abs(e - est) <= o.tol * e) {
          est = e;
          converged = true;
          break;
        }
        est = e;
      }
      if (est > row.norm_est) row.norm_est = est, row.iterations = it;
    }
    if (!converged) throw NumericError("mapping_norm_probe: power iteration did not converge");
    res.rows.push_back(row);
  }
  std::vector<double> m, v;
  for (auto& r : res.rows) m.push_back(r.mu), v.push_back(r.norm_est);
  res.window_lo = *std::min_element(m.begin(), m.end());
  res.window_hi = *std::max_element(m.begin(), m.end());
  if (m.size() >= 2) res.fit = fit_loglog(m, v);
  return res;
}

// Reference probe potential.
inline double reference_potential(double r) { return std::exp(-r * r); }

}  // namespace satsol
