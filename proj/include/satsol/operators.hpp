#pragma once
// Partial-wave discretizations of L-, L+ and the matrix Hamiltonian H = [[0, L-], [-L+, 0]].
//
// Operators act on radial values u(r_i) of one angular sector. They are stored in the
// symmetric coordinates x_i = sqrt(w_i) u_i, where w_i are the weights of the measure
// r^2 dr, so Euclidean products of stored vectors are weighted L2 products.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "satsol/errors.hpp"
#include "satsol/soliton.hpp"

namespace satsol {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RadialGrid {
  std::vector<double> r;  // interior nodes
  std::vector<double> w;  // weights for r^2 dr
  double h = 0.0;         // spacing (uniform grids)
  double wall = 0.0;      // Dirichlet radius (uniform grids)
  int ell = 0;
  bool uniform = true;

  std::size_t size() const { return r.size(); }

  // r_i = i h, i = 1..n, with the wall at (n+1) h = r_max.
  static RadialGrid make_uniform(double r_max, int n, int ell = 0) {
    if (n < 8) throw ConfigError("RadialGrid: need at least 8 nodes");
    if (!(r_max > 0.0)) throw ConfigError("RadialGrid: r_max must be positive");
    if (ell < 0) throw DomainError("RadialGrid: ell must be nonnegative");
    RadialGrid g;
    g.h = r_max / (n + 1);
    g.wall = r_max;
    g.ell = ell;
    g.r.resize(n);
    g.w.resize(n);
    for (int i = 0; i < n; ++i) {
      g.r[i] = (i + 1) * g.h;
      g.w[i] = g.h * g.r[i] * g.r[i];
    }
    return g;
  }

  // Geometric nodes on [r_min, r_max] with trapezoid weights in r (low-order, used by norm probes).
  static RadialGrid make_geometric(double r_min, double r_max, int n, int ell = 0) {
    if (n < 8 || !(r_min > 0.0 && r_max > r_min)) throw ConfigError("RadialGrid: bad geometric grid");
    RadialGrid g;
    g.uniform = false;
    g.ell = ell;
    g.r = logspace(r_min, r_max, n);
    g.w.resize(n);
    for (int i = 0; i < n; ++i) {
      double left = i == 0 ? g.r[0] : 0.5 * (g.r[i] - g.r[i - 1]);
      double right = i + 1 == n ? 0.0 : 0.5 * (g.r[i + 1] - g.r[i]);
      g.w[i] = (left + right) * g.r[i] * g.r[i];
    }
    g.wall = r_max;
    return g;
  }

  RadialGrid with_ell(int l) const {
    RadialGrid g = *this;
    g.ell = l;
    return g;
  }

  VectorXd nodes() const { return Eigen::Map<const VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())); }
  VectorXd sqrt_weights() const {
    VectorXd s(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) s[static_cast<Eigen::Index>(i)] = std::sqrt(w[i]);
    return s;
  }
  template <class F>
  VectorXd sample(F&& f) const {
    VectorXd v(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) v[static_cast<Eigen::Index>(i)] = f(r[i]);
    return v;
  }
  // Weighted inner product sum w_i conj(a_i) b_i.
  template <class VA, class VB>
  auto dot(const VA& a, const VB& b) const {
    using S = decltype(std::conj(a[0]) * b[0]);
    S acc{};
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto k = static_cast<Eigen::Index>(i);
      acc += w[i] * std::conj(a[k]) * b[k];
    }
    return acc;
  }
  template <class V>
  double norm(const V& a) const {
    return std::sqrt(std::abs(dot(a, a)));
  }
};

enum class Which { Minus, Plus };
inline std::string to_string(Which w) { return w == Which::Minus ? "L-" : "L+"; }

struct PartialWaveOperator {
  RadialGrid grid;
  double omega = 0.0;
  VectorXd V;         // potential subtracted from -Delta + omega
  MatrixXd A;         // symmetric matrix in sqrt-weight coordinates
  std::string tag;    // "L-", "L+", "free", ...

  Eigen::Index n() const { return A.rows(); }
  VectorXd to_sym(const VectorXd& u) const { return grid.sqrt_weights().cwiseProduct(u); }
  VectorXd from_sym(const VectorXd& x) const { return x.cwiseQuotient(grid.sqrt_weights()); }
  Eigen::VectorXcd to_sym(const Eigen::VectorXcd& u) const {
    return grid.sqrt_weights().cast<std::complex<double>>().cwiseProduct(u);
  }
  Eigen::VectorXcd from_sym(const Eigen::VectorXcd& x) const {
    return x.cwiseQuotient(grid.sqrt_weights().cast<std::complex<double>>());
  }
  // Action on nodal values.
  VectorXd apply(const VectorXd& u) const { return from_sym(VectorXd(A * to_sym(u))); }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& u) const { return from_sym(Eigen::VectorXcd(A * to_sym(u))); }
};

// -d^2/dr^2 - (2/r) d/dr + l(l+1)/r^2 + omega - V with the 7-point (6th-order) stencil
// in w = r u. At the origin w(0) = 0 and w(-x) = (-1)^{l+1} w(x); at the wall w = 0 with odd
// reflection. Folding the ghosts back keeps the matrix symmetric.
inline PartialWaveOperator assemble_operator(const RadialGrid& g, double omega, const VectorXd& V, std::string tag) {
  if (!g.uniform) throw ConfigError("assemble_operator: finite differences need a uniform grid");
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  if (V.size() != n) throw ConfigError("assemble_operator: potential size mismatch");
  if (n < 8) throw ConfigError("assemble_operator: need at least 8 nodes");
  static const double c[4] = {490.0, -270.0, 27.0, -2.0};  // -f'' * 180 h^2, offsets 0..3
  const double sc = 1.0 / (180.0 * g.h * g.h);
  const double ll = g.ell * (g.ell + 1.0);
  const double parity = (g.ell % 2 == 0) ? -1.0 : 1.0;
  MatrixXd A = MatrixXd::Zero(n, n);
  // node k (1-based) -> (column, sign), column < 0 when the ghost value is zero
  auto fold = [&](Eigen::Index k) -> std::pair<Eigen::Index, double> {
    if (k == 0 || k == n + 1) return {-1, 0.0};
    if (k < 0) return {-k - 1, parity};
    if (k > n + 1) return {2 * (n + 1) - k - 1, -1.0};
    return {k - 1, 1.0};
  };
  for (Eigen::Index i = 1; i <= n; ++i) {
    const double r = g.r[static_cast<std::size_t>(i - 1)];
    A(i - 1, i - 1) += ll / (r * r) + omega - V[i - 1];
    for (int o = -3; o <= 3; ++o) {
      auto [col, sgn] = fold(i + o);
      if (col >= 0) A(i - 1, col) += sgn * c[std::abs(o)] * sc;
    }
  }
  PartialWaveOperator op;
  op.grid = g;
  op.omega = omega;
  op.V = V;
  op.A = std::move(A);
  op.tag = std::move(tag);
  return op;
}

inline PartialWaveOperator free_operator(const RadialGrid& g, double omega) {
  return assemble_operator(g, omega, VectorXd::Zero(static_cast<Eigen::Index>(g.size())), "free");
}

// The soliton resampled onto an operator grid and polished by Newton's method so that
// the discrete L- annihilates it to round-off.
struct DiscreteSoliton {
  Nonlinearity nl;
  double omega = 0.0;
  RadialGrid grid;  // ell = 0
  VectorXd R, V1, V2;
  int newton_iterations = 0;
  double newton_residual = 0.0;
};

namespace detail {

// Cubic Lagrange interpolation of the profile, exponential tail beyond its grid.
inline double interpolate_profile(const SolitonProfile& p, double r) {
  const double h = p.h();
  const std::size_t n = p.r.size();
  if (r >= p.r.back()) {
    const double rb = p.r.back(), Rb = p.R.back();
    return Rb * rb / r * std::exp(-std::sqrt(p.omega) * (r - rb));
  }
  std::size_t j = static_cast<std::size_t>(r / h);
  j = std::min(std::max<std::size_t>(j, 1), n - 3);
  const double x = r / h - static_cast<double>(j);
  const double f0 = p.R[j - 1], f1 = p.R[j], f2 = p.R[j + 1], f3 = p.R[j + 2];
  return f0 * (-x * (x - 1) * (x - 2) / 6) + f1 * ((x + 1) * (x - 1) * (x - 2) / 2) +
         f2 * (-(x + 1) * x * (x - 2) / 2) + f3 * ((x + 1) * x * (x - 1) / 6);
}

}  // namespace detail

inline DiscreteSoliton discretize_soliton(const SolitonProfile& p, const RadialGrid& grid_in, double tol = 1e-13,
                                          int max_iter = 40) {
  if (!grid_in.uniform) throw ConfigError("discretize_soliton: needs a uniform grid");
  const double decay = 1.0 / std::sqrt(p.omega);
  if (grid_in.wall < 10.0 * decay)
    throw ConfigError("build_L: grid radius is shorter than ten decay lengths of the profile");
  DiscreteSoliton ds;
  ds.nl = p.nl;
  ds.omega = p.omega;
  ds.grid = grid_in.with_ell(0);
  const auto& g = ds.grid;
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = g.r[i] * detail::interpolate_profile(p, g.r[i]);
  auto T = free_operator(g, p.omega).A;  // -w'' + omega w
  auto coefs = [&](const VectorXd& w, VectorXd& V1, VectorXd& V2) {
    V1.resize(n), V2.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double R = w[i] / g.r[i];
      V1[i] = p.nl.V1(R);
      V2[i] = p.nl.V2(R);
    }
  };
  VectorXd V1, V2;
  double res = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    coefs(w, V1, V2);
    VectorXd F = T * w - V1.cwiseProduct(w);
    res = F.cwiseAbs().maxCoeff() / w.cwiseAbs().maxCoeff();
    if (res <= tol) break;
    MatrixXd J = T;
    J.diagonal() -= V1 + V2;
    VectorXd dw = J.partialPivLu().solve(F);
    w -= dw;
    if (!w.allFinite()) throw ConvergenceError("discretize_soliton: Newton diverged");
  }
  if (res > tol) {
    // round-off floor: accept if the residual stagnated near machine precision
    if (res > 1e3 * tol) throw ConvergenceError("discretize_soliton: Newton did not converge");
  }
  coefs(w, V1, V2);
  ds.R = w.cwiseQuotient(g.nodes());
  ds.V1 = V1;
  ds.V2 = V2;
  ds.newton_iterations = it;
  ds.newton_residual = res;
  return ds;
}

inline PartialWaveOperator build_L(const DiscreteSoliton& ds, Which which, int ell) {
  if (ell < 0) throw DomainError("build_L: ell must be nonnegative");
  VectorXd V = which == Which::Minus ? ds.V1 : VectorXd(ds.V1 + ds.V2);
  return assemble_operator(ds.grid.with_ell(ell), ds.omega, V, to_string(which));
}

inline PartialWaveOperator build_L(const SolitonProfile& p, Which which, const RadialGrid& grid) {
  return build_L(discretize_soliton(p, grid), which, grid.ell);
}

// dR/dr at the nodes: the radial part of the translation modes (l = 1). Uses the even
// extension of R, with R(0) from the even polynomial through the first four nodes.
inline VectorXd radial_derivative(const DiscreteSoliton& ds) {
  const auto& g = ds.grid;
  const Eigen::Index n = ds.R.size();
  const double R0 = 1.6 * ds.R[0] - 0.8 * ds.R[1] + (8.0 / 35.0) * ds.R[2] - (1.0 / 35.0) * ds.R[3];
  auto at = [&](Eigen::Index i) -> double {
    if (i == 0) return R0;
    if (i < 0) return ds.R[-i - 1];
    if (i > n) return 0.0;
    return ds.R[i - 1];
  };
  VectorXd d(n);
  for (Eigen::Index k = 1; k <= n; ++k)
    d[k - 1] = (-at(k - 3) + 9.0 * at(k - 2) - 45.0 * at(k - 1) + 45.0 * at(k + 1) - 9.0 * at(k + 2) + at(k + 3)) /
               (60.0 * g.h);
  return d;
}

struct Eigenpairs {
  VectorXd values;
  MatrixXd vectors;  // columns in sqrt-weight coordinates, unit norm
};

inline Eigenpairs discrete_spectrum(const PartialWaveOperator& op, Eigen::Index k) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(op.A);
  if (es.info() != Eigen::Success) throw NumericError("discrete_spectrum: eigensolver failed");
  k = std::min(k, op.n());
  Eigenpairs ep{es.eigenvalues().head(k), es.eigenvectors().leftCols(k)};
  const double scale = std::max(1.0, op.A.norm());
  for (Eigen::Index j = 0; j < k; ++j) {
    double res = (op.A * ep.vectors.col(j) - ep.values[j] * ep.vectors.col(j)).norm();
    if (res > 1e-8 * scale) throw NumericError("discrete_spectrum: eigenpair residual too large");
  }
  return ep;
}

enum class PowerBackend { Eigendecomposition, Contour };

namespace detail {

inline MatrixXd integer_power(const MatrixXd& A, int k) {
  const Eigen::Index n = A.rows();
  MatrixXd base = k >= 0 ? A : MatrixXd(A.partialPivLu().inverse());
  MatrixXd out = MatrixXd::Identity(n, n);
  for (int j = 0; j < std::abs(k); ++j) out = out * base;
  return out;
}

// A^f for 0 < f < 1 from the resolvent integral folded onto the branch cut:
// A^f = (sin(pi f)/pi) A int_0^inf t^{f-1} (t + A)^{-1} dt, with t = e^s and the trapezoid rule in s.
inline MatrixXd fractional_power_contour(const MatrixXd& A, double f, double lmin, double lmax) {
  const Eigen::Index n = A.rows();
  const double step = 0.1;
  const double lo = std::log(lmin) - 36.0 / f, hi = std::log(lmax) + 36.0 / (1.0 - f);
  MatrixXd acc = MatrixXd::Zero(n, n);
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (double s = lo; s <= hi; s += step) {
    const double t = std::exp(s);
    acc += std::pow(t, f) * (A + t * I).partialPivLu().inverse();
  }
  return std::sin(M_PI * f) / M_PI * step * (A * acc);
}

}  // namespace detail

// A^a for symmetric positive definite A (sqrt-weight coordinates).
inline MatrixXd operator_power(const MatrixXd& A, double a, PowerBackend backend = PowerBackend::Eigendecomposition) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw NumericError("operator_power: eigensolver failed");
  const VectorXd& lam = es.eigenvalues();
  if (lam[0] <= 0.0) throw SpectralError("operator_power: operator has a nonpositive eigenvalue", lam[0]);
  if (a == 1.0) return A;
  if (a == 0.0) return MatrixXd::Identity(A.rows(), A.cols());
  if (backend == PowerBackend::Eigendecomposition) {
    VectorXd la = lam.unaryExpr([a](double x) { return std::pow(x, a); });
    return es.eigenvectors() * la.asDiagonal() * es.eigenvectors().transpose();
  }
  const double fl = std::floor(a);
  const double f = a - fl;
  MatrixXd P = detail::integer_power(A, static_cast<int>(fl));
  if (f == 0.0) return P;
  return P * detail::fractional_power_contour(A, f, lam[0], lam[lam.size() - 1]);
}

// A^a on the spectral complement of the eigenvalues with |lambda| <= zero_tol, which are
// mapped to zero. Remaining negative eigenvalues are an error.
inline MatrixXd operator_power_deflated(const MatrixXd& A, double a, double zero_tol) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw NumericError("operator_power: eigensolver failed");
  VectorXd la = es.eigenvalues();
  for (Eigen::Index i = 0; i < la.size(); ++i) {
    if (std::abs(la[i]) <= zero_tol) {
      la[i] = 0.0;
    } else if (la[i] < 0.0) {
      throw SpectralError("operator_power: operator has a negative eigenvalue", la[i]);
    } else {
      la[i] = std::pow(la[i], a);
    }
  }
  return es.eigenvectors() * la.asDiagonal() * es.eigenvectors().transpose();
}

inline MatrixXd operator_power(const PartialWaveOperator& op, double a,
                               PowerBackend backend = PowerBackend::Eigendecomposition) {
  return operator_power(op.A, a, backend);
}

// H = [[0, L-], [-L+, 0]] on [u; v], both components in sqrt-weight coordinates.
struct MatrixHamiltonian {
  PartialWaveOperator Lminus, Lplus;
  MatrixXd H;

  Eigen::Index n() const { return Lminus.n(); }
  int ell() const { return Lminus.grid.ell; }
  double omega() const { return Lminus.omega; }
};

inline MatrixHamiltonian assemble_hamiltonian(PartialWaveOperator Lm, PartialWaveOperator Lp) {
  if (Lm.n() != Lp.n() || Lm.grid.ell != Lp.grid.ell) throw ConfigError("assemble_hamiltonian: sector mismatch");
  const Eigen::Index n = Lm.n();
  MatrixHamiltonian mh;
  mh.H = MatrixXd::Zero(2 * n, 2 * n);
  mh.H.topRightCorner(n, n) = Lm.A;
  mh.H.bottomLeftCorner(n, n) = -Lp.A;
  mh.Lminus = std::move(Lm);
  mh.Lplus = std::move(Lp);
  return mh;
}

inline MatrixHamiltonian build_hamiltonian(const DiscreteSoliton& ds, int ell) {
  return assemble_hamiltonian(build_L(ds, Which::Minus, ell), build_L(ds, Which::Plus, ell));
}

// Generalized null space of H in one sector, by Jordan chains started from the kernels of L+-.
struct NullSpace {
  MatrixXd right, left;            // columns in sqrt-weight coordinates
  std::vector<int> chain_lengths;  // one entry per chain
  std::vector<double> seed_eigenvalues;
  int dimension() const { return static_cast<int>(right.cols()); }
};

namespace detail {

struct PseudoInverse {
  MatrixXd V;
  VectorXd lam;
  double cut;
  VectorXd solve(const VectorXd& b) const {
    VectorXd c = V.transpose() * b;
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = std::abs(lam[i]) <= cut ? 0.0 : c[i] / lam[i];
    return V * c;
  }
};

}  // namespace detail

struct NullSpaceOptions {
  double null_tol = 1e-4;   // |eigenvalue| of L+- treated as zero
  double chain_tol = 1e-3;  // relative solvability residual of H x = y
  int max_order = 4;
};

inline NullSpace generalized_null_space(const MatrixHamiltonian& mh, const NullSpaceOptions& opt = {}) {
  const Eigen::Index n = mh.n();
  Eigen::SelfAdjointEigenSolver<MatrixXd> em(mh.Lminus.A), ep(mh.Lplus.A);
  detail::PseudoInverse Pm{em.eigenvectors(), em.eigenvalues(), opt.null_tol};
  detail::PseudoInverse Pp{ep.eigenvectors(), ep.eigenvalues(), opt.null_tol};
  auto stack = [n](const VectorXd& a, const VectorXd& b) {
    VectorXd x(2 * n);
    x << a, b;
    return x;
  };
  // H[a;b] = [L- b; -L+ a],   H^T[a;b] = [-L+ b; L- a]
  auto solve_H = [&](const VectorXd& y) { return stack(-Pp.solve(y.tail(n)), Pm.solve(y.head(n))); };
  auto solve_HT = [&](const VectorXd& y) { return stack(Pm.solve(y.tail(n)), -Pp.solve(y.head(n))); };
  // ker H = ker L+ (+) ker L- as [a; 0] and [0; b]; for H^T the blocks swap places
  auto seeds = [&](bool transpose) {
    std::vector<std::pair<VectorXd, double>> s;
    const VectorXd z = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(ep.eigenvalues()[i]) <= opt.null_tol) {
        VectorXd a = ep.eigenvectors().col(i);
        s.push_back({transpose ? stack(z, a) : stack(a, z), ep.eigenvalues()[i]});
      }
      if (std::abs(em.eigenvalues()[i]) <= opt.null_tol) {
        VectorXd b = em.eigenvectors().col(i);
        s.push_back({transpose ? stack(b, z) : stack(z, b), em.eigenvalues()[i]});
      }
    }
    return s;
  };
  auto build = [&](bool transpose, std::vector<int>& lengths) {
    std::vector<VectorXd> cols;
    for (auto& [x0, lam] : seeds(transpose)) {
      VectorXd top = x0;
      cols.push_back(top);
      int len = 1;
      while (len < opt.max_order) {
        VectorXd x = transpose ? solve_HT(top) : solve_H(top);
        VectorXd Hx = transpose ? VectorXd(mh.H.transpose() * x) : VectorXd(mh.H * x);
        if ((Hx - top).norm() > opt.chain_tol * top.norm()) break;
        if (x.norm() == 0.0) break;
        top = x / x.norm();
        cols.push_back(top);
        ++len;
      }
      lengths.push_back(len);
    }
    MatrixXd M(2 * n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) M.col(static_cast<Eigen::Index>(j)) = cols[j];
    return M;
  };
  NullSpace ns;
  std::vector<int> left_lengths;
  ns.right = build(false, ns.chain_lengths);
  ns.left = build(true, left_lengths);
  for (auto& [x, lam] : seeds(false)) ns.seed_eigenvalues.push_back(lam);
  if (ns.left.cols() != ns.right.cols())
    throw NumericError("generalized_null_space: left and right chains have different total length");
  return ns;
}

// Biorthogonal spectral projector X (Y^T X)^{-1} Y^T onto span(X) along ker(Y^T).
inline MatrixXd biorthogonal_projector(const MatrixXd& X, const MatrixXd& Y) {
  if (X.cols() == 0) return MatrixXd::Zero(X.rows(), X.rows());
  MatrixXd G = Y.transpose() * X;
  Eigen::FullPivLU<MatrixXd> lu(G);
  if (!lu.isInvertible()) throw NumericError("biorthogonal_projector: pairing matrix is singular");
  return X * lu.solve(Y.transpose());
}

// Eigenvalues of H after removing the generalized null space, sorted by |value|.
inline std::vector<std::complex<double>> deflated_eigenvalues(const MatrixHamiltonian& mh, const NullSpace& ns) {
  MatrixXd Pd = biorthogonal_projector(ns.right, ns.left);
  MatrixXd Q = MatrixXd::Identity(mh.H.rows(), mh.H.cols()) - Pd;
  MatrixXd Hc = Q * mh.H * Q;
  Eigen::EigenSolver<MatrixXd> es(Hc, false);
  if (es.info() != Eigen::Success) throw NumericError("deflated_eigenvalues: eigensolver failed");
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
  return ev;
}

}  // namespace satsol
