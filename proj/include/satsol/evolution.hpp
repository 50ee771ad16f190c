#pragma once
// Linearized flow e^{tH} P_c in one partial-wave sector. Two backends: the distorted transform
// (coefficients pick up e^{+-itE}, E = omega + xi^2) and the dense matrix exponential of H with the
// generalized null space removed biorthogonally. On top of them: sup-norm decay fits, the moment
// projection, the dispersive estimate suite and Strichartz norms.
//
// Fields are pairs (a, b) of nodal values; the pointwise modulus is (|a|^2 + |b|^2)^{1/2} and all
// spatial integrals use the grid measure r^2 dr.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "satsol/distorted.hpp"
#include "satsol/operators.hpp"

namespace satsol {

using FieldPair = std::pair<VectorXcd, VectorXcd>;

namespace detail {

inline VectorXd modulus(const FieldPair& f) {
  return (f.first.cwiseAbs2() + f.second.cwiseAbs2()).cwiseSqrt();
}

inline FieldPair synthesize(const XiGrid& xi, const SpectralCoefficients& c, const MatrixXcd& U, const MatrixXcd& V) {
  VectorXcd m = Eigen::Map<const VectorXd>(xi.mu.data(), static_cast<Eigen::Index>(xi.size())).cast<cplx>();
  const cplx I(0.0, 1.0);
  VectorXcd sa = m.cwiseProduct(c.plus + c.minus) / std::sqrt(2.0);
  VectorXcd sb = m.cwiseProduct(c.plus - c.minus) * (I / std::sqrt(2.0));
  return {U * sa, V * sb};
}

inline void check_field(const FieldPair& f, const RadialGrid& g, const char* who) {
  const auto n = static_cast<Eigen::Index>(g.size());
  if (f.first.size() != n || f.second.size() != n) throw ConfigError(std::string(who) + ": field size mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Norms on a radial grid.

inline double l2_norm(const RadialGrid& g, const FieldPair& f) {
  return std::sqrt(std::pow(g.norm(f.first), 2) + std::pow(g.norm(f.second), 2));
}

// (sum w |f|^p)^{1/p}; p = inf gives the largest nodal modulus.
inline double lp_norm(const RadialGrid& g, const FieldPair& f, double p) {
  const VectorXd m = detail::modulus(f);
  if (std::isinf(p)) return m.size() ? m.maxCoeff() : 0.0;
  if (!(p >= 1.0)) throw DomainError("lp_norm: p must be at least 1");
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) s += g.w[static_cast<std::size_t>(i)] * std::pow(m[i], p);
  return std::pow(s, 1.0 / p);
}

// sup_r e^{-c r} |f(r)|: the largest nodal value, lifted to the vertex of the parabola through it
// and its neighbours (the bare nodal max misses a smooth peak by O(h^2)).
inline double sup_norm(const RadialGrid& g, const FieldPair& f, double c = 0.0) {
  const VectorXd m = detail::modulus(f);
  if (m.size() == 0) return 0.0;
  VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) v[i] = m[i] * std::exp(-c * g.r[static_cast<std::size_t>(i)]);
  Eigen::Index k = 0;
  const double top = v.maxCoeff(&k);
  if (k == 0 || k + 1 == v.size()) return top;
  const double d2 = v[k - 1] - 2 * top + v[k + 1], d1 = 0.5 * (v[k + 1] - v[k - 1]);
  return d2 < 0.0 ? top - d1 * d1 / (2 * d2) : top;
}

// ||r^alpha f||_2.
inline double moment_norm(const RadialGrid& g, const FieldPair& f, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s += g.w[i] * std::pow(g.r[i], 2 * alpha) * (std::norm(f.first[k]) + std::norm(f.second[k]));
  }
  return std::sqrt(s);
}

// int e^{-c r} |f| r^2 dr.
inline double exp_weighted_l1(const RadialGrid& g, const FieldPair& f, double c) {
  const VectorXd m = detail::modulus(f);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.w[i] * std::exp(-c * g.r[i]) * m[static_cast<Eigen::Index>(i)];
  return s;
}

// H^s norms for s = 0, 1, 2 from the finite-difference 1 - Delta of the sector.
class SobolevNorm {
 public:
  explicit SobolevNorm(const RadialGrid& g) : op_(free_operator(g, 1.0)) {}
  double operator()(const FieldPair& f, int s) const {
    const RadialGrid& g = op_.grid;
    auto one = [&](const VectorXcd& u) {
      switch (s) {
        case 0: return std::pow(g.norm(u), 2);
        case 1: return std::abs(g.dot(u, op_.apply(u)).real());
        case 2: return std::pow(g.norm(op_.apply(u)), 2);
        default: throw DomainError("SobolevNorm: s must be 0, 1 or 2");
      }
    };
    return std::sqrt(one(f.first) + one(f.second));
  }
  const RadialGrid& grid() const { return op_.grid; }

 private:
  PartialWaveOperator op_;
};

// Smooth test data for the estimate suites: (1 + c1 r^2 + c2 r^4) e^{-r^2/(2 s^2)} in the first slot
// and (d0 + d1 r^2) e^{-r^2/(2 s'^2)} in the second, widths in [1.5, 3].
inline std::vector<FieldPair> smooth_family(const RadialGrid& g, int n = 10, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<FieldPair> out;
  for (int i = 0; i < n; ++i) {
    const double s = 1.5 + 1.5 * U(rng), c1 = U(rng) - 0.5, c2 = 0.1 * (U(rng) - 0.5);
    const double s2 = 1.5 + 1.5 * U(rng), d0 = U(rng) - 0.5, d1 = 0.3 * (U(rng) - 0.5);
    out.push_back(
        {g.sample([=](double r) { return (1 + c1 * r * r + c2 * std::pow(r, 4)) * std::exp(-r * r / (2 * s * s)); })
             .cast<cplx>(),
         g.sample([=](double r) { return (d0 + d1 * r * r) * std::exp(-r * r / (2 * s2 * s2)); }).cast<cplx>()});
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Spectral backend.

inline double mode_energy(const SectorTransform& T, std::size_t k) { return T.omega + T.xi.xi[k] * T.xi.xi[k]; }

inline SpectralCoefficients evolve_coefficients(const SectorTransform& T, const SpectralCoefficients& c, double t) {
  SpectralCoefficients out{c.plus, c.minus};
  for (std::size_t k = 0; k < T.xi.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const cplx ph = std::polar(1.0, t * mode_energy(T, k));
    out.plus[i] *= ph;
    out.minus[i] *= std::conj(ph);
  }
  return out;
}

// e^{tH} P_c f at the transform's field nodes.
inline FieldPair propagate_spectral(const SectorTransform& T, const VectorXcd& a, const VectorXcd& b, double t) {
  return detail::synthesize(T.xi, evolve_coefficients(T, T.forward(a, b), t), T.U, T.V);
}

// Common interface of the two backends: data on input_grid(), evolved P_c part on output_grid().
class Propagator {
 public:
  virtual ~Propagator() = default;
  virtual const RadialGrid& input_grid() const = 0;
  virtual const RadialGrid& output_grid() const = 0;
  virtual std::vector<FieldPair> evolve(const FieldPair& f, const std::vector<double>& times) const = 0;
  virtual std::string name() const = 0;
  FieldPair evolve(const FieldPair& f, double t) const { return evolve(f, std::vector<double>{t}).front(); }
};

struct SpectralPropagatorOptions {
  double r_obs = 200.0;  // output grid reaches this radius
  double h_obs = 0.1;
  unsigned jobs = 0;
};

class SpectralPropagator : public Propagator {
 public:
  explicit SpectralPropagator(SectorTransform T, const SpectralPropagatorOptions& o = {})
      : T_(std::move(T)),
        obs_(RadialGrid::make_uniform(o.r_obs, static_cast<int>(std::lround(o.r_obs / o.h_obs)) - 1, T_.ell)) {
    T_.sample(obs_.r, Uo_, Vo_, o.jobs);
  }
  const RadialGrid& input_grid() const override { return T_.field; }
  const RadialGrid& output_grid() const override { return obs_; }
  std::string name() const override { return "spectral"; }
  using Propagator::evolve;
  const SectorTransform& transform() const { return T_; }

  std::vector<FieldPair> evolve(const FieldPair& f, const std::vector<double>& times) const override {
    detail::check_field(f, T_.field, "SpectralPropagator");
    const auto c = T_.forward(f.first, f.second);
    std::vector<FieldPair> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(detail::synthesize(T_.xi, evolve_coefficients(T_, c, t), Uo_, Vo_));
    return out;
  }

 private:
  SectorTransform T_;
  RadialGrid obs_;
  MatrixXcd Uo_, Vo_;
};

// ---------------------------------------------------------------------------------------
// Matrix backend.

// e^{tH} P_d on the generalized null space: with X the right chains, Y the left ones and
// N = (Y^T X)^{-1} Y^T H X, e^{tH} X c = X e^{tN} c.
// On a grid the chains close only up to discretization error: N picks up small entries off the
// chain shift, which pair into eigenvalues +-lambda with lambda -> 0 under refinement. The Jordan
// model keeps only the shift entries, so N is nilpotent; the restriction itself stays available.
class DiscreteFlow {
 public:
  DiscreteFlow(const MatrixHamiltonian& mh, const NullSpace& ns, bool jordan = true)
      : X_(ns.right), grid_(mh.Lminus.grid) {
    if (ns.dimension() == 0) return;
    const MatrixXd G = ns.left.transpose() * ns.right;
    Eigen::FullPivLU<MatrixXd> lu(G);
    if (!lu.isInvertible()) throw NumericError("DiscreteFlow: pairing matrix is singular");
    coef_ = lu.solve(ns.left.transpose());
    R_ = coef_ * mh.H * X_;
    N_ = MatrixXd::Zero(R_.rows(), R_.cols());
    Eigen::Index start = 0;
    for (int len : ns.chain_lengths) {
      for (Eigen::Index k = start; k + 1 < start + len; ++k) N_(k, k + 1) = R_(k, k + 1);
      start += len;
    }
    if (!jordan) N_ = R_;
  }
  int dimension() const { return static_cast<int>(X_.cols()); }
  const RadialGrid& grid() const { return grid_; }
  const MatrixXd& nilpotent() const { return N_; }
  const MatrixXd& restriction() const { return R_; }
  // largest |lambda| of the restriction: the discrete offset from a closed chain
  double chain_offset() const {
    if (dimension() == 0) return 0.0;
    return Eigen::EigenSolver<MatrixXd>(R_, false).eigenvalues().cwiseAbs().maxCoeff();
  }

  FieldPair evolve(const FieldPair& f, double t) const {
    detail::check_field(f, grid_, "DiscreteFlow");
    const auto n = static_cast<Eigen::Index>(grid_.size());
    if (dimension() == 0) return {VectorXcd::Zero(n), VectorXcd::Zero(n)};
    const VectorXcd x = stack(f);
    const VectorXcd c = coef_.cast<cplx>() * x;
    const MatrixXd E = (t * N_).exp();
    return unstack(X_.cast<cplx>() * (E.cast<cplx>() * c));
  }

 private:
  friend class MatrixPropagator;
  VectorXcd stack(const FieldPair& f) const {
    const VectorXcd s = grid_.sqrt_weights().cast<cplx>();
    VectorXcd x(2 * s.size());
    x << s.cwiseProduct(f.first), s.cwiseProduct(f.second);
    return x;
  }
  FieldPair unstack(const VectorXcd& x) const {
    const VectorXcd s = grid_.sqrt_weights().cast<cplx>();
    const auto n = s.size();
    return {x.head(n).cwiseQuotient(s), x.tail(n).cwiseQuotient(s)};
  }
  MatrixXd X_, coef_, R_, N_;
  RadialGrid grid_;
};

class MatrixPropagator : public Propagator {
 public:
  MatrixPropagator(MatrixHamiltonian mh, const NullSpace& ns)
      : mh_(std::move(mh)), flow_(mh_, ns), Pc_(MatrixXd::Identity(mh_.H.rows(), mh_.H.cols()) -
                                                biorthogonal_projector(ns.right, ns.left)) {}
  const RadialGrid& input_grid() const override { return flow_.grid(); }
  const RadialGrid& output_grid() const override { return flow_.grid(); }
  std::string name() const override { return "matrix"; }
  using Propagator::evolve;
  const DiscreteFlow& discrete() const { return flow_; }

  FieldPair project(const FieldPair& f) const {
    detail::check_field(f, flow_.grid(), "MatrixPropagator");
    return flow_.unstack(Pc_.cast<cplx>() * flow_.stack(f));
  }

  // Times are visited in increasing order; each step applies exp((t_k - t_{k-1}) H), cached by
  // step length, and re-projects so that round-off cannot seed the polynomially growing modes.
  std::vector<FieldPair> evolve(const FieldPair& f, const std::vector<double>& times) const override {
    detail::check_field(f, flow_.grid(), "MatrixPropagator");
    std::vector<std::size_t> order(times.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return times[i] < times[j]; });
    std::vector<FieldPair> out(times.size());
    VectorXcd x = Pc_.cast<cplx>() * flow_.stack(f);
    double now = 0.0;
    for (std::size_t i : order) {
      const double dt = times[i] - now;
      if (dt != 0.0) {
        x = Pc_.cast<cplx>() * (step(dt).cast<cplx>() * x);
        now = times[i];
      }
      out[i] = flow_.unstack(x);
    }
    return out;
  }

 private:
  const MatrixXd& step(double dt) const {
    auto it = cache_.find(dt);
    if (it != cache_.end()) return it->second;
    MatrixXd E = (dt * mh_.H).exp();
    if (!E.allFinite()) throw NumericError("MatrixPropagator: matrix exponential failed");
    return cache_.emplace(dt, std::move(E)).first->second;
  }
  MatrixHamiltonian mh_;
  DiscreteFlow flow_;
  MatrixXd Pc_;
  mutable std::map<double, MatrixXd> cache_;
};

// ---------------------------------------------------------------------------------------
// Decay fits.

struct DecayOptions {
  double t_min = 5.0, t_max = 50.0;  // fit window; earlier times are transient
  double weight_c = 0.0;             // weighted sup uses e^{-c r}
  double noise_floor = 1e-12;        // relative to the t = 0 value
};

struct DecayReport {
  std::vector<double> times, sup_norm, weighted_sup;
  LinearFit fit;           // log sup_norm against log t over the window
  LinearFit weighted_fit;  // same for weighted_sup
  double window_min = 0.0, window_max = 0.0;
  bool truncated = false;  // some window points fell below the noise floor
  std::string warning;

  double exponent() const { return fit.slope; }
  double weighted_exponent() const { return weighted_fit.slope; }
  double constant() const { return std::exp(fit.intercept); }
};

inline std::vector<double> log_times(double t0, double t1, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = t0 * std::pow(t1 / t0, i / double(n - 1));
  return t;
}

inline DecayReport decay_fit(const Propagator& P, const FieldPair& f, const std::vector<double>& t_grid,
                             const DecayOptions& o = {}) {
  if (t_grid.empty() || !std::is_sorted(t_grid.begin(), t_grid.end()) ||
      std::adjacent_find(t_grid.begin(), t_grid.end()) != t_grid.end())
    throw ConfigError("decay_fit: times must be strictly increasing");
  DecayReport rep;
  rep.times = t_grid;
  std::vector<double> all = t_grid;
  all.insert(all.begin(), 0.0);
  const auto u = P.evolve(f, all);
  const RadialGrid& g = P.output_grid();
  const double s0 = sup_norm(g, u[0]), w0 = sup_norm(g, u[0], o.weight_c);
  for (std::size_t i = 1; i < u.size(); ++i) {
    rep.sup_norm.push_back(sup_norm(g, u[i]));
    rep.weighted_sup.push_back(sup_norm(g, u[i], o.weight_c));
  }
  auto fit = [&](const std::vector<double>& y, double y0) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      if (t_grid[i] < o.t_min || t_grid[i] > o.t_max) continue;
      if (y[i] <= o.noise_floor * y0) {
        rep.truncated = true;
        continue;
      }
      lx.push_back(std::log(t_grid[i]));
      ly.push_back(std::log(y[i]));
    }
    if (lx.size() < 2) throw NumericError("decay_fit: fewer than two usable points in the window");
    rep.window_min = std::exp(lx.front());
    rep.window_max = std::exp(lx.back());
    return fit_line(lx, ly);
  };
  rep.fit = fit(rep.sup_norm, s0);
  rep.weighted_fit = fit(rep.weighted_sup, w0);
  if (rep.truncated) rep.warning = "values below the noise floor were dropped from the fit window";
  return rep;
}

// ---------------------------------------------------------------------------------------
// Moment conditions.

struct MomentCondition {
  int M = 0;       // order
  double c = 0.5;  // rate of the weight e^{-c r}
};

struct MomentProjection {
  FieldPair f;
  VectorXcd coefficients;  // of the correctors, a-slot first
  double condition = 0.0;  // of the corrector system
  double residual = 0.0;   // max |Psi_pm(xi_k)|, k <= 2M, after projection
};

namespace detail {

// r^l Delta^j e^{-r^2/(2 s^2)} with Delta the radial Laplacian of the sector; in x = r^2,
// Delta(x^{l/2} p(x) e^{-a x}) = x^{l/2} e^{-a x} (4x (p'' - 2a p' + a^2 p) + (4l + 6)(p' - a p)).
inline VectorXd gaussian_derivative(const RadialGrid& g, int j, double s) {
  const double a = 1.0 / (2 * s * s);
  const double k = 4.0 * g.ell + 6.0;
  std::vector<double> p{1.0};  // coefficients in x
  for (int it = 0; it < j; ++it) {
    std::vector<double> q(p.size() + 1, 0.0);
    for (std::size_t m = 0; m < p.size(); ++m) {
      const double pm = p[m];
      q[m + 1] += 4 * a * a * pm;             // 4x a^2 p
      if (m >= 1) q[m] += -8 * a * m * pm;    // 4x (-2a p')
      if (m >= 2) q[m - 1] += 4.0 * m * (m - 1) * pm;  // 4x p''
      if (m >= 1) q[m - 1] += k * m * pm;     // k p'
      q[m] += -k * a * pm;                    // -k a p
    }
    p = std::move(q);
  }
  return g.sample([&](double r) {
    const double x = r * r;
    double v = 0.0;
    for (std::size_t m = p.size(); m-- > 0;) v = v * x + p[m];
    return std::pow(r, g.ell) * v * std::exp(-a * x);
  });
}

}  // namespace detail

// Subtract Gaussian-derivative correctors (a- and b-slot, orders 0..2M) so that Psi_pm vanish at
// the first 2M + 1 frequency nodes, which kills every finite difference at 0 through order 2M.
inline MomentProjection moment_project(const SectorTransform& T, const FieldPair& f, const MomentCondition& cond,
                                       double width = 2.0, double max_condition = 1e13) {
  if (cond.M < 0 || cond.M > 2) throw DomainError("moment_project: order must be 0, 1 or 2");
  if (!(cond.c > 0.0)) throw DomainError("moment_project: weight rate must be positive");
  detail::check_field(f, T.field, "moment_project");
  const int m = 2 * cond.M + 1;
  if (static_cast<int>(T.xi.size()) < m) throw ConfigError("moment_project: frequency grid too short");
  const auto n = static_cast<Eigen::Index>(T.field.size());
  auto values = [&](const VectorXcd& a, const VectorXcd& b) {
    const auto c = T.forward(a, b);
    VectorXcd y(2 * m);
    for (int k = 0; k < m; ++k) y[k] = c.plus[k], y[m + k] = c.minus[k];
    return y;
  };
  std::vector<VectorXcd> phi;
  MatrixXcd A(2 * m, 2 * m);
  const VectorXcd zero = VectorXcd::Zero(n);
  for (int j = 0; j < m; ++j) phi.push_back(detail::gaussian_derivative(T.field, j, width).cast<cplx>());
  for (int j = 0; j < m; ++j) {
    A.col(j) = values(phi[static_cast<std::size_t>(j)], zero);
    A.col(m + j) = values(zero, phi[static_cast<std::size_t>(j)]);
  }
  Eigen::JacobiSVD<MatrixXcd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  MomentProjection out;
  out.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  if (!(out.condition <= max_condition))
    throw ConditioningError("moment_project: corrector system is singular", out.condition);
  out.f = f;
  out.coefficients = VectorXcd::Zero(2 * m);
  for (int pass = 0; pass < 2; ++pass) {  // second pass: one step of iterative refinement
    const VectorXcd dc = svd.solve(values(out.f.first, out.f.second));
    out.coefficients += dc;
    for (int j = 0; j < m; ++j) {
      out.f.first -= dc[j] * phi[static_cast<std::size_t>(j)];
      out.f.second -= dc[m + j] * phi[static_cast<std::size_t>(j)];
    }
  }
  out.residual = values(out.f.first, out.f.second).cwiseAbs().maxCoeff();
  return out;
}

// Decay of sup e^{-c r}|e^{tH} P_c f'| for moment-projected data; the expected rate is t^{-d/2-M}.
inline DecayReport weighted_decay_fit(const Propagator& P, const FieldPair& f, const MomentCondition& cond,
                                      const std::vector<double>& t_grid, DecayOptions o = {}) {
  o.weight_c = cond.c;
  return decay_fit(P, f, t_grid, o);
}

// ---------------------------------------------------------------------------------------
// Dispersive estimates:
//  (i)   ||u(t)||_{H^1}  <= C ||f||_{H^1}
//  (ii)  ||u(t)||_{H^2}  <= C ||f||_{H^2}
//  (iii) ||e^{tH} P_d f||_{H^2} <= C (1 + t^3) int e^{-c r}|f|
//  (iv)  ||r^alpha u(t)||_2 <= C (||r^alpha f||_2 + (1 + t^alpha) ||f||_{H^alpha})
//  (v)   ||r^alpha e^{tH} P_d f||_2 <= C (1 + t^3) int e^{-c r}|f|
// with u(t) = e^{tH} P_c f. For (i), (ii) and (iv) the constant at time t is the largest ratio of the
// two sides over the family; the clause passes when its max / min over the run stays below the spread. For (iii) and (v)
// the squared left side is a polynomial in t; its degree is halved into a growth degree, which
// must not exceed 3.

struct DispersiveOptions {
  double spread = 2.0;          // allowed max / min over t of the constant in (iv)
  double kappa = 2.0;           // same for (i), (ii)
  double weight_c = 0.0;        // 0: sqrt(omega) / 2 from the propagator's discrete flow grid
  double omega = 1.0;           // used for the default weight
  double poly_tol = 1e-8;       // relative residual that accepts a polynomial degree
};

struct ClauseResult {
  std::string clause;
  double constant = 0.0;          // largest ratio over the run and the family
  std::vector<double> constants;  // per time: largest ratio over the family
  double spread = 1.0;            // max / min of constants
  double degree = 0.0;     // growth degree (discrete clauses)
  bool pass = false;
};

struct DispersiveReport {
  std::vector<double> times;
  int alpha = 1;
  double chain_offset = 0.0;  // of the discrete flow, see DiscreteFlow
  std::vector<ClauseResult> clauses;
  bool pass = false;
};

namespace detail {

// Smallest k with a degree-k least-squares fit of y(t) below tol relative residual.
inline int polynomial_degree(const std::vector<double>& t, const std::vector<double>& y, double tol, int kmax = 10) {
  const auto n = static_cast<Eigen::Index>(t.size());
  const double ts = *std::max_element(t.begin(), t.end());
  VectorXd Y = Eigen::Map<const VectorXd>(y.data(), n);
  if (Y.norm() == 0.0) return 0;
  for (int k = 0; k <= kmax && k < n; ++k) {
    MatrixXd A(n, k + 1);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j <= k; ++j) A(i, j) = std::pow(t[static_cast<std::size_t>(i)] / ts, j);
    const VectorXd c = A.colPivHouseholderQr().solve(Y);
    if ((A * c - Y).norm() <= tol * Y.norm()) return k;
  }
  return kmax + 1;
}

inline void fold(ClauseResult& r, const std::vector<double>& ratio) {
  if (r.constants.empty()) r.constants.assign(ratio.size(), 0.0);
  for (std::size_t k = 0; k < ratio.size(); ++k) r.constants[k] = std::max(r.constants[k], ratio[k]);
}

inline void finish(ClauseResult& r) {
  if (r.constants.empty()) return;
  const auto [lo, hi] = std::minmax_element(r.constants.begin(), r.constants.end());
  r.constant = *hi;
  r.spread = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline DispersiveReport dispersive_suite(const Propagator& P, const DiscreteFlow* discrete,
                                         const std::vector<FieldPair>& family, const std::vector<double>& t_grid,
                                         int alpha, const DispersiveOptions& o = {}) {
  if (alpha != 1 && alpha != 2) throw DomainError("dispersive_suite: alpha must be 1 or 2");
  if (family.empty() || t_grid.empty()) throw ConfigError("dispersive_suite: empty family or time grid");
  if (discrete && discrete->grid().size() != P.input_grid().size())
    throw ConfigError("dispersive_suite: discrete flow lives on a different grid");
  const double c = o.weight_c > 0.0 ? o.weight_c : 0.5 * std::sqrt(o.omega);
  SobolevNorm out_norm(P.output_grid()), in_norm(P.input_grid());
  const RadialGrid& gi = P.input_grid();
  const RadialGrid& go = P.output_grid();

  DispersiveReport rep;
  rep.times = t_grid;
  rep.alpha = alpha;
  if (discrete) rep.chain_offset = discrete->chain_offset();
  ClauseResult c1{"i"}, c2{"ii"}, c3{"iii"}, c4{"iv"}, c5{"v"};
  for (const auto& f : family) {
    const auto u = P.evolve(f, t_grid);
    const double h1 = in_norm(f, 1), h2 = in_norm(f, 2), ha = in_norm(f, alpha), xa = moment_norm(gi, f, alpha);
    std::vector<double> r1, r2, r4, g3, g5;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      const double t = t_grid[k];
      r1.push_back(out_norm(u[k], 1) / h1);
      r2.push_back(out_norm(u[k], 2) / h2);
      r4.push_back(moment_norm(go, u[k], alpha) / (xa + (1 + std::pow(t, alpha)) * ha));
    }
    detail::fold(c1, r1);
    detail::fold(c2, r2);
    detail::fold(c4, r4);
    if (discrete && discrete->dimension() > 0) {
      SobolevNorm dn(discrete->grid());
      const double W = exp_weighted_l1(gi, f, c);
      std::vector<double> s3, s5;
      for (double t : t_grid) {
        const auto d = discrete->evolve(f, t);
        const double n3 = dn(d, 2), n5 = moment_norm(discrete->grid(), d, alpha);
        c3.constant = std::max(c3.constant, n3 / ((1 + t * t * t) * W));
        c5.constant = std::max(c5.constant, n5 / ((1 + t * t * t) * W));
        s3.push_back(n3 * n3);
        s5.push_back(n5 * n5);
      }
      c3.degree = std::max(c3.degree, 0.5 * detail::polynomial_degree(t_grid, s3, o.poly_tol));
      c5.degree = std::max(c5.degree, 0.5 * detail::polynomial_degree(t_grid, s5, o.poly_tol));
    }
  }
  for (auto* r : {&c1, &c2, &c4}) detail::finish(*r);
  c1.pass = c1.spread <= o.kappa;
  c2.pass = c2.spread <= o.kappa;
  c4.pass = c4.spread <= o.spread;
  c3.pass = c3.degree <= 3.0;
  c5.pass = c5.degree <= 3.0;
  rep.clauses = {c1, c2, c3, c4, c5};
  rep.pass = std::all_of(rep.clauses.begin(), rep.clauses.end(), [](const auto& r) { return r.pass; });
  return rep;
}

// ---------------------------------------------------------------------------------------
// Strichartz norms.

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// 2/q = 3/2 - 3/r with 2 <= r < 6 (q = inf at r = 2).
inline bool admissible_pair(double q, double r) {
  if (!(r >= 2.0 && r < 6.0)) return false;
  const double lhs = std::isinf(q) ? 0.0 : 2.0 / q;
  return std::abs(lhs - (1.5 - 3.0 / r)) <= 1e-12;
}

struct StrichartzOptions {
  double dt = 0.05;  // Simpson step in time
};

struct StrichartzRow {
  double q = 0.0, r = 0.0, T = 0.0;
  double norm = 0.0;   // ||u||_{L^q_t([0,T]) L^r_x}
  double ratio = 0.0;  // norm / ||f||_2
};

// Several (q, r) pairs and horizons from one trajectory on [0, max T].
inline std::vector<StrichartzRow> strichartz_table(const Propagator& P, const FieldPair& f,
                                                   const std::vector<std::pair<double, double>>& pairs,
                                                   const std::vector<double>& horizons, const StrichartzOptions& o = {}) {
  for (auto [q, r] : pairs)
    if (!admissible_pair(q, r)) throw DomainError("strichartz: (q, r) is not an admissible pair");
  for (double T : horizons)
    if (!(T > 0.0)) throw DomainError("strichartz: horizon must be positive");
  if (!(o.dt > 0.0)) throw ConfigError("strichartz: dt must be positive");
  const double Tmax = *std::max_element(horizons.begin(), horizons.end());
  int nsteps = static_cast<int>(std::ceil(Tmax / o.dt));
  nsteps += nsteps % 2;
  const double dt = Tmax / nsteps;
  std::vector<double> times(static_cast<std::size_t>(nsteps + 1));
  for (int i = 0; i <= nsteps; ++i) times[static_cast<std::size_t>(i)] = i * dt;
  const auto u = P.evolve(f, times);
  const double f2 = l2_norm(P.input_grid(), f);
  std::vector<std::vector<double>> lr(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (const auto& ui : u) lr[p].push_back(lp_norm(P.output_grid(), ui, pairs[p].second));

  std::vector<StrichartzRow> rows;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [q, r] = pairs[p];
    for (double T : horizons) {
      // last node at or below T; Simpson over an even number of panels, trapezoid for a leftover one
      int m = static_cast<int>(std::floor(T / dt + 1e-9));
      double norm = 0.0;
      if (std::isinf(q)) {
        for (int i = 0; i <= m; ++i) norm = std::max(norm, lr[p][static_cast<std::size_t>(i)]);
      } else {
        auto g = [&](int i) { return std::pow(lr[p][static_cast<std::size_t>(i)], q); };
        const int me = m - m % 2;
        double s = 0.0;
        for (int i = 0; i < me; i += 2) s += dt / 3.0 * (g(i) + 4 * g(i + 1) + g(i + 2));
        if (m % 2) s += 0.5 * dt * (g(m - 1) + g(m));
        norm = std::pow(s, 1.0 / q);
      }
      rows.push_back({q, r, T, norm, norm / f2});
    }
  }
  return rows;
}

inline double strichartz_norm(const Propagator& P, const FieldPair& f, double q, double r, double T,
                              const StrichartzOptions& o = {}) {
  return strichartz_table(P, f, {{q, r}}, {T}, o).front().norm;
}

// Fixed-time decay of ||u(t)||_p over the window; the sharp rate is -3 (1/2 - 1/p).
inline LinearFit lp_decay_fit(const Propagator& P, const FieldPair& f, double p, const std::vector<double>& t_grid,
                              double t_min = 5.0, double t_max = 50.0) {
  const auto u = P.evolve(f, t_grid);
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < t_min || t_grid[i] > t_max) continue;
    const double v = std::isinf(p) ? sup_norm(P.output_grid(), u[i]) : lp_norm(P.output_grid(), u[i], p);
    lx.push_back(std::log(t_grid[i]));
    ly.push_back(std::log(v));
  }
  if (lx.size() < 2) throw ConfigError("lp_decay_fit: fewer than two times in the window");
  return fit_line(lx, ly);
}

}  // namespace satsol
