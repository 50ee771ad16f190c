#pragma once
// Admissibility report of a linearization: gap eigenvalues of H per sector, the sigma_min(I - K Vt)
// sweep over the continuous spectrum and at the threshold, and the generalized null space at 0.

#include <complex>
#include <string>
#include <vector>

#include "satsol/distorted.hpp"
#include "satsol/operators.hpp"

namespace satsol {

struct AdmissibilityConfig {
  double r_max = 40.0;      // operator grid for the eigenvalue clause
  int n = 300;
  int ell_max = 4;          // sectors checked for gap eigenvalues
  double eig_tol = 1e-6;    // |E| below this counts as the zero eigenvalue
  double xi_max = 0.0;      // sweep range; 0: max(4 sqrt(omega), 2 M)
  double dxi = 0.01;
  int sweep_ell_max = 2;
  double delta_res = 1e-3;
  double sweep_h = 0.1;     // integral-equation spacing of the sweep
  NullSpaceOptions null;
  ThresholdOptions threshold;
  unsigned jobs = 1;
};

struct SectorSpectrum {
  int ell = 0;
  int null_dimension = 0;
  std::vector<int> chain_lengths;
  std::vector<double> gap_energies;                  // real E in (-omega, omega), E != 0, of H = iE
  std::vector<std::complex<double>> other_eigenvalues;  // |lambda| < omega off the imaginary axis
};

// A local minimum of the sweep, checked on a four times finer frequency grid.
struct SweepDip {
  int ell = 0;
  double xi = 0.0;
  double sampled = 0.0;    // smallest sampled value
  double quadratic = 0.0;  // minimum of the local quadratic fit
  double refined = 0.0;    // smallest value on the refined grid
};

struct SpectralReport {
  double omega = 0.0;
  double threshold_M = 0.0;
  std::vector<SectorSpectrum> sectors;
  SigmaSweep sweep;
  std::vector<SweepDip> dips;
  std::vector<double> threshold_sigma;  // sigma_min at xi = 0 per swept sector
  int null_dimension = 0;               // sum over sectors of (2l + 1) * dim
  std::string null_count_match;         // "2d+4", "4" or "neither"
  bool clause_embedded = true;          // no embedded eigenvalues or resonances for xi > 0
  bool clause_gap = true;               // 0 is the only real eigenvalue in (-omega, omega)
  bool clause_threshold = true;         // no resonance at +-omega
  bool resolution_warning = false;
  bool admissible = true;
  std::vector<std::string> reasons;
};

namespace detail {

inline SectorSpectrum sector_spectrum(const MatrixHamiltonian& mh, const AdmissibilityConfig& cfg) {
  SectorSpectrum s;
  s.ell = mh.ell();
  const auto ns = generalized_null_space(mh, cfg.null);
  s.null_dimension = ns.dimension();
  s.chain_lengths = ns.chain_lengths;
  const double w = mh.omega();
  for (const auto& lam : deflated_eigenvalues(mh, ns)) {
    if (std::abs(lam) >= w) break;  // sorted by modulus
    if (std::abs(lam) <= cfg.eig_tol) continue;
    if (std::abs(lam.real()) <= cfg.eig_tol * std::max(1.0, std::abs(lam)) + 1e-8)
      s.gap_energies.push_back(lam.imag());
    else
      s.other_eigenvalues.push_back(lam);
  }
  return s;
}

inline std::vector<SweepDip> refine_dips(const ScatteringProblem& pb, const SigmaSweep& sw, double dxi) {
  std::vector<SweepDip> out;
  const Eigen::Index nx = sw.sigma.rows();
  for (std::size_t c = 0; c < sw.ells.size(); ++c) {
    const auto l = static_cast<Eigen::Index>(c);
    for (Eigen::Index i = 1; i + 1 < nx; ++i) {
      const double y0 = sw.sigma(i - 1, l), y1 = sw.sigma(i, l), y2 = sw.sigma(i + 1, l);
      if (!(y1 < y0 && y1 <= y2)) continue;
      SweepDip d;
      d.ell = sw.ells[c];
      d.xi = sw.xi[static_cast<std::size_t>(i)];
      d.sampled = y1;
      const double c2 = 0.5 * (y0 - 2 * y1 + y2), c1 = 0.5 * (y2 - y0);
      d.quadratic = c2 > 0.0 ? std::max(0.0, y1 - c1 * c1 / (4 * c2)) : y1;
      d.refined = y1;
      for (int k = -3; k <= 3; ++k) {
        if (k == 0) continue;
        const double xi = d.xi + 0.25 * k * dxi;
        if (xi < 0.0) continue;
        ChannelOperator K(pb, xi, d.ell);
        VectorXd w;
        Eigen::PartialPivLU<MatrixXcd> lu(weighted_resolvent_matrix(K, w));
        d.refined = std::min(d.refined, smallest_singular_value(lu, 2 * K.n()));
      }
      out.push_back(d);
    }
  }
  return out;
}

inline SpectralReport build_report(double omega, const std::vector<MatrixHamiltonian>& hams, const ScatteringProblem& pb,
                                   const AdmissibilityConfig& cfg) {
  SpectralReport rep;
  rep.omega = omega;
  for (const auto& mh : hams) {
    rep.sectors.push_back(sector_spectrum(mh, cfg));
    const auto& s = rep.sectors.back();
    rep.null_dimension += (2 * s.ell + 1) * s.null_dimension;
    for (double E : s.gap_energies) {
      rep.clause_gap = false;
      rep.reasons.push_back("eigenvalue iE with E = " + std::to_string(E) + " in the gap (l = " +
                            std::to_string(s.ell) + ")");
    }
  }
  rep.null_count_match = rep.null_dimension == 2 * 3 + 4 ? "2d+4" : rep.null_dimension == 4 ? "4" : "neither";

  rep.threshold_M = estimate_threshold(pb, cfg.threshold).M;
  const double xi_max = cfg.xi_max > 0.0 ? cfg.xi_max : std::max(4.0 * std::sqrt(omega), 2.0 * rep.threshold_M);
  ScatteringProblem coarse = pb.resampled(cfg.sweep_h);
  coarse.opt.delta_res = cfg.delta_res;
  rep.sweep = sigma_min_sweep(coarse, xi_max, cfg.dxi, cfg.sweep_ell_max, cfg.jobs);
  rep.dips = refine_dips(coarse, rep.sweep, cfg.dxi);
  for (std::size_t c = 0; c < rep.sweep.ells.size(); ++c) {
    const auto l = static_cast<Eigen::Index>(c);
    rep.threshold_sigma.push_back(rep.sweep.sigma(0, l));
    if (rep.sweep.sigma(0, l) < cfg.delta_res) {
      rep.clause_threshold = false;
      rep.reasons.push_back("threshold resonance: sigma_min = " + std::to_string(rep.sweep.sigma(0, l)) +
                            " at xi = 0 (l = " + std::to_string(rep.sweep.ells[c]) + ")");
    }
    for (Eigen::Index i = 1; i < rep.sweep.sigma.rows(); ++i)
      if (rep.sweep.sigma(i, l) < cfg.delta_res) {
        rep.clause_embedded = false;
        rep.reasons.push_back("embedded eigenvalue or resonance: sigma_min = " + std::to_string(rep.sweep.sigma(i, l)) +
                              " at xi = " + std::to_string(rep.sweep.xi[static_cast<std::size_t>(i)]) +
                              " (l = " + std::to_string(rep.sweep.ells[c]) + ")");
      }
  }
  for (const auto& d : rep.dips) {
    // a dip the samples do not resolve: the refined minimum falls well below the sampled one
    if (d.refined < 0.5 * d.sampled || (d.refined < cfg.delta_res && d.sampled >= cfg.delta_res)) {
      rep.resolution_warning = true;
      rep.reasons.push_back("sweep too coarse near xi = " + std::to_string(d.xi) + " (l = " + std::to_string(d.ell) +
                            ")");
    }
    if (d.refined < cfg.delta_res && d.sampled >= cfg.delta_res) rep.clause_embedded = false;
  }
  rep.admissible = rep.clause_embedded && rep.clause_gap && rep.clause_threshold;
  return rep;
}

}  // namespace detail

inline SpectralReport admissibility_report(const SolitonProfile& p, const AdmissibilityConfig& cfg = {}) {
  const auto ds = discretize_soliton(p, RadialGrid::make_uniform(cfg.r_max, cfg.n));
  std::vector<MatrixHamiltonian> hams;
  for (int l = 0; l <= cfg.ell_max; ++l) hams.push_back(build_hamiltonian(ds, l));
  return detail::build_report(p.omega, hams, ScatteringProblem::from_profile(p), cfg);
}

// Linearization with prescribed potentials: L- = -Delta + omega - V1, L+ = L- - V2.
template <class F1, class F2>
SpectralReport admissibility_report(double omega, F1 V1, F2 V2, const AdmissibilityConfig& cfg = {}) {
  const auto g = RadialGrid::make_uniform(cfg.r_max, cfg.n);
  const VectorXd v1 = g.sample(V1), v2 = g.sample(V2);
  std::vector<MatrixHamiltonian> hams;
  for (int l = 0; l <= cfg.ell_max; ++l) {
    const auto gl = g.with_ell(l);
    hams.push_back(assemble_hamiltonian(assemble_operator(gl, omega, v1, "L-"),
                                        assemble_operator(gl, omega, VectorXd(v1 + v2), "L+")));
  }
  return detail::build_report(omega, hams, ScatteringProblem::from_potentials(omega, V1, V2), cfg);
}

// Depth c of V1 = c exp(-r^2) (V2 = 0) that puts the lowest l = 0 eigenvalue of -Delta + omega - V1
// at fraction * omega, so that H has the eigenvalues +-i (fraction * omega).
inline double planted_well_depth(double omega, double fraction = 0.5, double r_max = 40.0, int n = 300) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("planted_well_depth: fraction must lie in (0, 1)");
  const auto g = RadialGrid::make_uniform(r_max, n);
  const VectorXd gauss = g.sample([](double r) { return std::exp(-r * r); });
  auto lowest = [&](double c) {
    return discrete_spectrum(assemble_operator(g, omega, VectorXd(c * gauss), "L-"), 1).values[0];
  };
  const double target = fraction * omega;
  double lo = 0.0, hi = 1.0;
  while (lowest(hi) > target) {
    hi *= 2.0;
    if (hi > 1e6) throw BracketError("planted_well_depth: no bracket");
  }
  for (int it = 0; it < 80 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lowest(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace satsol
