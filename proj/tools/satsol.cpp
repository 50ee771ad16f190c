// satsol: command-line front end. Each subcommand resolves a run configuration (defaults, then
// --config JSON, then flags), runs one pipeline and writes CSV/JSON into the output directory.
//
// Exit codes: 0 success, 1 verify-all found failing checks, 2 configuration error, 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/uuid/detail/sha1.hpp>
#include <json.hpp>

#include "satsol/admissibility.hpp"
#include "satsol/evolution.hpp"
#include "satsol/kernels.hpp"
#include "satsol/soliton.hpp"
#include "satsol/verify.hpp"
#include "satsol/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace satsol;

namespace {

// ---------------------------------------------------------------------------------------
// Configuration.

struct RunConfig {
  std::string kind = "type1";
  double p = 4.0, q = 2.0;
  std::string coupling = "squared";
  std::optional<double> omega;
  double omega_min = 0.05, omega_max = 5.0;
  int n_curve = 41;
  double r_max = 80.0;
  int n_r = 400;
  int ell = 0, ell_max = 2;
  double xi_max = 5.0, dxi = 0.008;
  double profile_tol = 1e-14;
  double delta_res = 1e-3;
  std::string potential = "soliton";  // or "free"
  std::string backend = "spectral";   // or "matrix"
  std::vector<double> times;
  double t_min = 1.0, t_max = 50.0;
  int n_t = 25;
  double width = 1.0;
  int M = 1;
  double c = 0.5;
  int alpha = 1;
  std::string out = ".";
  std::string cache;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool no_cache = false;
};

void reject_unknown(const json& j, const std::vector<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError("config: unknown key '" + k + "' in " + where);
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) {
    try {
      dst = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
  }
}

void load_config(const std::string& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  reject_unknown(j, {"nonlinearity", "omega", "curve", "grid", "xi", "tolerances", "evolution", "output_dir",
                     "cache_dir", "seed", "jobs"},
                 "top level");
  if (j.contains("nonlinearity")) {
    const auto& n = j["nonlinearity"];
    reject_unknown(n, {"kind", "p", "q", "coupling"}, "nonlinearity");
    take(n, "kind", c.kind), take(n, "p", c.p), take(n, "q", c.q), take(n, "coupling", c.coupling);
  }
  if (j.contains("omega")) c.omega = j["omega"].get<double>();
  if (j.contains("curve")) {
    const auto& n = j["curve"];
    reject_unknown(n, {"omega_min", "omega_max", "n"}, "curve");
    take(n, "omega_min", c.omega_min), take(n, "omega_max", c.omega_max), take(n, "n", c.n_curve);
  }
  if (j.contains("grid")) {
    const auto& n = j["grid"];
    reject_unknown(n, {"r_max", "n_r", "ell", "ell_max"}, "grid");
    take(n, "r_max", c.r_max), take(n, "n_r", c.n_r), take(n, "ell", c.ell), take(n, "ell_max", c.ell_max);
  }
  if (j.contains("xi")) {
    const auto& n = j["xi"];
    reject_unknown(n, {"xi_max", "dxi"}, "xi");
    take(n, "xi_max", c.xi_max), take(n, "dxi", c.dxi);
  }
  if (j.contains("tolerances")) {
    const auto& n = j["tolerances"];
    reject_unknown(n, {"profile", "delta_res"}, "tolerances");
    take(n, "profile", c.profile_tol), take(n, "delta_res", c.delta_res);
  }
  if (j.contains("evolution")) {
    const auto& n = j["evolution"];
    reject_unknown(n, {"potential", "backend", "times", "t_min", "t_max", "n_t", "width", "M", "c", "alpha"},
                   "evolution");
    take(n, "potential", c.potential), take(n, "backend", c.backend), take(n, "times", c.times);
    take(n, "t_min", c.t_min), take(n, "t_max", c.t_max), take(n, "n_t", c.n_t), take(n, "width", c.width);
    take(n, "M", c.M), take(n, "c", c.c), take(n, "alpha", c.alpha);
  }
  take(j, "output_dir", c.out), take(j, "cache_dir", c.cache), take(j, "seed", c.seed), take(j, "jobs", c.jobs);
}

void validate(const RunConfig& c) {
  if (c.kind != "type1" && c.kind != "type2") throw ConfigError("nonlinearity kind must be type1 or type2");
  if (c.coupling != "squared" && c.coupling != "amplitude") throw ConfigError("coupling must be squared or amplitude");
  if (c.omega && !(*c.omega > 0.0)) throw ConfigError("omega must be positive");
  if (!(c.omega_min > 0.0 && c.omega_min < c.omega_max)) throw ConfigError("need 0 < omega_min < omega_max");
  if (c.n_curve < 5) throw ConfigError("curve needs at least 5 points");
  if (!(c.r_max > 0.0) || c.n_r < 10 || c.n_r > 2000) throw ConfigError("grid: need r_max > 0 and 10 <= n_r <= 2000");
  if (c.ell < 0 || c.ell_max < 0 || c.ell_max > 8) throw ConfigError("grid: need ell >= 0 and 0 <= ell_max <= 8");
  if (!(c.xi_max > 0.0 && c.dxi > 0.0 && c.dxi < c.xi_max)) throw ConfigError("xi: need 0 < dxi < xi_max");
  if (!(c.profile_tol > 0.0) || !(c.delta_res > 0.0)) throw ConfigError("tolerances must be positive");
  if (c.potential != "soliton" && c.potential != "free") throw ConfigError("potential must be soliton or free");
  if (c.backend != "spectral" && c.backend != "matrix") throw ConfigError("backend must be spectral or matrix");
  if (!(c.t_min > 0.0 && c.t_min < c.t_max) || c.n_t < 2) throw ConfigError("times: need 0 < t_min < t_max, n_t >= 2");
  for (double t : c.times)
    if (!(t >= 0.0)) throw ConfigError("times must be nonnegative");
  if (!(c.width > 0.0)) throw ConfigError("data width must be positive");
  if (c.M < 0 || c.M > 2) throw ConfigError("moment order M must be 0, 1 or 2");
  if (!(c.c > 0.0)) throw ConfigError("weight rate c must be positive");
  if (c.alpha != 1 && c.alpha != 2) throw ConfigError("alpha must be 1 or 2");
  if (c.jobs == 0) throw ConfigError("jobs must be at least 1");
}

Nonlinearity nonlinearity(const RunConfig& c) {
  const auto spec = c.kind == "type1" ? NonlinearitySpec::type1(c.p, c.q) : NonlinearitySpec::type2(c.q);
  return {spec, c.coupling == "squared" ? Coupling::Squared : Coupling::Amplitude};
}

double require_omega(const RunConfig& c) {
  if (!c.omega) throw ConfigError("missing --omega");
  return *c.omega;
}

// ---------------------------------------------------------------------------------------
// Output and cache.

std::string stage = "setup";  // named in numeric-failure messages

json spec_json(const RunConfig& c) {
  return {{"kind", c.kind}, {"p", c.kind == "type1" ? c.p : 0.0}, {"q", c.q}, {"coupling", c.coupling}, {"d", 3}};
}

void write_atomic(const fs::path& path, const std::string& data) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary);
    if (!o) throw ConfigError("cannot write " + tmp.string());
    o << data;
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, json j) {
  json out{{"version", kVersion}};
  for (auto& [k, v] : j.items()) out[k] = v;
  write_atomic(path, out.dump(2) + "\n");
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

class Csv {
 public:
  explicit Csv(const std::string& header) { s_ << header << "\n"; }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((s_ << (first ? "" : ",") << cell(v), first = false), ...);
    s_ << "\n";
  }
  void save(const fs::path& p) const { write_atomic(p, s_.str()); }

 private:
  static std::string cell(double x) { return num(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(const std::string& x) { return x; }
  std::ostringstream s_;
};

std::string sha1_hex(const std::string& s) {
  boost::uuids::detail::sha1 h;
  h.process_bytes(s.data(), s.size());
  unsigned int d[5];
  h.get_digest(d);
  std::ostringstream os;
  for (unsigned int x : d) os << std::hex << std::setw(8) << std::setfill('0') << x;
  return os.str();
}

class Cache {
 public:
  explicit Cache(const RunConfig& c) : enabled_(!c.no_cache) {
    if (const char* env = std::getenv("SSL_CACHE_DIR"); env && *env)
      dir_ = env;
    else
      dir_ = c.cache.empty() ? fs::path(c.out) / ".cache" : fs::path(c.cache);
  }
  static std::string key(const json& what) { return sha1_hex(json{{"what", what}, {"version", kVersion}}.dump()); }

  std::optional<json> lookup(const std::string& key) const {
    if (!enabled_) return std::nullopt;
    const fs::path p = dir_ / (key + ".json");
    if (!fs::exists(p)) {
      std::cerr << "[cache] miss " << key << "\n";
      return std::nullopt;
    }
    try {
      std::ifstream in(p);
      json j = json::parse(in);
      if (j.value("version", "") != kVersion) throw std::runtime_error("version mismatch");
      std::cerr << "[cache] hit " << key << "\n";
      return j;
    } catch (const std::exception& e) {
      std::cerr << "[cache] warning: corrupt entry " << p.string() << " (" << e.what() << "), recomputing\n";
      return std::nullopt;
    }
  }
  void store(const std::string& key, const json& j) const {
    if (enabled_) write_atomic(dir_ / (key + ".json"), j.dump() + "\n");
  }

 private:
  bool enabled_;
  fs::path dir_;
};

json profile_json(const RunConfig& c, const SolitonProfile& p) {
  return {{"version", kVersion},
          {"spec", spec_json(c)},
          {"omega", p.omega},
          {"r_grid", {{"r_max", p.r_max()}, {"n", p.r.size()}}},
          {"r", p.r},
          {"R", p.R},
          {"solver_meta",
           {{"R0", p.meta.R0},
            {"bracket", {p.meta.bracket_lo, p.meta.bracket_hi}},
            {"bisections", p.meta.bisections},
            {"r_splice", p.meta.r_splice},
            {"tol", p.meta.tol}}}};
}

SolitonProfile profile_from_json(const Nonlinearity& nl, const json& j) {
  SolitonProfile p;
  p.nl = nl;
  p.omega = j.at("omega").get<double>();
  p.r = j.at("r").get<std::vector<double>>();
  p.R = j.at("R").get<std::vector<double>>();
  const auto& m = j.at("solver_meta");
  p.meta.R0 = m.at("R0").get<double>();
  p.meta.bracket_lo = m.at("bracket").at(0).get<double>();
  p.meta.bracket_hi = m.at("bracket").at(1).get<double>();
  p.meta.bisections = m.at("bisections").get<int>();
  p.meta.r_splice = m.at("r_splice").get<double>();
  p.meta.tol = m.at("tol").get<double>();
  if (p.r.size() != p.R.size() || p.r.size() < 5) throw std::runtime_error("profile arrays malformed");
  return p;
}

// Profile through the cache; the key covers the nonlinearity, omega, grid and tolerance.
SolitonProfile cached_profile(const RunConfig& c, double omega, const Cache& cache, std::string* key_out = nullptr) {
  const auto nl = nonlinearity(c);
  const GridParams gp{};
  const std::string key = Cache::key(
      {{"profile", spec_json(c)}, {"omega", omega}, {"r_max", gp.r_max}, {"n", gp.n}, {"tol", c.profile_tol}});
  if (key_out) *key_out = key;
  if (auto hit = cache.lookup(key)) {
    try {
      return profile_from_json(nl, *hit);
    } catch (const std::exception& e) {
      std::cerr << "[cache] warning: unreadable profile (" << e.what() << "), recomputing\n";
    }
  }
  stage = "soliton profile";
  auto p = solve_profile(nl, omega, gp, c.profile_tol);
  cache.store(key, profile_json(c, p));
  return p;
}

// ---------------------------------------------------------------------------------------
// Evolution plumbing.

struct Flow {
  RadialGrid field;
  double omega = 1.0;
  std::unique_ptr<MatrixPropagator> matrix;
  std::unique_ptr<SpectralPropagator> spectral;
  const Propagator& active(const std::string& backend) const {
    if (backend == "matrix") return *matrix;
    return *spectral;
  }
};

Flow make_flow(const RunConfig& c, const Cache& cache, bool need_spectral = true) {
  Flow f;
  f.field = RadialGrid::make_uniform(c.r_max, c.n_r, c.ell);
  const auto zero = [](double) { return 0.0; };
  if (c.potential == "free") {
    f.omega = c.omega.value_or(1.0);
    stage = "matrix hamiltonian";
    const VectorXd z = VectorXd::Zero(c.n_r);
    const auto mh = assemble_hamiltonian(assemble_operator(f.field, f.omega, z, "L-"),
                                         assemble_operator(f.field, f.omega, z, "L+"));
    f.matrix = std::make_unique<MatrixPropagator>(mh, generalized_null_space(mh));
    if (need_spectral) {
      stage = "distorted transform";
      f.spectral = std::make_unique<SpectralPropagator>(
          build_transform(ScatteringProblem::from_potentials(f.omega, zero, zero), f.field, 0.0,
                          {c.xi_max, c.dxi, c.jobs}),
          SpectralPropagatorOptions{.jobs = c.jobs});
    }
    return f;
  }
  const auto prof = cached_profile(c, require_omega(c), cache);
  f.omega = prof.omega;
  stage = "matrix hamiltonian";
  const auto mh = build_hamiltonian(discretize_soliton(prof, f.field), c.ell);
  f.matrix = std::make_unique<MatrixPropagator>(mh, generalized_null_space(mh));
  if (need_spectral) {
    stage = "threshold estimate";
    auto pb = ScatteringProblem::from_profile(prof);
    pb.opt.delta_res = c.delta_res;
    const double M = estimate_threshold(pb).M;
    stage = "distorted transform";
    f.spectral = std::make_unique<SpectralPropagator>(build_transform(pb, f.field, M, {c.xi_max, c.dxi, c.jobs}),
                                                      SpectralPropagatorOptions{.jobs = c.jobs});
  }
  return f;
}

FieldPair gaussian(const RadialGrid& g, double s) {
  return {g.sample([s, l = g.ell](double r) { return std::pow(r, l) * std::exp(-r * r / (2 * s * s)); }).cast<cplx>(),
          VectorXcd::Zero(static_cast<Eigen::Index>(g.size()))};
}

std::vector<double> time_grid(const RunConfig& c) { return c.times.empty() ? log_times(c.t_min, c.t_max, c.n_t) : c.times; }

void write_decay(const RunConfig& c, const DecayReport& r, const std::string& name, json extra) {
  Csv csv("t,sup_norm,weighted_sup");
  for (std::size_t i = 0; i < r.times.size(); ++i) csv.row(r.times[i], r.sup_norm[i], r.weighted_sup[i]);
  csv.save(fs::path(c.out) / (name + ".csv"));
  json j{{"exponent", r.exponent()},
         {"exponent_band95", r.fit.band95},
         {"weighted_exponent", r.weighted_exponent()},
         {"weighted_exponent_band95", r.weighted_fit.band95},
         {"window", {r.window_min, r.window_max}},
         {"truncated", r.truncated},
         {"warning", r.warning}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json(fs::path(c.out) / (name + ".json"), j);
  std::cout << "exponent " << num(r.exponent()) << ", weighted exponent " << num(r.weighted_exponent()) << " over ["
            << r.window_min << ", " << r.window_max << "]\n";
  if (r.truncated) std::cout << "warning: " << r.warning << "\n";
}

// ---------------------------------------------------------------------------------------
// Subcommands.

int cmd_soliton(const RunConfig& c) {
  const Cache cache(c);
  std::string key;
  const auto p = cached_profile(c, require_omega(c), cache, &key);
  stage = "mass and energy";
  const double Q = mass(p), E = energy(p);
  write_json(fs::path(c.out) / "profile.json", profile_json(c, p));
  std::cout << "Q = " << num(Q) << "\nE = " << num(E) << "\n";
  return 0;
}

int cmd_curve(const RunConfig& c) {
  const Cache cache(c);
  const std::string key =
      Cache::key({{"curve", spec_json(c)}, {"range", {c.omega_min, c.omega_max}}, {"n", c.n_curve}, {"tol", c.profile_tol}});
  SolitonCurve curve;
  if (auto hit = cache.lookup(key)) {
    curve.omegas = (*hit)["omega"].get<std::vector<double>>();
    curve.Q_values = (*hit)["Q"].get<std::vector<double>>();
    curve.E_values = (*hit)["E"].get<std::vector<double>>();
    if ((*hit)["omega0"].is_number()) curve.omega_min_mass = (*hit)["omega0"].get<double>();
  } else {
    stage = "soliton curve";
    CurveOptions o;
    o.tol = c.profile_tol;
    o.jobs = c.jobs;
    curve = soliton_curve(nonlinearity(c), c.omega_min, c.omega_max, c.n_curve, o);
    cache.store(key, {{"version", kVersion},
                      {"omega", curve.omegas},
                      {"Q", curve.Q_values},
                      {"E", curve.E_values},
                      {"omega0", curve.omega_min_mass ? json(*curve.omega_min_mass) : json(nullptr)}});
  }
  Csv csv("omega,Q,E,dQ_domega");
  const auto& w = curve.omegas;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = i == 0 || i + 1 == w.size() ? std::nan("") : centered_derivative(w, curve.Q_values, i);
    csv.row(w[i], curve.Q_values[i], curve.E_values[i], d);
  }
  csv.save(fs::path(c.out) / "curve.csv");
  if (curve.omega_min_mass)
    std::cout << "omega0 = " << num(*curve.omega_min_mass) << "\n";
  else
    std::cout << "omega0 = none (Q has no interior minimum on the range)\n";
  if (w.size() >= 5) std::cout << "identity residual = " << num(hamiltonian_identity_check(curve)) << "\n";
  return 0;
}

int cmd_spectrum(const RunConfig& c) {
  const Cache cache(c);
  AdmissibilityConfig ac;
  ac.ell_max = c.ell_max;
  ac.sweep_ell_max = std::min(2, c.ell_max);
  ac.delta_res = c.delta_res;
  ac.jobs = c.jobs;
  SpectralReport r;
  if (c.potential == "free") {
    stage = "admissibility report";
    const auto zero = [](double) { return 0.0; };
    r = admissibility_report(c.omega.value_or(1.0), zero, zero, ac);
  } else {
    const auto p = cached_profile(c, require_omega(c), cache);
    stage = "admissibility report";
    r = admissibility_report(p, ac);
  }
  json sectors = json::array();
  for (const auto& s : r.sectors)
    sectors.push_back({{"ell", s.ell},
                       {"null_dimension", s.null_dimension},
                       {"chain_lengths", s.chain_lengths},
                       {"gap_energies", s.gap_energies}});
  json dips = json::array();
  for (const auto& d : r.dips)
    dips.push_back({{"ell", d.ell}, {"xi", d.xi}, {"sampled", d.sampled}, {"quadratic", d.quadratic}, {"refined", d.refined}});
  write_json(fs::path(c.out) / "spectrum.json", {{"omega", r.omega},
                                                 {"threshold_M", r.threshold_M},
                                                 {"admissible", r.admissible},
                                                 {"clause_embedded", r.clause_embedded},
                                                 {"clause_gap", r.clause_gap},
                                                 {"clause_threshold", r.clause_threshold},
                                                 {"null_dimension", r.null_dimension},
                                                 {"null_count_match", r.null_count_match},
                                                 {"resolution_warning", r.resolution_warning},
                                                 {"min_sigma", r.sweep.min_sigma},
                                                 {"threshold_sigma", r.threshold_sigma},
                                                 {"sectors", sectors},
                                                 {"dips", dips},
                                                 {"reasons", r.reasons}});
  for (std::size_t k = 0; k < r.sweep.ells.size(); ++k) {
    Csv csv("xi,sigma_min");
    for (std::size_t i = 0; i < r.sweep.xi.size(); ++i)
      csv.row(r.sweep.xi[i], r.sweep.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    csv.save(fs::path(c.out) / ("sweep_l" + std::to_string(r.sweep.ells[k]) + ".csv"));
  }
  std::cout << (r.admissible ? "admissible" : "not admissible") << ", null dimension " << r.null_dimension << " ("
            << r.null_count_match << "), min sigma " << num(r.sweep.min_sigma) << "\n";
  for (const auto& s : r.reasons) std::cout << "  " << s << "\n";
  return 0;
}

int cmd_basis(const RunConfig& c, bool norm_probe) {
  const Cache cache(c);
  ScatteringProblem pb;
  std::string profile_key = "free";
  if (c.potential == "free") {
    pb = ScatteringProblem::free(c.omega.value_or(1.0));
  } else {
    pb = ScatteringProblem::from_profile(cached_profile(c, require_omega(c), cache, &profile_key));
  }
  pb.opt.delta_res = c.delta_res;
  stage = "threshold estimate";
  const double M = estimate_threshold(pb).M;
  stage = "distorted transform";
  const auto field = RadialGrid::make_uniform(c.r_max, c.n_r, c.ell);
  const auto T = build_transform(pb, field, M, {c.xi_max, c.dxi, c.jobs});
  stage = "mode verification";
  const auto mv = ModeVerifier::from_problem(pb, c.ell);
  Csv csv("xi,regime,residual,iters");
  json modes = json::array();
  for (const auto& m : T.modes) {
    const double res = mv.check(pb, m).max();
    csv.row(m.xi, to_string(m.regime), res, m.iterations);
    std::vector<double> re(static_cast<std::size_t>(m.z.size())), im(re.size());
    for (Eigen::Index i = 0; i < m.z.size(); ++i) re[i] = m.z[i].real(), im[i] = m.z[i].imag();
    modes.push_back({{"xi", m.xi}, {"regime", to_string(m.regime)}, {"z_re", re}, {"z_im", im}});
  }
  csv.save(fs::path(c.out) / "transform.csv");
  // mode archive keyed by (profile, xi grid, sector)
  const std::string key = sha1_hex(json{{"profile", profile_key}, {"xi_max", c.xi_max}, {"dxi", c.dxi}, {"ell", c.ell}}.dump());
  write_json(fs::path(c.out) / "modes" / (key + ".json"),
             {{"profile", profile_key}, {"ell", c.ell}, {"threshold_M", M}, {"h", pb.opt.h}, {"modes", modes}});
  std::cout << T.modes.size() << " modes, threshold M = " << num(M) << "\n";
  if (norm_probe) {
    stage = "norm probe";
    NormProbeOptions po;
    po.seed = c.seed;
    const auto r = mapping_norm_probe({4, 8, 16, 32, 64}, pb.omega, pb.V1f, pb.V2f, po);
    Csv nc("mu,norm_est,slope_window");
    std::ostringstream win;
    win << r.window_lo << "-" << r.window_hi;
    for (const auto& row : r.rows) nc.row(row.mu, row.norm_est, win.str());
    nc.save(fs::path(c.out) / "norm_probe.csv");
    std::cout << "norm-probe slope " << num(r.fit.slope) << "\n";
  }
  return 0;
}

int cmd_evolve(const RunConfig& c) {
  const Cache cache(c);
  const Flow f = make_flow(c, cache, c.backend == "spectral");
  const auto& P = f.active(c.backend);
  const auto ts = c.times.empty() ? std::vector<double>{0.0, 1.0, 5.0, 10.0} : c.times;
  stage = "propagation";
  const auto u = P.evolve(gaussian(P.input_grid(), c.width), ts);
  Csv csv("t,r,re_a,im_a,re_b,im_b");
  const auto& g = P.output_grid();
  json norms = json::array();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto n = static_cast<Eigen::Index>(i);
      csv.row(ts[k], g.r[i], u[k].first[n].real(), u[k].first[n].imag(), u[k].second[n].real(), u[k].second[n].imag());
    }
    norms.push_back({{"t", ts[k]}, {"l2", l2_norm(g, u[k])}, {"sup", sup_norm(g, u[k])}});
  }
  csv.save(fs::path(c.out) / "evolve.csv");
  write_json(fs::path(c.out) / "evolve.json", {{"backend", P.name()}, {"width", c.width}, {"norms", norms}});
  for (const auto& n : norms)
    std::cout << "t = " << num(n["t"].get<double>()) << ": L2 " << num(n["l2"].get<double>()) << ", sup "
              << num(n["sup"].get<double>()) << "\n";
  return 0;
}

int cmd_decay(const RunConfig& c) {
  const Cache cache(c);
  const Flow f = make_flow(c, cache, c.backend == "spectral");
  stage = "decay fit";
  DecayOptions o;
  o.weight_c = c.c;
  const auto r = decay_fit(f.active(c.backend), gaussian(f.field, c.width), time_grid(c), o);
  write_decay(c, r, "decay", {{"backend", c.backend}, {"width", c.width}});
  return 0;
}

int cmd_weighted(const RunConfig& c) {
  const Cache cache(c);
  const Flow f = make_flow(c, cache);
  stage = "moment projection";
  const MomentCondition mc{c.M, c.c};
  const auto proj = moment_project(f.spectral->transform(), gaussian(f.field, c.width), mc);
  stage = "weighted decay fit";
  const auto r = weighted_decay_fit(*f.spectral, proj.f, mc, time_grid(c));
  write_decay(c, r, "weighted_decay",
              {{"M", c.M}, {"c", c.c}, {"condition", proj.condition}, {"projection_residual", proj.residual}});
  return 0;
}

int cmd_dispersive(const RunConfig& c) {
  const Cache cache(c);
  const Flow f = make_flow(c, cache, c.backend == "spectral");
  std::vector<double> ts = c.times;
  if (ts.empty())
    for (int t = 1; t <= 50; ++t) ts.push_back(t);
  stage = "dispersive suite";
  DispersiveOptions o;
  o.omega = f.omega;
  const auto& P = f.active(c.backend);
  const auto rep = dispersive_suite(P, &f.matrix->discrete(), smooth_family(P.input_grid(), 10, c.seed), ts, c.alpha, o);
  json rows = json::array();
  for (const auto& r : rep.clauses) {
    rows.push_back({{"clause", r.clause}, {"constant", r.constant}, {"spread", r.spread}, {"degree", r.degree},
                    {"pass", r.pass}});
    std::cout << std::left << std::setw(5) << r.clause << (r.pass ? "pass" : "FAIL") << "  constant " << num(r.constant)
              << "  spread " << num(r.spread) << "  degree " << r.degree << "\n";
  }
  write_json(fs::path(c.out) / "dispersive.json", {{"alpha", c.alpha}, {"backend", P.name()}, {"seed", c.seed},
                                                   {"chain_offset", rep.chain_offset}, {"clauses", rows},
                                                   {"pass", rep.pass}});
  return rep.pass ? 0 : 1;
}

int cmd_strichartz(const RunConfig& c, const std::vector<double>& horizons) {
  const Cache cache(c);
  const Flow f = make_flow(c, cache, c.backend == "spectral");
  const auto& P = f.active(c.backend);
  stage = "strichartz";
  const std::vector<std::pair<double, double>> pairs{{kInf, 2.0}, {8.0 / 3.0, 4.0}, {4.0, 3.0}};
  Csv csv("q,r,T,ratio");
  for (const auto& r : strichartz_table(P, gaussian(P.input_grid(), c.width), pairs, horizons)) {
    csv.row(r.q, r.r, r.T, r.ratio);
    std::cout << "(" << num(r.q) << ", " << num(r.r) << ") T = " << num(r.T) << ": ratio " << num(r.ratio) << "\n";
  }
  csv.save(fs::path(c.out) / "strichartz.csv");
  return 0;
}

int cmd_verify(const RunConfig& c) {
  VerifyOptions o;
  o.jobs = c.jobs;
  o.seed = c.seed;
  json table = json::array();
  bool all = true;
  run_acceptance(o, [&](const CriterionResult& r) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << r.id << "  " << r.title << "\n";
    for (const auto& l : r.lines) std::cout << "          " << l << "\n";
    if (!r.error.empty()) std::cout << "          error: " << r.error << "\n";
    std::cout << std::flush;
    table.push_back({{"id", r.id}, {"title", r.title}, {"pass", r.pass}, {"checks", r.lines}, {"error", r.error}});
    all = all && r.pass;
  });
  write_json(fs::path(c.out) / "verify.json", {{"seed", c.seed}, {"criteria", table}, {"pass", all}});
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal-mass solitons of saturated NLS: linearization, distorted transform and dispersive checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunConfig c;
  std::string config_path;
  // flag values land here and override the config file
  std::optional<std::string> kind, coupling, out, cache_dir, potential, backend;
  std::optional<double> p, q, omega, omega_min, omega_max, r_max, xi_max, dxi, width, cc, t_min, t_max, tol;
  std::optional<int> n, n_r, ell, ell_max, M, alpha, n_t;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
  std::vector<double> times, horizons{10.0, 20.0, 40.0};
  bool no_cache = false, norm_probe = false;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    s->add_option("--out", out, "output directory");
    s->add_option("--cache-dir", cache_dir, "cache directory (SSL_CACHE_DIR overrides)");
    s->add_flag("--no-cache", no_cache, "skip the artifact cache");
    s->add_option("--jobs", jobs, "worker threads");
    s->add_option("--seed", seed, "seed of randomized probes");
    s->add_option("--kind", kind, "type1 or type2");
    s->add_option("--p", p, "type1 exponent p");
    s->add_option("--q", q, "exponent q");
    s->add_option("--coupling", coupling, "squared: beta(R^2)R, amplitude: beta(R)R");
    s->add_option("--tol", tol, "profile bisection tolerance");
  };
  auto evolution = [&](CLI::App* s) {
    s->add_option("--omega", omega, "soliton frequency");
    s->add_option("--potential", potential, "soliton or free");
    s->add_option("--backend", backend, "spectral or matrix");
    s->add_option("--r-max", r_max, "field grid radius");
    s->add_option("--n-r", n_r, "field grid nodes");
    s->add_option("--ell", ell, "partial-wave sector");
    s->add_option("--xi-max", xi_max, "frequency cutoff");
    s->add_option("--dxi", dxi, "frequency step");
    s->add_option("--width", width, "Gaussian data width");
    s->add_option("--times", times, "evaluation times");
    s->add_option("--t-min", t_min, "first time of the log grid");
    s->add_option("--t-max", t_max, "last time of the log grid");
    s->add_option("--n-t", n_t, "points of the log grid");
  };

  auto* soliton = app.add_subcommand("soliton", "solve one profile, write profile.json, print Q and E");
  common(soliton);
  soliton->add_option("--omega", omega, "frequency");
  auto* curve = app.add_subcommand("curve", "mass/energy curve to curve.csv, print omega0");
  common(curve);
  curve->add_option("--omega-min", omega_min, "smallest frequency")->required();
  curve->add_option("--omega-max", omega_max, "largest frequency")->required();
  curve->add_option("--n", n, "number of frequencies");
  auto* spectrum = app.add_subcommand("spectrum", "admissibility report and sigma_min sweep");
  common(spectrum);
  spectrum->add_option("--omega", omega, "frequency");
  spectrum->add_option("--potential", potential, "soliton or free");
  spectrum->add_option("--ell-max", ell_max, "sectors checked for gap eigenvalues");
  auto* basis = app.add_subcommand("basis", "distorted transform diagnostics and mode archive");
  common(basis);
  evolution(basis);
  basis->add_flag("--norm-probe", norm_probe, "also write the high-frequency norm-probe table");
  auto* evolve = app.add_subcommand("evolve", "evolve a Gaussian and write the fields");
  common(evolve);
  evolution(evolve);
  auto* decay = app.add_subcommand("decay-fit", "sup-norm decay exponent");
  common(decay);
  evolution(decay);
  decay->add_option("--c", cc, "rate of the exponential weight");
  auto* weighted = app.add_subcommand("weighted-decay", "moment projection and weighted decay exponent");
  common(weighted);
  evolution(weighted);
  weighted->add_option("--M", M, "moment order (0, 1, 2)");
  weighted->add_option("--c", cc, "rate of the exponential weight");
  auto* dispersive = app.add_subcommand("dispersive", "dispersive estimate suite over a 10-function family");
  common(dispersive);
  evolution(dispersive);
  dispersive->add_option("--alpha", alpha, "moment weight |x|^alpha (1 or 2)");
  auto* strichartz = app.add_subcommand("strichartz", "Strichartz norm ratios for the admissible pairs");
  common(strichartz);
  evolution(strichartz);
  strichartz->add_option("--horizons", horizons, "time horizons T");
  auto* verify = app.add_subcommand("verify-all", "run the acceptance suite");
  common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) load_config(config_path, c);
    auto set = [](auto& dst, const auto& src) {
      if (src) dst = *src;
    };
    set(c.kind, kind), set(c.coupling, coupling), set(c.out, out), set(c.cache, cache_dir);
    set(c.potential, potential), set(c.backend, backend), set(c.p, p), set(c.q, q);
    if (omega) c.omega = omega;
    set(c.omega_min, omega_min), set(c.omega_max, omega_max), set(c.r_max, r_max), set(c.xi_max, xi_max);
    set(c.dxi, dxi), set(c.width, width), set(c.c, cc), set(c.t_min, t_min), set(c.t_max, t_max);
    set(c.profile_tol, tol), set(c.n_curve, n), set(c.n_r, n_r), set(c.ell, ell), set(c.ell_max, ell_max);
    set(c.M, M), set(c.alpha, alpha), set(c.n_t, n_t), set(c.jobs, jobs), set(c.seed, seed);
    if (!times.empty()) c.times = times;
    c.no_cache = no_cache;
    validate(c);
    if (c.potential == "soliton" && !c.omega &&
        (sub == soliton || sub == spectrum || sub == basis || sub == evolve || sub == decay || sub == weighted ||
         sub == dispersive || sub == strichartz))
      throw ConfigError("missing --omega");
    if (sub != verify) nonlinearity(c);  // exponent checks before any compute

    const std::string name = sub->get_name();
    if (name == "soliton") return cmd_soliton(c);
    if (name == "curve") return cmd_curve(c);
    if (name == "spectrum") return cmd_spectrum(c);
    if (name == "basis") return cmd_basis(c, norm_probe);
    if (name == "evolve") return cmd_evolve(c);
    if (name == "decay-fit") return cmd_decay(c);
    if (name == "weighted-decay") return cmd_weighted(c);
    if (name == "dispersive") return cmd_dispersive(c);
    if (name == "strichartz") return cmd_strichartz(c, horizons);
    return cmd_verify(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure in " << stage << ": " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
