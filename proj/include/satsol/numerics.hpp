#pragma once
// Small numerical helpers shared by the modules: uniform-grid quadrature and
// differencing, least-squares slope fits, golden-section search, parallel loops.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace satsol {

// Composite trapezoid on a uniform grid.
inline double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * h;
}

// Composite Simpson on a uniform grid; an even number of intervals is closed
// with a 3/8 panel at the end.
inline double simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  if (n < 3) return trapezoid(f, h);
  std::size_t m = n - 1;  // intervals
  double s = 0.0;
  std::size_t end = m;
  if (m % 2 == 1) {
    if (m < 3) return trapezoid(f, h);
    end = m - 3;
    s += 3.0 * h / 8.0 * (f[end] + 3.0 * f[end + 1] + 3.0 * f[end + 2] + f[end + 3]);
  }
  double acc = f[0] + f[end];
  for (std::size_t i = 1; i < end; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
  return s + acc * h / 3.0;
}

// Fourth-order first derivative on a uniform grid starting at r = 0, using
// parity of f about the origin (+1 even, -1 odd) and one-sided stencils at the far end.
inline std::vector<double> derivative4(const std::vector<double>& f, double h, int parity) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  auto at = [&](long i) -> double {
    if (i < 0) return parity * f[static_cast<std::size_t>(-i)];
    return f[static_cast<std::size_t>(i)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    long k = static_cast<long>(i);
    if (i + 2 < n) {
      d[i] = (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h);
    } else {
      // backward 5-point
      d[i] = (25.0 * at(k) - 48.0 * at(k - 1) + 36.0 * at(k - 2) - 16.0 * at(k - 3) + 3.0 * at(k - 4)) /
             (12.0 * h);
      if (i + 1 < n) {
        d[i] = (3.0 * at(k + 1) + 10.0 * at(k) - 18.0 * at(k - 1) + 6.0 * at(k - 2) - at(k - 3)) / (12.0 * h);
      }
    }
  }
  return d;
}

// Fourth-order second derivative with the same boundary handling.
inline std::vector<double> second_derivative4(const std::vector<double>& f, double h, int parity) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  auto at = [&](long i) -> double {
    if (i < 0) return parity * f[static_cast<std::size_t>(-i)];
    return f[static_cast<std::size_t>(i)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    long k = static_cast<long>(i);
    if (i + 2 < n) {
      d[i] = (-at(k - 2) + 16.0 * at(k - 1) - 30.0 * at(k) + 16.0 * at(k + 1) - at(k + 2)) / (12.0 * h * h);
    } else {
      d[i] = (45.0 * at(k) - 154.0 * at(k - 1) + 214.0 * at(k - 2) - 156.0 * at(k - 3) + 61.0 * at(k - 4) -
              10.0 * at(k - 5)) /
             (12.0 * h * h);
    }
  }
  return d;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double band95 = 0.0;  // half-width of the 95% band on the slope
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = y[i] - f.intercept - f.slope * x[i];
      ss += e * e;
    }
    f.slope_stderr = std::sqrt(ss / (n - 2) / sxx);
    f.band95 = 1.96 * f.slope_stderr;
  }
  return f;
}

// Log-log slope of y against x.
inline LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) lx[i] = std::log(x[i]), ly[i] = std::log(y[i]);
  return fit_line(lx, ly);
}

// Golden-section minimization of a unimodal f on [a, b].
template <class F>
double golden_section(F&& f, double a, double b, double rel_tol, int max_iter = 200) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > rel_tol * std::abs(0.5 * (a + b)); ++it) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline unsigned default_jobs() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * double(i) / double(n - 1);
  return v;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
  std::vector<double> v = linspace(std::log(a), std::log(b), n);
  for (auto& x : v) x = std::exp(x);
  if (n > 1) v.front() = a, v.back() = b;
  return v;
}

}  // namespace satsol
