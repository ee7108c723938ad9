#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace onalloc {

/// A dual-splitting schedule: g is the marginal dual share kept by the
/// offline side at level t, G its antiderivative with G(0) = 0, and F the
/// guarantee constant tying them together via G(t) + 1 - g(t) = F for all t.
struct GFunction {
  std::function<double(double)> g;
  std::function<double(double)> G;
  double F = 0.0;
  double g_deriv0 = std::numeric_limits<double>::quiet_NaN();
  bool exponential = false;
};

/// g(x) = e^{x-1}: the schedule whose F equals 1 - 1/e.
inline GFunction g_exponential() {
  GFunction f;
  f.g = [](double x) { return std::exp(x - 1.0); };
  f.G = [](double t) { return std::exp(t - 1.0) - std::exp(-1.0); };
  f.F = 1.0 - std::exp(-1.0);
  f.g_deriv0 = std::exp(-1.0);
  f.exponential = true;
  return f;
}

inline double gfunction_residual(const GFunction& f, double t) {
  return f.G(t) + 1.0 - f.g(t) - f.F;
}

/// Max |G(t)+1-g(t)-F| over a uniform grid on [0,1].
inline double gfunction_max_residual(const GFunction& f, int grid_points = 10000) {
  double worst = 0.0;
  for (int i = 0; i <= grid_points; ++i) {
    const double t = static_cast<double>(i) / grid_points;
    worst = std::max(worst, std::abs(gfunction_residual(f, t)));
  }
  return worst;
}

/// Throws unless g is non-decreasing on the grid, g(1) = 1, and the defining
/// integral identity holds to 1e-12.
inline void validate_gfunction(const GFunction& f, int grid_points = 10000) {
  if (!f.g || !f.G) throw std::invalid_argument("g-function: g and G must be set");
  if (std::abs(f.g(1.0) - 1.0) > 1e-12)
    throw std::invalid_argument("g-function: g(1) must equal 1");
  double prev = f.g(0.0);
  for (int i = 1; i <= grid_points; ++i) {
    const double cur = f.g(static_cast<double>(i) / grid_points);
    if (!(cur >= prev - 1e-15))
      throw std::invalid_argument("g-function: g must be non-decreasing on [0,1]");
    prev = cur;
  }
  const double res = gfunction_max_residual(f, grid_points);
  if (!(res <= 1e-12))
    throw std::invalid_argument("g-function: identity G(t)+1-g(t)=F violated, residual " +
                                std::to_string(res));
}

/// Solves g(y) = target on [0,1] for a non-decreasing g. Closed-form for the
/// exponential schedule, bisection otherwise. Clamps outside [g(0), g(1)].
inline double gfunction_inverse(const GFunction& f, double target) {
  if (std::isnan(target)) return std::numeric_limits<double>::quiet_NaN();
  if (f.exponential) {
    if (target <= std::exp(-1.0)) return 0.0;
    if (target >= 1.0) return 1.0;
    return 1.0 + std::log(target);
  }
  if (target <= f.g(0.0)) return 0.0;
  if (target >= f.g(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f.g(mid) <= target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace onalloc
