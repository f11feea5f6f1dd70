#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "wgbs/error.hpp"

namespace wgbs {

/// Bisection on [a, b]. Requires f(a) and f(b) to have opposite signs.
/// Iterates until the bracket is narrower than tol (absolute in x).
template <typename F>
double bisect(F&& f, double a, double b, double tol, int max_iter = 200) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw numeric_error("bisect: interval does not bracket a root");
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Scans [a, b] with n uniform samples and returns every subinterval across
/// which f changes sign, ordered by position.
template <typename F>
std::vector<std::pair<double, double>> sign_change_brackets(F&& f, double a, double b, int n) {
  std::vector<std::pair<double, double>> out;
  if (n < 2) return out;
  double x_prev = a;
  double f_prev = f(a);
  for (int i = 1; i < n; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / (n - 1);
    const double fx = f(x);
    if (f_prev == 0.0) {
      out.emplace_back(x_prev, x_prev);
    } else if (fx != 0.0 && ((fx > 0) != (f_prev > 0))) {
      out.emplace_back(x_prev, x);
    }
    x_prev = x;
    f_prev = fx;
  }
  if (f_prev == 0.0) out.emplace_back(x_prev, x_prev);
  return out;
}

namespace detail {
template <typename F>
double simpson_rec(F& f, double a, double m, double b, double fa, double fm, double fb,
                   double whole, double rel_tol, double abs_floor, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw numeric_error("adaptive_simpson: recursion limit reached");
  if (std::abs(delta) <= 15.0 * (rel_tol * std::abs(left + right) + abs_floor)) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, lm, m, fa, flm, fm, left, rel_tol, abs_floor * 0.5, depth - 1) +
         simpson_rec(f, m, rm, b, fm, frm, fb, right, rel_tol, abs_floor * 0.5, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to the given relative tolerance.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (!(b >= a)) throw domain_error("adaptive_simpson: requires b >= a");
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double abs_floor = std::abs(whole) * rel_tol * 1e-3 +
                           std::numeric_limits<double>::min();
  return detail::simpson_rec(f, a, m, b, fa, fm, fb, whole, rel_tol, abs_floor, 60);
}

/// Ordinary least squares for y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double residual_variance = 0.0;  ///< unbiased, dof = n - 2
  std::size_t n = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw domain_error("linear_fit: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw domain_error("linear_fit: needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw domain_error("linear_fit: all x values identical");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    rss += r * r;
  }
  if (n > 2) {
    fit.residual_variance = rss / static_cast<double>(n - 2);
    fit.slope_stderr = std::sqrt(fit.residual_variance / sxx);
    double sx2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) sx2 += x[i] * x[i];
    fit.intercept_stderr =
        std::sqrt(fit.residual_variance * sx2 / (static_cast<double>(n) * sxx));
  }
  return fit;
}

/// Solves the 3x3 system A x = b by Gaussian elimination with partial pivoting.
inline std::array<double, 3> solve3x3(std::array<std::array<double, 3>, 3> a,
                                      std::array<double, 3> b) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (a[piv][col] == 0.0) throw numeric_error("solve3x3: singular matrix");
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (int r = col + 1; r < 3; ++r) {
      const double m = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= m * a[col][c];
      b[r] -= m * b[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

}  // namespace wgbs
