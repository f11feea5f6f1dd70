#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "wgbs/device.hpp"
#include "wgbs/error.hpp"

namespace wgbs {

enum class Pol { s, p };

inline const char* pol_name(Pol p) { return p == Pol::s ? "s" : "p"; }

struct ReflectanceResult {
  double wavelength_nm = 0;
  double R = 0;
  double T = 0;
  Pol polarization = Pol::s;
  double angle_deg = 0;
};

namespace detail {

using cld = std::complex<long double>;

struct Mat2 {
  cld a{1, 0}, b{0, 0}, c{0, 0}, d{1, 0};
};

inline Mat2 operator*(const Mat2& x, const Mat2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
          x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

// n cos(theta) with the decaying-branch convention Im >= 0 (fields go as
// exp(+i k z) with time factor exp(-i w t), so absorbing means Im(n) > 0).
inline cld n_cos_theta(cld n, long double kx) {
  cld v = n * std::sqrt(cld(1, 0) - (kx / n) * (kx / n));
  if (v.imag() < 0 || (v.imag() == 0 && v.real() < 0)) v = -v;
  return v;
}

}  // namespace detail

/// Plane-wave reflectance/transmittance of a layer stack by the
/// characteristic-matrix method, accumulated in extended precision.
/// An empty stack gives the bare ambient/substrate interface.
inline ReflectanceResult reflectance(const LayerStack& stack, double wavelength_nm,
                                     double angle_deg, Pol pol) {
  using detail::cld;
  if (!(wavelength_nm > 0)) throw domain_error("reflectance: wavelength must be positive");
  if (!(angle_deg >= 0 && angle_deg < 90))
    throw domain_error("reflectance: incidence angle must be in [0, 90)");

  const std::complex<double> n0d = stack.ambient().index(wavelength_nm);
  if (n0d.imag() != 0) throw domain_error("reflectance: ambient must be lossless");
  const cld n0(n0d.real(), 0);
  const long double theta0 = static_cast<long double>(angle_deg) * std::numbers::pi_v<long double> / 180.0L;
  const long double kx = n0.real() * std::sin(theta0);
  const long double k0 = 2.0L * std::numbers::pi_v<long double> / static_cast<long double>(wavelength_nm);

  const auto admittance = [&](cld n) {
    const cld q = detail::n_cos_theta(n, kx);
    return pol == Pol::s ? q : n * n / q;
  };

  detail::Mat2 M;
  for (const auto& layer : stack.layers()) {
    const std::complex<double> nd = layer.material.index(wavelength_nm);
    const cld n(nd.real(), nd.imag());
    const cld q = detail::n_cos_theta(n, kx);
    const cld eta = pol == Pol::s ? q : n * n / q;
    const cld delta = k0 * q * static_cast<long double>(layer.thickness_nm);
    if (std::abs(delta.imag()) > 700.0L)
      throw numeric_error("reflectance: layer '" + layer.material.name() + "' optically opaque");
    const cld c = std::cos(delta);
    const cld s = std::sin(delta);
    const cld i(0, 1);
    M = M * detail::Mat2{c, -i * s / eta, -i * eta * s, c};
  }

  const cld eta0 = admittance(n0);
  const std::complex<double> nsd = stack.substrate().index(wavelength_nm);
  const cld eta_sub = admittance(cld(nsd.real(), nsd.imag()));
  const cld B = M.a + M.b * eta_sub;
  const cld C = M.c + M.d * eta_sub;
  const cld denom = eta0 * B + C;
  const cld r = (eta0 * B - C) / denom;
  const long double R = std::norm(r);
  const long double T = 4.0L * eta0.real() * eta_sub.real() / std::norm(denom);
  if (R > 1.0L + 1e-9L || T < -1e-9L)
    throw numeric_error("reflectance: power out of range (gain media unsupported)");

  ReflectanceResult out;
  out.wavelength_nm = wavelength_nm;
  out.R = static_cast<double>(std::min(R, 1.0L));
  out.T = static_cast<double>(std::max(T, 0.0L));
  out.polarization = pol;
  out.angle_deg = angle_deg;
  return out;
}

/// Spectrum over [wl_lo, wl_hi], n uniform samples, ordered by wavelength.
inline std::vector<ReflectanceResult> reflectance_spectrum(const LayerStack& stack, double wl_lo,
                                                           double wl_hi, int n, double angle_deg,
                                                           Pol pol) {
  if (n < 2) throw domain_error("reflectance_spectrum: needs at least 2 samples");
  if (!(wl_lo > 0 && wl_hi > wl_lo)) throw domain_error("reflectance_spectrum: bad range");
  std::vector<ReflectanceResult> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double wl = wl_lo + (wl_hi - wl_lo) * i / (n - 1);
    out.push_back(reflectance(stack, wl, angle_deg, pol));
  }
  return out;
}

/// Center of the high-reflectance stopband: midpoint, in frequency, of the
/// two crossings of R = max - drop. A mirror's R is exactly symmetric in
/// frequency about its design center, so this is immune to the faint
/// reflectance ripple that makes a naive argmax land a few nm off center.
inline double stopband_center(const LayerStack& stack, double wl_lo, double wl_hi,
                              int samples = 2001, double angle_deg = 0.0, Pol pol = Pol::s,
                              double drop = 0.02) {
  if (samples < 16) throw domain_error("stopband_center: too few samples");
  if (!(wl_lo > 0 && wl_hi > wl_lo)) throw domain_error("stopband_center: bad range");
  if (!(drop > 0)) throw domain_error("stopband_center: drop must be positive");
  const double x_lo = 1.0 / wl_hi;
  const double x_hi = 1.0 / wl_lo;
  std::vector<double> xs(static_cast<std::size_t>(samples));
  std::vector<double> Rs(static_cast<std::size_t>(samples));
  double r_max = 0.0;
  for (int i = 0; i < samples; ++i) {
    xs[static_cast<std::size_t>(i)] = x_lo + (x_hi - x_lo) * i / (samples - 1);
    Rs[static_cast<std::size_t>(i)] =
        reflectance(stack, 1.0 / xs[static_cast<std::size_t>(i)], angle_deg, pol).R;
    r_max = std::max(r_max, Rs[static_cast<std::size_t>(i)]);
  }
  const double thr = r_max - drop;
  int first = -1, last = -1;
  for (int i = 0; i < samples; ++i) {
    if (Rs[static_cast<std::size_t>(i)] >= thr) {
      if (first < 0) first = i;
      last = i;
    }
  }
  const auto cross = [&](int below, int above) {
    const double x0 = xs[static_cast<std::size_t>(below)], x1 = xs[static_cast<std::size_t>(above)];
    const double r0 = Rs[static_cast<std::size_t>(below)], r1 = Rs[static_cast<std::size_t>(above)];
    return x0 + (thr - r0) * (x1 - x0) / (r1 - r0);
  };
  const double xl = first > 0 ? cross(first - 1, first) : xs.front();
  const double xr = last < samples - 1 ? cross(last + 1, last) : xs.back();
  return 1.0 / (0.5 * (xl + xr));
}

}  // namespace wgbs
