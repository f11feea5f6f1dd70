#pragma once

// Guided-mode analysis for planar (1-D) slab waveguides, plus the
// effective-index reductions used by the ridge waveguide and the
// directional-coupler model.
//
// Geometry convention for a slab solve: the core occupies
// |x| <= thickness/2 with the "top" cladding at x > +thickness/2 and the
// "bottom" cladding at x < -thickness/2.  Positions are reported in
// micrometres, thicknesses are accepted in nanometres (matching the layer
// bookkeeping elsewhere in the library).
//
// The dispersion relation is solved in phase form,
//
//   Phi(N) = kappa*t - atan(zeta_t*gamma_t/kappa) - atan(zeta_b*gamma_b/kappa)
//          = m*pi ,     m = 0, 1, 2, ...
//
// with kappa = k0*sqrt(n_core^2 - N^2), gamma = k0*sqrt(N^2 - n_clad^2) and
// zeta = 1 for TE or (n_core/n_clad)^2 for TM.  Phi is strictly decreasing in
// N, so each order has at most one root; roots are bracketed by a uniform
// scan of the guided interval and polished by bisection.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "wgbs/device.hpp"
#include "wgbs/error.hpp"
#include "wgbs/numerics.hpp"

namespace wgbs {

enum class SlabPol { TE, TM };

inline const char* slab_pol_name(SlabPol p) { return p == SlabPol::TE ? "TE" : "TM"; }

// One guided mode of a slab solve.  The amplitude profile is sampled on a
// grid shared by every mode returned from the same solve and is normalised to
// unit peak magnitude.
struct ModeSolution {
    double effective_index = 0.0;
    SlabPol polarization = SlabPol::TE;
    int order = 0;                    // number of field sign changes
    std::vector<double> position_um;  // transverse sample positions
    std::vector<double> amplitude;    // field profile, unit peak
};

struct SlabSolveOptions {
    int scan_samples = 2000;      // uniform samples used to bracket roots
    double neff_tol = 1e-13;      // bisection tolerance on the effective index
    int profile_samples = 2001;   // points in each sampled mode profile
};

namespace detail {

struct SlabContext {
    double n1 = 0.0, nt = 0.0, nb = 0.0;  // core / top clad / bottom clad
    double t_um = 0.0;                    // core thickness
    double k0 = 0.0;                      // vacuum wavenumber, 1/um
    double zt = 1.0, zb = 1.0;            // polarisation weights
};

// Total transverse phase accumulated across the core, minus the two
// interface phase shifts; guided modes satisfy phase_function == m*pi.
inline double slab_phase(const SlabContext& c, double neff) {
    const double kappa = c.k0 * std::sqrt(std::max(0.0, c.n1 * c.n1 - neff * neff));
    const double gt = c.k0 * std::sqrt(std::max(0.0, neff * neff - c.nt * c.nt));
    const double gb = c.k0 * std::sqrt(std::max(0.0, neff * neff - c.nb * c.nb));
    return kappa * c.t_um - std::atan2(c.zt * gt, kappa) - std::atan2(c.zb * gb, kappa);
}

}  // namespace detail

// Residual of the guided-mode condition at a candidate effective index:
// distance of the accumulated phase from the nearest multiple of pi
// (radians).  A converged mode re-substitutes to essentially zero.
inline double slab_dispersion_residual(double n_core, double n_clad_top, double n_clad_bottom,
                                       double thickness_nm, double wavelength_nm, SlabPol pol,
                                       double effective_index) {
    detail::SlabContext c;
    c.n1 = n_core;
    c.nt = n_clad_top;
    c.nb = n_clad_bottom;
    c.t_um = thickness_nm * 1e-3;
    c.k0 = 2.0 * std::numbers::pi / (wavelength_nm * 1e-3);
    if (pol == SlabPol::TM) {
        c.zt = (n_core * n_core) / (n_clad_top * n_clad_top);
        c.zb = (n_core * n_core) / (n_clad_bottom * n_clad_bottom);
    }
    const double phi = detail::slab_phase(c, effective_index);
    const double m = std::round(phi / std::numbers::pi);
    return std::abs(phi - m * std::numbers::pi);
}

// Solve for every guided mode of a three-layer slab, ordered by descending
// effective index (order 0 first).  Returns an empty vector when the slab is
// below cutoff.  Throws domain_error for non-guiding parameter sets
// (core index not above both claddings) or invalid dimensions.
inline std::vector<ModeSolution> solve_slab_modes(double n_core, double n_clad_top,
                                                  double n_clad_bottom, double thickness_nm,
                                                  double wavelength_nm, SlabPol pol,
                                                  const SlabSolveOptions& opt = {}) {
    if (!(thickness_nm > 0.0)) throw domain_error("slab thickness must be positive");
    if (!(wavelength_nm > 0.0)) throw domain_error("wavelength must be positive");
    if (!(n_core > n_clad_top && n_core > n_clad_bottom))
        throw domain_error("core index must exceed both cladding indices for guided modes");
    if (!(n_clad_top >= 1.0 && n_clad_bottom >= 1.0))
        throw domain_error("cladding indices must be at least 1");
    if (opt.scan_samples < 16) throw domain_error("scan_samples too small");
    if (opt.profile_samples < 3) throw domain_error("profile_samples too small");

    detail::SlabContext c;
    c.n1 = n_core;
    c.nt = n_clad_top;
    c.nb = n_clad_bottom;
    c.t_um = thickness_nm * 1e-3;
    c.k0 = 2.0 * std::numbers::pi / (wavelength_nm * 1e-3);
    if (pol == SlabPol::TM) {
        c.zt = (n_core * n_core) / (n_clad_top * n_clad_top);
        c.zb = (n_core * n_core) / (n_clad_bottom * n_clad_bottom);
    }

    // Guided interval: max cladding index < N < core index.
    const double n_lo = std::max(n_clad_top, n_clad_bottom);
    const double lo = n_lo + 1e-12;
    const double hi = n_core - 1e-12;
    if (!(hi > lo)) return {};

    // Uniform scan of the phase function, reused to bracket every order.
    const int ns = opt.scan_samples;
    std::vector<double> grid(static_cast<size_t>(ns)), phase(static_cast<size_t>(ns));
    for (int i = 0; i < ns; ++i) {
        grid[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (ns - 1);
        phase[static_cast<size_t>(i)] = detail::slab_phase(c, grid[static_cast<size_t>(i)]);
    }

    std::vector<double> roots;  // descending in effective index as m rises
    for (int m = 0;; ++m) {
        const double target = m * std::numbers::pi;
        // Phi is decreasing: root exists iff Phi(lo) >= target (> Phi(hi)).
        if (phase.front() < target) break;
        double a = grid.front(), b = grid.back();
        bool bracketed = false;
        for (int i = 0; i + 1 < ns; ++i) {
            if (phase[static_cast<size_t>(i)] >= target &&
                phase[static_cast<size_t>(i + 1)] < target) {
                a = grid[static_cast<size_t>(i)];
                b = grid[static_cast<size_t>(i + 1)];
                bracketed = true;
                break;
            }
        }
        if (!bracketed) {
            if (phase.back() >= target) break;  // root hugs the core-index edge; unresolvable
            // fall back to the full interval (scan too coarse near an edge)
        }
        const double root =
            bisect([&](double n) { return detail::slab_phase(c, n) - target; }, a, b,
                   opt.neff_tol, 200);
        roots.push_back(root);
    }
    if (roots.empty()) return {};

    // Common profile grid: pad the core by several decay lengths of the
    // least-confined mode so tails are represented, capped to keep the grid
    // sane arbitrarily close to cutoff.
    double gamma_min = std::numeric_limits<double>::infinity();
    for (double n : roots) {
        const double gt = c.k0 * std::sqrt(std::max(0.0, n * n - c.nt * c.nt));
        const double gb = c.k0 * std::sqrt(std::max(0.0, n * n - c.nb * c.nb));
        gamma_min = std::min({gamma_min, gt, gb});
    }
    double pad_um = 9.0 / std::max(gamma_min, 1e-9);
    pad_um = std::clamp(pad_um, 1.0, 40.0);

    // The grid is symmetric about the core centre and places nodes exactly on
    // the two core interfaces, so piecewise-smooth integrands built from the
    // profiles (overlaps, weighted norms) can be integrated region by region
    // without straddling an index discontinuity.  The delivered point count
    // approximates profile_samples.
    const double half_t = c.t_um / 2.0;
    const double h_target = (c.t_um + 2.0 * pad_um) / (opt.profile_samples - 1);
    const int half_core_steps = std::max(1, static_cast<int>(std::ceil(half_t / h_target)));
    const double h = half_t / half_core_steps;
    int clad_steps = static_cast<int>(std::ceil(pad_um / h));
    if (clad_steps % 2 != 0) ++clad_steps;  // keep each region Simpson-friendly
    const int n_side = half_core_steps + clad_steps;
    const int total_samples = 2 * n_side + 1;

    std::vector<ModeSolution> out;
    out.reserve(roots.size());
    for (size_t m = 0; m < roots.size(); ++m) {
        const double neff = roots[m];
        const double kappa = c.k0 * std::sqrt(std::max(0.0, c.n1 * c.n1 - neff * neff));
        const double gt = c.k0 * std::sqrt(std::max(0.0, neff * neff - c.nt * c.nt));
        const double gb = c.k0 * std::sqrt(std::max(0.0, neff * neff - c.nb * c.nb));
        const double phi_b = std::atan2(c.zb * gb, kappa);  // phase at the bottom interface

        ModeSolution mode;
        mode.effective_index = neff;
        mode.polarization = pol;
        mode.position_um.resize(static_cast<size_t>(total_samples));
        mode.amplitude.resize(static_cast<size_t>(total_samples));

        const double e_bot = std::cos(phi_b);                    // field at x = -t/2
        const double e_top = std::cos(kappa * c.t_um - phi_b);   // field at x = +t/2
        for (int i = 0; i < total_samples; ++i) {
            const double x = (i - n_side) * h;
            double e;
            if (i < clad_steps) {
                e = e_bot * std::exp(gb * (x + half_t));
            } else if (i > clad_steps + 2 * half_core_steps) {
                e = e_top * std::exp(-gt * (x - half_t));
            } else {
                e = std::cos(kappa * (x + half_t) - phi_b);
            }
            mode.position_um[static_cast<size_t>(i)] = x;
            mode.amplitude[static_cast<size_t>(i)] = e;
        }

        double peak = 0.0;
        for (double v : mode.amplitude) peak = std::max(peak, std::abs(v));
        if (peak > 0.0)
            for (double& v : mode.amplitude) v /= peak;

        int sign_changes = 0;
        double prev = 0.0;
        for (double v : mode.amplitude) {
            if (std::abs(v) < 1e-12) continue;  // skip numerically dead samples
            if (prev != 0.0 && v * prev < 0.0) ++sign_changes;
            prev = v;
        }
        mode.order = sign_changes;
        out.push_back(std::move(mode));
    }
    return out;
}

// --- Effective-index reduction for the etched ridge -------------------------

// Lateral modes of the ridge waveguide via the effective-index method:
// the vertical stack (core film between low-index cladding) is solved first
// for the requested polarisation; its fundamental effective index becomes the
// "core" of a lateral slab whose claddings are the etched regions at the
// cladding material index.  The lateral solve uses the orthogonal
// polarisation, as usual for the effective-index factorisation.  Returns the
// lateral modes (empty when the ridge is below lateral cutoff); throws
// domain_error if the vertical stack itself is below cutoff.
inline std::vector<ModeSolution> ridge_effective_index(const RidgeGeometry& geom,
                                                       const StackParams& stack,
                                                       double wavelength_nm, SlabPol pol,
                                                       const SlabSolveOptions& opt = {}) {
    geom.validate();
    const double n_core = stack.core.real_index(wavelength_nm);
    const double n_clad = stack.cladding.real_index(wavelength_nm);
    const auto vertical =
        solve_slab_modes(n_core, n_clad, n_clad, geom.core_thickness_nm, wavelength_nm, pol, opt);
    if (vertical.empty())
        throw domain_error("vertical waveguide is below cutoff at " +
                           std::to_string(wavelength_nm) + " nm");
    const double n_v = vertical.front().effective_index;

    const SlabPol lateral_pol = (pol == SlabPol::TE) ? SlabPol::TM : SlabPol::TE;
    if (!(n_v > n_clad)) return {};
    return solve_slab_modes(n_v, n_clad, n_clad, geom.ridge_width_um * 1000.0, wavelength_nm,
                            lateral_pol, opt);
}

// --- Directional-coupler supermode model ------------------------------------

// Two-mode model of the directional coupler at one wavelength.  The distance
// for complete power transfer between the arms is
// full_transfer_length_um = lambda / (2 (n_even - n_odd)).
struct CouplerModel {
    double wavelength_nm = 0.0;
    double n_even = 0.0;
    double n_odd = 0.0;
    double full_transfer_length_um = 0.0;
};

struct SplitResult {
    double cross = 0.0;    // power fraction transferred to the other arm
    double through = 0.0;  // power fraction remaining in the input arm
};

// Build the supermode model for the coupling section.  The two ridge guides
// and the gap between them are merged into one wide effective slab
// (width = 2 * ridge width + gap); its outer claddings sit a small,
// calibrated lateral_index_step below the vertical effective index, standing
// in for the weak lateral confinement of the real etched structure.  The two
// lowest lateral supermodes (symmetric/antisymmetric) set the transfer
// length.  Throws domain_error when the merged section supports fewer than
// two lateral modes, where the two-mode picture is meaningless.
inline CouplerModel coupler_model(const RidgeGeometry& geom, const StackParams& stack,
                                  const CouplerSpec& spec, double wavelength_nm,
                                  const CouplerModelOptions& options = {},
                                  const SlabSolveOptions& opt = {}) {
    geom.validate();
    if (!(spec.gap_um >= 0.0)) throw domain_error("coupler gap must be non-negative");
    if (!(options.lateral_index_step > 0.0))
        throw domain_error("lateral_index_step must be positive");

    const double n_core = stack.core.real_index(wavelength_nm);
    const double n_clad = stack.cladding.real_index(wavelength_nm);
    const auto vertical =
        solve_slab_modes(n_core, n_clad, n_clad, geom.core_thickness_nm, wavelength_nm,
                         SlabPol::TE, opt);
    if (vertical.empty())
        throw domain_error("vertical waveguide is below cutoff at " +
                           std::to_string(wavelength_nm) + " nm");
    const double n_v = vertical.front().effective_index;

    const double merged_width_um = 2.0 * geom.ridge_width_um + spec.gap_um;
    const double n_side = n_v - options.lateral_index_step;
    if (!(n_side >= 1.0))
        throw domain_error("lateral_index_step puts the side index below 1");

    const auto lateral = solve_slab_modes(n_v, n_side, n_side, merged_width_um * 1000.0,
                                          wavelength_nm, SlabPol::TM, opt);
    if (lateral.size() < 2)
        throw domain_error(
            "coupling section supports fewer than two lateral supermodes; "
            "two-mode transfer model does not apply");

    CouplerModel model;
    model.wavelength_nm = wavelength_nm;
    model.n_even = lateral[0].effective_index;
    model.n_odd = lateral[1].effective_index;
    const double dn = model.n_even - model.n_odd;
    if (!(dn > 0.0)) throw numeric_error("supermode splitting is not positive");
    model.full_transfer_length_um = (wavelength_nm * 1e-3) / (2.0 * dn);
    return model;
}

// Power splitting after propagating a given coupling length.  cross and
// through sum to one exactly; a 50/50 split occurs at half the full-transfer
// length.
inline SplitResult splitting_ratio(double length_um, const CouplerModel& model) {
    if (!(length_um >= 0.0)) throw domain_error("coupling length must be non-negative");
    if (!(model.full_transfer_length_um > 0.0))
        throw domain_error("coupler model has no positive transfer length");
    SplitResult r;
    const double s = std::sin(std::numbers::pi * length_um / (2.0 * model.full_transfer_length_um));
    r.cross = s * s;
    r.through = 1.0 - r.cross;
    return r;
}

// Length at which the coupler splits power equally between the arms.
inline double fifty_fifty_length_um(const CouplerModel& model) {
    return model.full_transfer_length_um / 2.0;
}

}  // namespace wgbs
