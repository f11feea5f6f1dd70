#pragma once

/// Scene builders and measurement protocols on top of the 2D FDTD engine:
///
///  * vertical-cut dipole scene: the epitaxial layer stack painted across the
///    domain, a point dipole in (or near) the core, a closed flux box around
///    the dipole for total emitted power and two distant vertical monitors
///    for laterally guided power — their ratio is the waveguide coupling
///    fraction (beta);
///  * facet scene: the in-plane (effective-index) view of the ridge hitting
///    the cleaved end facet, driven by a guided-mode line source, normalised
///    against a continued-waveguide reference run that can be cached by
///    content hash.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "wgbs/device.hpp"
#include "wgbs/error.hpp"
#include "wgbs/fdtd.hpp"
#include "wgbs/modes.hpp"

namespace wgbs {

// ---------------------------------------------------------------------------
// Vertical dipole scene (waveguide coupling fraction)
// ---------------------------------------------------------------------------

struct VerticalSceneOptions {
  double cells_per_material_wavelength = 20.0;  ///< Spatial sampling of the densest medium.
  double monitor_distance_um = 10.5;  ///< Dipole to each guided-power plane.
  double monitor_halfheight_um = 1.5;  ///< Guided-plane half-span about the core center.
  double box_halfsize_um = 0.8;        ///< Half-size of the closed total-power box.
  double clearance_um = 1.0;           ///< Structure/monitor clearance to the absorbers.
  double side_margin_um = 2.0;         ///< Guided planes to the side absorbers.
  double absorber_um = 0.9;
  double bandwidth_fwhm_nm = 50.0;
  double decay_threshold = 1.0e-7;
  double courant_fraction = 0.5;
  double max_time_um = 2000.0;
};

struct VerticalScene {
  FdtdConfig config;
  double core_center_y_um = 0.0;
  double dipole_y_um = 0.0;  ///< After snapping to the field grid.
};

/// Paints the vertical layer structure across the full domain width, places
/// a dipole at `dipole_offset_um` from the core center (positive = towards
/// the surface), and installs the guided-power and box monitors.
inline VerticalScene build_vertical_dipole_scene(const StackParams& params,
                                                 double dipole_offset_um,
                                                 const std::vector<double>& wavelengths_nm,
                                                 const VerticalSceneOptions& opt = {}) {
  if (wavelengths_nm.empty()) throw config_error("at least one wavelength required");
  double wl_min = wavelengths_nm.front(), wl_max = wavelengths_nm.front();
  for (const double wl : wavelengths_nm) {
    if (!(wl > 0.0)) throw config_error("wavelengths must be positive");
    wl_min = std::min(wl_min, wl);
    wl_max = std::max(wl_max, wl);
  }
  const LayerStack stack = build_vertical_stack(params);

  double n_max = std::max(params.ambient.real_index(wl_min), params.substrate.real_index(wl_min));
  for (const auto& layer : stack.layers())
    n_max = std::max(n_max, layer.material.real_index(wl_min));

  VerticalScene scene;
  FdtdConfig& cfg = scene.config;
  cfg.resolution_cells_per_um =
      opt.cells_per_material_wavelength / ((wl_min / 1000.0) / n_max);
  cfg.courant_fraction = opt.courant_fraction;
  cfg.absorber_x_um = cfg.absorber_y_um = opt.absorber_um;
  cfg.background_index = params.ambient.real_index(wl_min);
  cfg.width_um = 2.0 * (opt.monitor_distance_um + opt.side_margin_um + opt.absorber_um);
  const double stack_um = stack.total_thickness_nm() / 1000.0;
  cfg.height_um = 2.0 * (opt.absorber_um + opt.clearance_um) + stack_um;

  const double cx = cfg.width_um / 2.0;
  const double substrate_top = opt.absorber_um + opt.clearance_um;

  // Substrate half-space, then the stack painted bottom-up.
  cfg.rects.push_back(
      {0.0, 0.0, cfg.width_um, substrate_top, params.substrate.real_index(wl_min)});
  const auto& layers = stack.layers();  // listed top (surface side) to bottom
  double y = substrate_top;
  double core_bottom = substrate_top;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[layers.size() - 1 - i];
    const double t = layer.thickness_nm / 1000.0;
    cfg.rects.push_back({0.0, y, cfg.width_um, y + t, layer.material.real_index(wl_min)});
    if (layers.size() - 1 - i == static_cast<std::size_t>(2 * params.top_pairs))
      core_bottom = y;
    y += t;
  }
  scene.core_center_y_um = core_bottom + params.core_thickness_nm / 2000.0;

  // Dipole, snapped onto an Ez node.
  const double delta = 1.0 / cfg.resolution_cells_per_um;
  const double y_dipole_raw = scene.core_center_y_um + dipole_offset_um;
  scene.dipole_y_um = std::llround(y_dipole_raw / delta) * delta;
  cfg.source.x_um = std::llround(cx / delta) * delta;
  cfg.source.y_um = scene.dipole_y_um;
  cfg.source.center_wl_nm = 0.5 * (wl_min + wl_max);
  cfg.source.bandwidth_fwhm_nm =
      std::max(opt.bandwidth_fwhm_nm, 1.5 * (wl_max - wl_min));

  // Guided-power planes and the closed box around the dipole.
  const double yc = scene.core_center_y_um;
  const double h = opt.monitor_halfheight_um;
  const double xd = cfg.source.x_um, yd = scene.dipole_y_um, r = opt.box_halfsize_um;
  cfg.monitors.push_back({"guided_left", cx - opt.monitor_distance_um, yc - h,
                          cx - opt.monitor_distance_um, yc + h, -1});
  cfg.monitors.push_back({"guided_right", cx + opt.monitor_distance_um, yc - h,
                          cx + opt.monitor_distance_um, yc + h, +1});
  cfg.monitors.push_back({"box_left", xd - r, yd - r, xd - r, yd + r, -1});
  cfg.monitors.push_back({"box_right", xd + r, yd - r, xd + r, yd + r, +1});
  cfg.monitors.push_back({"box_bottom", xd - r, yd - r, xd + r, yd - r, -1});
  cfg.monitors.push_back({"box_top", xd - r, yd + r, xd + r, yd + r, +1});

  cfg.wavelengths_nm = wavelengths_nm;
  cfg.run.decay_threshold = opt.decay_threshold;
  cfg.run.max_time_um = opt.max_time_um;
  cfg.validate();
  return scene;
}

struct BetaResult {
  std::vector<double> wavelengths_nm;
  std::vector<double> beta;          ///< Guided fraction of the emitted power.
  std::vector<double> emitted_power;  ///< Total power through the closed box.
  std::uint64_t scene_fingerprint = 0;
};

/// Runs the vertical dipole scene and forms beta = (guided left + guided
/// right) / (total power through the closed box), per wavelength.
inline BetaResult dipole_beta(const StackParams& params, double dipole_offset_um,
                              const std::vector<double>& wavelengths_nm,
                              const VerticalSceneOptions& opt = {}, int threads = 1) {
  const VerticalScene scene =
      build_vertical_dipole_scene(params, dipole_offset_um, wavelengths_nm, opt);
  const auto flux = run_fdtd(scene.config, threads);

  BetaResult out;
  out.wavelengths_nm = wavelengths_nm;
  out.scene_fingerprint = scene_hash(scene.config);
  out.beta.resize(wavelengths_nm.size());
  out.emitted_power.resize(wavelengths_nm.size());
  for (std::size_t l = 0; l < wavelengths_nm.size(); ++l) {
    double guided = 0.0, total = 0.0;
    for (const auto& f : flux) {
      if (f.id.rfind("guided_", 0) == 0) guided += f.power[l];
      if (f.id.rfind("box_", 0) == 0) total += f.power[l];
    }
    if (!(total > 0.0))
      throw numeric_error("vertical scene: no net power leaves the source box");
    double beta = guided / total;
    if (beta > 1.0 + 1e-6)
      throw numeric_error("vertical scene: guided power exceeds emitted power");
    out.beta[l] = std::clamp(beta, 0.0, 1.0);
    out.emitted_power[l] = total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Facet scene (end-fire outcoupling fraction)
// ---------------------------------------------------------------------------

/// Scene variants sharing one geometry: the real cleaved facet, the same
/// waveguide continued without a facet (reference / self-consistency), and a
/// facet onto an index-matched half-space (near-unit transmission check).
enum class FacetKind { device, continued, index_matched };

inline const char* facet_kind_name(FacetKind k) {
  switch (k) {
    case FacetKind::device: return "device";
    case FacetKind::continued: return "continued";
    case FacetKind::index_matched: return "index_matched";
  }
  return "?";
}

struct FacetSceneOptions {
  int mode_order = 5;  ///< Lateral mode driven into the guide (see build_facet_scene).
  double cells_per_material_wavelength = 12.0;  ///< Reduced default keeps the runs desk-scale.
  double run_in_um = 8.0;          ///< Source to facet.
  double vacuum_beyond_um = 10.0;  ///< Facet to the far monitor.
  double monitor_margin_um = 1.0;  ///< Far monitor to the absorber clearance.
  double clearance_um = 1.0;
  double absorber_um = 1.2;
  double bandwidth_fwhm_nm = 40.0;
  double eim_wavelength_nm = 910.0;     ///< Design wavelength for the index reduction.
  double incident_halfheight_um = 2.8;  ///< Reference-plane half-span.
  double beyond_halfheight_um = 7.0;    ///< Far-plane half-span (catches the refracted cone).
  double decay_threshold = 1.0e-7;
  double courant_fraction = 0.5;
  double max_time_um = 3000.0;
  bool require_cached_reference = false;  ///< Fail instead of (re)running the reference.
};

struct FacetScene {
  FdtdConfig config;
  double facet_x_um = 0.0;
  double strip_center_y_um = 0.0;
  double lateral_mode_index = 0.0;  ///< Effective index of the driven mode.
};

/// In-plane (top-view) facet scene under the effective-index reduction: the
/// vertical structure collapses to its fundamental TE slab index, so the
/// ridge appears as a high-index strip of the ridge width in a cladding-index
/// background, ending at the facet onto vacuum.  The source is a guided-mode
/// line current; by default it drives a high-order lateral mode whose ray
/// angle lies beyond the critical angle of the facet, reproducing the
/// totally-internally-reflected escape geometry of the physical device.
inline FacetScene build_facet_scene(const RidgeGeometry& geom, const StackParams& params,
                                    const std::vector<double>& wavelengths_nm, FacetKind kind,
                                    const FacetSceneOptions& opt = {}) {
  if (wavelengths_nm.empty()) throw config_error("at least one wavelength required");
  double wl_min = wavelengths_nm.front();
  for (const double wl : wavelengths_nm) {
    if (!(wl > 0.0)) throw config_error("wavelengths must be positive");
    wl_min = std::min(wl_min, wl);
  }
  if (!(opt.vacuum_beyond_um >= 10.0))
    throw config_error("facet scene: far monitor must sit at least 10 um past the facet");

  // Effective-index reduction of the vertical structure at the design
  // wavelength, then the lateral mode ladder of the resulting strip.
  const double n_core = params.core.real_index(opt.eim_wavelength_nm);
  const double n_clad = params.cladding.real_index(opt.eim_wavelength_nm);
  const auto vertical = solve_slab_modes(n_core, n_clad, n_clad, params.core_thickness_nm,
                                         opt.eim_wavelength_nm, SlabPol::TE);
  if (vertical.empty()) throw domain_error("facet scene: vertical structure guides no mode");
  const double n_v = vertical.front().effective_index;
  const auto lateral = solve_slab_modes(n_v, n_clad, n_clad, geom.ridge_width_um * 1000.0,
                                        opt.eim_wavelength_nm, SlabPol::TM);
  const ModeSolution* mode = nullptr;
  for (const auto& m : lateral)
    if (m.order == opt.mode_order) mode = &m;
  if (mode == nullptr) {
    std::ostringstream os;
    os << "facet scene: lateral mode of order " << opt.mode_order << " does not exist ("
       << lateral.size() << " guided modes)";
    throw domain_error(os.str());
  }

  FacetScene scene;
  FdtdConfig& cfg = scene.config;
  cfg.resolution_cells_per_um =
      opt.cells_per_material_wavelength / ((wl_min / 1000.0) / std::max(n_v, n_clad));
  cfg.courant_fraction = opt.courant_fraction;
  cfg.absorber_x_um = cfg.absorber_y_um = opt.absorber_um;
  cfg.background_index = 1.0;

  const double x_src = opt.absorber_um + opt.clearance_um;
  scene.facet_x_um = x_src + opt.run_in_um;
  const double x_far = scene.facet_x_um + opt.vacuum_beyond_um;
  cfg.width_um = x_far + opt.monitor_margin_um + opt.clearance_um + opt.absorber_um;
  cfg.height_um = 2.0 * (opt.beyond_halfheight_um + opt.clearance_um + opt.absorber_um);
  const double cy = cfg.height_um / 2.0;
  scene.strip_center_y_um = cy;
  scene.lateral_mode_index = mode->effective_index;

  const double guide_end = kind == FacetKind::continued ? cfg.width_um : scene.facet_x_um;
  cfg.rects.push_back({0.0, 0.0, guide_end, cfg.height_um, n_clad});
  if (kind == FacetKind::index_matched)
    cfg.rects.push_back({scene.facet_x_um, 0.0, cfg.width_um, cfg.height_um, n_v});
  cfg.rects.push_back({0.0, cy - geom.ridge_width_um / 2.0, guide_end,
                       cy + geom.ridge_width_um / 2.0, n_v});

  // Guided-mode line source: the solver's uniform profile grid maps directly
  // onto the source segment.
  cfg.source.x_um = x_src;
  cfg.source.y_um = cy + mode->position_um.front();
  cfg.source.y1_um = cy + mode->position_um.back();
  cfg.source.profile = mode->amplitude;
  cfg.source.center_wl_nm = opt.eim_wavelength_nm;
  cfg.source.bandwidth_fwhm_nm = opt.bandwidth_fwhm_nm;
  if (cfg.source.y_um < opt.absorber_um + 0.2 || cfg.source.y1_um > cfg.height_um - opt.absorber_um - 0.2)
    throw config_error("facet scene: mode profile reaches the absorber; enlarge the domain");

  cfg.monitors.push_back({"incident", scene.facet_x_um, cy - opt.incident_halfheight_um,
                          scene.facet_x_um, cy + opt.incident_halfheight_um, +1});
  cfg.monitors.push_back({"beyond", x_far, cy - opt.beyond_halfheight_um, x_far,
                          cy + opt.beyond_halfheight_um, +1});

  cfg.wavelengths_nm = wavelengths_nm;
  cfg.run.decay_threshold = opt.decay_threshold;
  cfg.run.max_time_um = opt.max_time_um;
  cfg.validate();
  return scene;
}

struct FacetResult {
  std::vector<double> wavelengths_nm;
  std::vector<double> fraction;  ///< Power past the facet over incident guided power.
  std::uint64_t scene_fingerprint = 0;
  std::uint64_t reference_fingerprint = 0;
  bool used_cached_reference = false;
};

namespace detail {

inline std::string facet_reference_path(const std::string& cache_dir, std::uint64_t key) {
  std::ostringstream os;
  os << cache_dir << "/facet_reference_" << std::hex << key << ".csv";
  return os.str();
}

}  // namespace detail

/// Outcoupled power fraction past the facet, normalised by the incident
/// guided power measured in a continued-waveguide reference run of the same
/// geometry.  The reference spectrum is content-addressed by the scene hash;
/// if `cache_dir` is non-empty it is loaded from / stored to that directory.
/// With `opt.require_cached_reference` a usable cached spectrum is mandatory
/// and a miss raises a protocol error instead of running the reference.
inline FacetResult facet_outcoupling(const RidgeGeometry& geom, const StackParams& params,
                                     const std::vector<double>& wavelengths_nm,
                                     const FacetSceneOptions& opt = {},
                                     const std::string& cache_dir = "", int threads = 1,
                                     FacetKind kind = FacetKind::device) {
  const FacetScene main_scene = build_facet_scene(geom, params, wavelengths_nm, kind, opt);
  const FacetScene ref_scene =
      build_facet_scene(geom, params, wavelengths_nm, FacetKind::continued, opt);
  const std::uint64_t ref_key = scene_hash(ref_scene.config);

  FacetResult out;
  out.wavelengths_nm = wavelengths_nm;
  out.scene_fingerprint = scene_hash(main_scene.config);
  out.reference_fingerprint = ref_key;

  // Obtain the reference (incident-plane) spectrum: cache, else a run.
  std::vector<double> incident;
  bool have_reference = false;
  const std::string ref_path =
      cache_dir.empty() ? std::string{} : detail::facet_reference_path(cache_dir, ref_key);
  if (!ref_path.empty() && std::filesystem::exists(ref_path)) {
    const FluxResult cached = flux_from_csv(ref_path);
    bool usable = cached.wavelengths_nm.size() == wavelengths_nm.size();
    for (std::size_t l = 0; usable && l < wavelengths_nm.size(); ++l)
      usable = std::abs(cached.wavelengths_nm[l] - wavelengths_nm[l]) < 1e-9;
    if (usable) {
      incident = cached.power;
      have_reference = true;
      out.used_cached_reference = true;
    } else if (opt.require_cached_reference) {
      throw domain_error("facet protocol error: cached reference spectrum at " + ref_path +
                         " does not cover the requested wavelengths");
    }
  }
  if (!have_reference && opt.require_cached_reference)
    throw domain_error(
        "facet protocol error: reference spectrum not found in cache (expected " +
        (ref_path.empty() ? std::string("a cache directory") : ref_path) + ")");

  std::vector<double> beyond;
  if (!have_reference && out.scene_fingerprint == ref_key) {
    // The main scene *is* the reference scene: one run serves both roles.
    const auto flux = run_fdtd(main_scene.config, threads);
    incident = flux[0].power;
    beyond = flux[1].power;
    have_reference = true;
    if (!ref_path.empty()) flux_to_csv(flux[0], ref_path);
  }
  if (!have_reference) {
    const auto flux = run_fdtd(ref_scene.config, threads);
    incident = flux[0].power;
    if (!ref_path.empty()) flux_to_csv(flux[0], ref_path);
  }
  if (beyond.empty()) {
    const auto flux = run_fdtd(main_scene.config, threads);
    beyond = flux[1].power;
  }

  out.fraction.resize(wavelengths_nm.size());
  for (std::size_t l = 0; l < wavelengths_nm.size(); ++l) {
    if (!(incident[l] > 0.0))
      throw numeric_error("facet protocol: reference run carries no incident power");
    out.fraction[l] = beyond[l] / incident[l];
  }
  return out;
}

}  // namespace wgbs
