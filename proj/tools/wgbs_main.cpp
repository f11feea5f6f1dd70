// Command-line entry point: wires configs, data files, and every analysis
// module into reproducible runs.  Each subcommand consumes one INI config,
// writes plain CSV/text artifacts plus a manifest into its output directory,
// and prints a short human-readable summary.
//
// Exit codes: 0 success and all target bands met; 1 a checked band failed
// (or a warning under --strict); 2 configuration error; 3 runtime or
// numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wgbs/budget.hpp"
#include "wgbs/config.hpp"
#include "wgbs/csv.hpp"
#include "wgbs/device.hpp"
#include "wgbs/error.hpp"
#include "wgbs/fdtd.hpp"
#include "wgbs/fdtd_scenes.hpp"
#include "wgbs/manifest.hpp"
#include "wgbs/modes.hpp"
#include "wgbs/photon.hpp"
#include "wgbs/pipeline.hpp"
#include "wgbs/scanfit.hpp"
#include "wgbs/tmm.hpp"
#include "wgbs/version.hpp"

namespace fs = std::filesystem;
using namespace wgbs;

namespace {

struct RunContext {
  std::string config_path;
  std::string out_dir;
  std::string base_dir;  // directory of the config file
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  bool strict = false;

  std::vector<std::string> warnings;

  void warn(const std::string& msg) { warnings.push_back(msg); }
};

std::string resolve(const RunContext& ctx, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (ctx.base_dir.empty()) return path;
  return (fs::path(ctx.base_dir) / path).string();
}

/// Finishes a run: flushes warnings, honours --strict, renders band results.
int finish(const RunContext& ctx, int band_failures) {
  for (const auto& w : ctx.warnings) std::fprintf(stderr, "WARN: %s\n", w.c_str());
  if (ctx.strict && !ctx.warnings.empty()) {
    std::fprintf(stderr, "strict mode: %zu warning(s) escalated to failure\n",
                 ctx.warnings.size());
    return 1;
  }
  return band_failures > 0 ? 1 : 0;
}

RunManifest make_manifest(const RunContext& ctx, const Config& cfg, const char* command) {
  RunManifest m;
  m.command = command;
  m.config_origin = ctx.config_path;
  m.config_hash = to_hex(cfg.content_hash());
  m.output_directory = ctx.out_dir;
  m.seed = ctx.seed;
  m.threads = ctx.threads;
  return m;
}

void emit_manifest(const RunContext& ctx, const RunManifest& m) {
  write_manifest((fs::path(ctx.out_dir) / "manifest.json").string(), m);
}

void write_table(const RunContext& ctx, RunManifest& m, const std::string& name,
                 const CsvTable& t) {
  atomic_write((fs::path(ctx.out_dir) / name).string(), csv_to_string(t));
  m.add_output(name, name);
}

using Band = std::optional<std::pair<double, double>>;

/// Reads an optional `low, high` band; must happen before the config's
/// unknown-key check so a present band counts as consumed.
Band read_band(const Config& cfg, const std::string& section, const std::string& key) {
  return wgbs::detail::band_from(cfg, section, key);
}

/// Prints a pass/FAIL line for a banded quantity. Returns 1 on a miss.
int report_band(const char* label, double value, const Band& band) {
  if (!band) return 0;
  const bool ok = value >= band->first && value <= band->second;
  std::printf("%-34s %.10g  in [%.10g, %.10g]  %s\n", label, value, band->first, band->second,
              ok ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

// --- dbr: mirror reflectance spectra ----------------------------------------

int cmd_dbr(const Config& cfg, RunContext& ctx) {
  const Device device = device_from_config(cfg);
  const double wl_lo = cfg.get_double("dbr", "wavelength_lo_nm", 850.0);
  const double wl_hi = cfg.get_double("dbr", "wavelength_hi_nm", 1010.0);
  const int samples = static_cast<int>(cfg.get_int("dbr", "samples", 801));
  const double angle = cfg.get_double("dbr", "angle_deg", 0.0);
  const std::string pol_s = cfg.get_string("dbr", "polarization", "s");
  const Pol pol = pol_s == "s" ? Pol::s : pol_s == "p" ? Pol::p
                                        : throw config_error("[dbr] polarization must be s or p");
  const Band center_band = read_band(cfg, "dbr", "center_band_nm");
  cfg.require_all_consumed();

  const auto stack = device.build_stack();
  const auto spectrum = reflectance_spectrum(stack, wl_lo, wl_hi, samples, angle, pol);
  const double center = stopband_center(stack, wl_lo, wl_hi, 2001, angle, pol);

  RunManifest m = make_manifest(ctx, cfg, "dbr");
  CsvTable t;
  t.comments = {"mirror reflectance spectrum, " + pol_s + " polarization, " +
                detail::fmt_value(angle) + " deg incidence"};
  t.header = {"wavelength_nm", "R", "T"};
  for (const auto& r : spectrum) t.rows.push_back({r.wavelength_nm, r.R, r.T});
  write_table(ctx, m, "reflectance.csv", t);
  m.add_scalar("stopband_center_nm", center);
  emit_manifest(ctx, m);

  std::printf("stopband center: %.6g nm\n", center);
  return finish(ctx, report_band("stopband_center_nm", center, center_band));
}

// --- modes: vertical and lateral mode ladders --------------------------------

int cmd_modes(const Config& cfg, RunContext& ctx) {
  const Device device = device_from_config(cfg);
  const double wl = cfg.get_double("modes", "wavelength_nm", 910.0);
  const Band index_band = read_band(cfg, "modes", "fundamental_index_band");
  cfg.require_all_consumed();

  const double n_core = device.stack_params.core.real_index(wl);
  const double n_clad = device.stack_params.cladding.real_index(wl);
  const auto vertical = solve_slab_modes(n_core, n_clad, n_clad,
                                         device.ridge.core_thickness_nm, wl, SlabPol::TE);
  if (vertical.empty()) throw domain_error("vertical waveguide is below cutoff");
  const double n_v = vertical.front().effective_index;
  const double n_side = n_v - device.coupler_options.lateral_index_step;
  const auto lateral = solve_slab_modes(n_v, n_side, n_side,
                                        device.ridge.ridge_width_um * 1000.0, wl, SlabPol::TM);

  RunManifest m = make_manifest(ctx, cfg, "modes");
  CsvTable t;
  t.comments = {"mode ladders at " + detail::fmt_value(wl) + " nm",
                "axis 0: vertical TE slab; axis 1: lateral TM ladder (effective-index method)"};
  t.header = {"axis", "order", "effective_index"};
  for (const auto& md : vertical)
    t.rows.push_back({0.0, static_cast<double>(md.order), md.effective_index});
  for (const auto& md : lateral)
    t.rows.push_back({1.0, static_cast<double>(md.order), md.effective_index});
  write_table(ctx, m, "modes.csv", t);
  m.add_scalar("vertical_fundamental_effective_index", n_v);
  emit_manifest(ctx, m);

  std::printf("vertical TE modes: %zu (fundamental n_eff %.10g)\n", vertical.size(), n_v);
  std::printf("lateral TM modes:  %zu\n", lateral.size());
  return finish(ctx, report_band("vertical_fundamental_n_eff", n_v, index_band));
}

// --- coupler: splitting-ratio sweeps ------------------------------------------

int cmd_coupler(const Config& cfg, RunContext& ctx) {
  const Device device = device_from_config(cfg);
  const double wl = cfg.get_double("coupler", "wavelength_nm", 910.0);
  const std::string sweep = cfg.get_string("coupler", "sweep", "length");
  const Band l5050_band = read_band(cfg, "coupler", "fifty_fifty_band_um");

  RunManifest m = make_manifest(ctx, cfg, "coupler");
  const auto model = coupler_model(device.ridge, device.stack_params, device.coupler, wl,
                                   device.coupler_options);
  const double l5050 = fifty_fifty_length_um(model);
  const auto built = splitting_ratio(device.coupler.coupler_length_um, model);

  CsvTable t;
  if (sweep == "length") {
    const int n = static_cast<int>(cfg.get_int("coupler", "sweep_samples", 121));
    const double l_hi = cfg.get_double("coupler", "sweep_length_hi_um",
                                       model.full_transfer_length_um);
    cfg.require_all_consumed();
    t.comments = {"splitting ratio vs coupling length at " + detail::fmt_value(wl) + " nm"};
    t.header = {"length_um", "cross", "through"};
    for (int i = 0; i < n; ++i) {
      const double L = l_hi * i / (n - 1);
      const auto s = splitting_ratio(L, model);
      t.rows.push_back({L, s.cross, s.through});
    }
  } else if (sweep == "wavelength") {
    const double lo = cfg.get_double("coupler", "sweep_wavelength_lo_nm", 890.0);
    const double hi = cfg.get_double("coupler", "sweep_wavelength_hi_nm", 930.0);
    const int n = static_cast<int>(cfg.get_int("coupler", "sweep_samples", 41));
    cfg.require_all_consumed();
    t.comments = {"splitting ratio of the as-built coupling length vs wavelength"};
    t.header = {"wavelength_nm", "cross", "through"};
    for (int i = 0; i < n; ++i) {
      const double w = lo + (hi - lo) * i / (n - 1);
      const auto mw = coupler_model(device.ridge, device.stack_params, device.coupler, w,
                                    device.coupler_options);
      const auto s = splitting_ratio(device.coupler.coupler_length_um, mw);
      t.rows.push_back({w, s.cross, s.through});
    }
  } else {
    throw config_error("[coupler] sweep must be 'length' or 'wavelength'");
  }
  write_table(ctx, m, "coupler.csv", t);
  m.add_scalar("fifty_fifty_length_um", l5050);
  m.add_scalar("as_built_cross_fraction", built.cross);
  emit_manifest(ctx, m);

  std::printf("supermode indices: even %.10g, odd %.10g\n", model.n_even, model.n_odd);
  std::printf("full transfer length: %.6g um; 50/50 length: %.6g um\n",
              model.full_transfer_length_um, l5050);
  std::printf("as-built splitting at %.6g um: cross %.4f / through %.4f\n",
              device.coupler.coupler_length_um, built.cross, built.through);
  return finish(ctx, report_band("fifty_fifty_length_um", l5050, l5050_band));
}

// --- fdtd: dipole coupling and facet scenes -----------------------------------

int cmd_fdtd(const Config& cfg, RunContext& ctx) {
  const Device device = device_from_config(cfg);
  const std::string scene = cfg.get_string("fdtd", "scene");
  std::vector<double> wavelengths = cfg.has("fdtd", "wavelengths_nm")
                                        ? cfg.get_double_list("fdtd", "wavelengths_nm")
                                        : std::vector<double>{910.0};
  const bool save_eps = cfg.get_bool("fdtd", "save_epsilon", false);

  RunManifest m = make_manifest(ctx, cfg, "fdtd");
  int fails = 0;

  if (scene == "coupling") {
    VerticalSceneOptions vopt;
    vopt.cells_per_material_wavelength = cfg.get_double(
        "fdtd", "cells_per_material_wavelength", vopt.cells_per_material_wavelength);
    vopt.monitor_distance_um =
        cfg.get_double("fdtd", "monitor_distance_um", vopt.monitor_distance_um);
    vopt.monitor_halfheight_um =
        cfg.get_double("fdtd", "monitor_halfheight_um", vopt.monitor_halfheight_um);
    vopt.box_halfsize_um = cfg.get_double("fdtd", "box_halfsize_um", vopt.box_halfsize_um);
    vopt.side_margin_um = cfg.get_double("fdtd", "side_margin_um", vopt.side_margin_um);
    vopt.clearance_um = cfg.get_double("fdtd", "clearance_um", vopt.clearance_um);
    vopt.decay_threshold = cfg.get_double("fdtd", "decay_threshold", vopt.decay_threshold);
    vopt.max_time_um = cfg.get_double("fdtd", "max_time_um", vopt.max_time_um);
    const double offset = cfg.get_double("fdtd", "dipole_offset_um", 0.0);
    const Band coupling_band = read_band(cfg, "fdtd", "coupling_band");
    cfg.require_all_consumed();

    if (save_eps) {
      const auto sc = build_vertical_dipole_scene(device.stack_params, offset, wavelengths, vopt);
      const std::string name = "epsilon.grid";
      save_epsilon_map(sc.config, (fs::path(ctx.out_dir) / name).string());
      m.add_output(name, name);
    }
    const auto r = dipole_beta(device.stack_params, offset, wavelengths, vopt, ctx.threads);

    CsvTable t;
    t.comments = {"dipole coupling fraction into the two guided arms",
                  "scene " + to_hex(r.scene_fingerprint)};
    t.header = {"wavelength_nm", "beta", "emitted_power"};
    for (std::size_t i = 0; i < r.wavelengths_nm.size(); ++i)
      t.rows.push_back({r.wavelengths_nm[i], r.beta[i], r.emitted_power[i]});
    write_table(ctx, m, "beta.csv", t);
    m.add_scalar("beta_first_wavelength", r.beta.front());

    for (std::size_t i = 0; i < r.wavelengths_nm.size(); ++i)
      std::printf("beta(%g nm) = %.6g\n", r.wavelengths_nm[i], r.beta[i]);
    fails += report_band("coupling_fraction", r.beta.front(), coupling_band);
  } else if (scene == "facet") {
    FacetSceneOptions fopt;
    fopt.mode_order = static_cast<int>(cfg.get_int("fdtd", "mode_order", fopt.mode_order));
    fopt.cells_per_material_wavelength = cfg.get_double(
        "fdtd", "cells_per_material_wavelength", fopt.cells_per_material_wavelength);
    fopt.run_in_um = cfg.get_double("fdtd", "run_in_um", fopt.run_in_um);
    fopt.vacuum_beyond_um = cfg.get_double("fdtd", "vacuum_beyond_um", fopt.vacuum_beyond_um);
    fopt.incident_halfheight_um =
        cfg.get_double("fdtd", "incident_halfheight_um", fopt.incident_halfheight_um);
    fopt.beyond_halfheight_um =
        cfg.get_double("fdtd", "beyond_halfheight_um", fopt.beyond_halfheight_um);
    fopt.eim_wavelength_nm = cfg.get_double("fdtd", "eim_wavelength_nm", fopt.eim_wavelength_nm);
    fopt.decay_threshold = cfg.get_double("fdtd", "decay_threshold", fopt.decay_threshold);
    fopt.max_time_um = cfg.get_double("fdtd", "max_time_um", fopt.max_time_um);
    fopt.require_cached_reference = ctx.strict;
    const std::string kind_s = cfg.get_string("fdtd", "kind", "device");
    const FacetKind kind = kind_s == "device"          ? FacetKind::device
                           : kind_s == "continued"     ? FacetKind::continued
                           : kind_s == "index_matched" ? FacetKind::index_matched
                                                       : throw config_error(
                                                             "[fdtd] kind must be device, "
                                                             "continued, or index_matched");
    std::string cache_dir = ctx.out_dir;
    if (cfg.has("fdtd", "reference_cache_dir"))
      cache_dir = resolve(ctx, cfg.get_string("fdtd", "reference_cache_dir"));
    const Band fraction_band = read_band(cfg, "fdtd", "fraction_band");
    cfg.require_all_consumed();

    if (save_eps) {
      const auto sc = build_facet_scene(device.ridge, device.stack_params, wavelengths,
                                        kind, fopt);
      const std::string name = "epsilon.grid";
      save_epsilon_map(sc.config, (fs::path(ctx.out_dir) / name).string());
      m.add_output(name, name);
    }
    const auto r = facet_outcoupling(device.ridge, device.stack_params, wavelengths, fopt,
                                     cache_dir, ctx.threads, kind);
    if (!r.used_cached_reference && kind != FacetKind::continued)
      ctx.warn("facet reference spectrum was recomputed, not loaded from the cache");

    CsvTable t;
    t.comments = {"power past the facet plane over incident guided power (" + kind_s + ")",
                  "scene " + to_hex(r.scene_fingerprint) + ", reference " +
                      to_hex(r.reference_fingerprint)};
    t.header = {"wavelength_nm", "fraction"};
    for (std::size_t i = 0; i < r.wavelengths_nm.size(); ++i)
      t.rows.push_back({r.wavelengths_nm[i], r.fraction[i]});
    write_table(ctx, m, "facet.csv", t);
    m.add_scalar("fraction_first_wavelength", r.fraction.front());

    for (std::size_t i = 0; i < r.wavelengths_nm.size(); ++i)
      std::printf("fraction(%g nm) = %.6g\n", r.wavelengths_nm[i], r.fraction[i]);
    fails += report_band("outcoupled_fraction", r.fraction.front(), fraction_band);
  } else {
    throw config_error("[fdtd] scene must be 'coupling' or 'facet'");
  }

  emit_manifest(ctx, m);
  return finish(ctx, fails);
}

// --- fit-loss: propagation loss from distance scans ---------------------------

int cmd_fit_loss(const Config& cfg, RunContext& ctx) {
  const std::string data = resolve(ctx, cfg.get_string("loss", "data"));
  const std::string arm = cfg.get_string("loss", "arm", "a");
  const double distance = cfg.get_double("loss", "chip_distance_um", 915.0);
  const Band alpha_band = read_band(cfg, "loss", "alpha_band");
  const Band trans_band = read_band(cfg, "loss", "transmission_band");
  cfg.require_all_consumed();

  const auto scan = scan_from_csv(data);
  const auto fit = fit_loss(scan, arm);
  const double trans = transmission(fit.alpha_db_per_um, distance);
  if (fit.n_points < 10)
    ctx.warn("loss fit uses only " + std::to_string(fit.n_points) + " points");

  RunManifest m = make_manifest(ctx, cfg, "fit-loss");
  m.add_input(data);
  CsvTable t;
  t.comments = {"least-squares fit of log10 intensity vs distance, arm " + arm};
  t.header = {"alpha_db_per_um", "alpha_stderr_db_per_um", "intercept_log10",
              "residual_variance", "n_points"};
  t.rows.push_back({fit.alpha_db_per_um, fit.alpha_stderr_db_per_um, fit.intercept_log10,
                    fit.residual_variance, static_cast<double>(fit.n_points)});
  write_table(ctx, m, "loss.csv", t);
  m.add_scalar("alpha_db_per_um", fit.alpha_db_per_um);
  m.add_scalar("chip_transmission", trans);
  emit_manifest(ctx, m);

  std::printf("alpha = %.6g +- %.2g dB/um over %zu points (arm %s)\n", fit.alpha_db_per_um,
              fit.alpha_stderr_db_per_um, fit.n_points, arm.c_str());
  std::printf("transmission over %.6g um: %.4f\n", distance, trans);
  int fails = report_band("alpha_db_per_um", fit.alpha_db_per_um, alpha_band);
  fails += report_band("chip_transmission", trans, trans_band);
  return finish(ctx, fails);
}

// --- fit-dop: polarization scans ----------------------------------------------

int cmd_fit_dop(const Config& cfg, RunContext& ctx) {
  const std::string data = resolve(ctx, cfg.get_string("dop", "data"));
  const Band dop_band = read_band(cfg, "dop", "dop_band");
  cfg.require_all_consumed();

  const auto scan = polarization_from_csv(data);
  const auto fit = fit_dop(scan);

  RunManifest m = make_manifest(ctx, cfg, "fit-dop");
  m.add_input(data);
  CsvTable t;
  t.comments = {"Malus-law fit of analyzer scan"};
  t.header = {"dop", "orientation_deg", "amplitude", "background"};
  t.rows.push_back({fit.dop, fit.orientation_deg, fit.amplitude, fit.background});
  write_table(ctx, m, "dop.csv", t);
  m.add_scalar("degree_of_polarization", fit.dop);
  emit_manifest(ctx, m);

  std::printf("degree of polarization: %.4f (axis %.2f deg)\n", fit.dop, fit.orientation_deg);
  return finish(ctx, report_band("degree_of_polarization", fit.dop, dop_band));
}

// --- budget: multiplicative efficiency chain -----------------------------------

int cmd_budget(const Config& cfg, RunContext& ctx) {
  const auto terms = chain_terms_from_config(cfg);
  const auto chain = propagate_chain(terms);
  // Optional [targets] section: band checks on the full product and on a
  // named sub-chain.
  int fails = 0;
  double onchip = 0.0;
  bool have_onchip = false;
  if (cfg.has("targets", "onchip_terms")) {
    std::vector<EfficiencyTerm> sel;
    std::istringstream in(cfg.get_string("targets", "onchip_terms"));
    std::string tok;
    while (std::getline(in, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      const std::string name = tok.substr(b, e - b + 1);
      bool found = false;
      for (const auto& t : terms)
        if (t.name == name) {
          sel.push_back(t);
          found = true;
          break;
        }
      if (!found) throw config_error("[targets] onchip_terms: no term named '" + name + "'");
    }
    onchip = propagate_chain(sel).product;
    have_onchip = true;
  }
  const Band overall_band = read_band(cfg, "targets", "overall_band");
  const Band onchip_band = read_band(cfg, "targets", "onchip_band");
  cfg.require_all_consumed();

  RunManifest m = make_manifest(ctx, cfg, "budget");
  atomic_write((fs::path(ctx.out_dir) / "budget.txt").string(), chain_report(chain));
  m.add_output("budget.txt", "budget.txt");
  m.add_scalar("overall_efficiency", chain.product);
  if (have_onchip) m.add_scalar("onchip_efficiency", onchip);
  emit_manifest(ctx, m);

  std::fputs(chain_report(chain).c_str(), stdout);
  fails += report_band("overall_efficiency", chain.product, overall_band);
  if (have_onchip) fails += report_band("onchip_efficiency", onchip, onchip_band);
  return finish(ctx, fails);
}

// --- hbt: coincidence scenario ---------------------------------------------------

int cmd_hbt(const Config& cfg, RunContext& ctx) {
  auto scenario = hbt_scenario_from_config(cfg);
  if (ctx.seed_set) scenario.seed = ctx.seed;
  const bool write_clicks = cfg.get_bool("output", "write_clicks", false);
  const Band raw_band = read_band(cfg, "targets", "raw_band");
  const Band corrected_band = read_band(cfg, "targets", "corrected_band");
  const Band eff_a_band = read_band(cfg, "targets", "efficiency_a_band");
  const Band eff_b_band = read_band(cfg, "targets", "efficiency_b_band");
  cfg.require_all_consumed();
  int fails = 0;

  const auto r = run_hbt(scenario, ctx.threads);
  const double rep = scenario.source.rep_rate_hz;
  const double eff_a =
      measured_overall_efficiency(r.rate_a_cps, scenario.detector_a.dark_rate_cps, rep);
  const double eff_b =
      measured_overall_efficiency(r.rate_b_cps, scenario.detector_b.dark_rate_cps, rep);

  RunManifest m = make_manifest(ctx, cfg, "hbt");
  m.seed = scenario.seed;
  histogram_to_csv(r.histogram, (fs::path(ctx.out_dir) / "histogram.csv").string());
  m.add_output("histogram.csv", "histogram.csv");
  if (write_clicks) {
    clicks_to_csv(r.arm_a, (fs::path(ctx.out_dir) / "clicks_a.csv").string());
    clicks_to_csv(r.arm_b, (fs::path(ctx.out_dir) / "clicks_b.csv").string());
    m.add_output("clicks_a.csv", "clicks_a.csv");
    m.add_output("clicks_b.csv", "clicks_b.csv");
  }
  m.add_scalar("rate_a_cps", r.rate_a_cps);
  m.add_scalar("rate_b_cps", r.rate_b_cps);
  m.add_scalar("g2_raw", r.raw.value);
  m.add_scalar("g2_corrected", r.corrected.value);
  m.add_scalar("efficiency_per_pulse_a", eff_a);
  m.add_scalar("efficiency_per_pulse_b", eff_b);
  emit_manifest(ctx, m);

  std::printf("rates: a %.4g cps, b %.4g cps (signal fractions %.4f / %.4f)\n", r.rate_a_cps,
              r.rate_b_cps, r.rho_a, r.rho_b);
  std::printf("g2 raw:       %.4f +- %.4f\n", r.raw.value, r.raw.sigma);
  std::printf("g2 corrected: %.4f +- %.4f%s\n", r.corrected.value, r.corrected.sigma,
              r.corrected.floor_clipped ? " (clipped at the accidental floor)" : "");
  std::printf("efficiency per pulse: a %.4g, b %.4g\n", eff_a, eff_b);
  fails += report_band("g2_raw", r.raw.value, raw_band);
  fails += report_band("g2_corrected", r.corrected.value, corrected_band);
  fails += report_band("efficiency_per_pulse_a", eff_a, eff_a_band);
  fails += report_band("efficiency_per_pulse_b", eff_b, eff_b_band);
  return finish(ctx, fails);
}

// --- pipeline --------------------------------------------------------------------

int cmd_pipeline(const Config& cfg, RunContext& ctx) {
  PipelineOptions popt;
  popt.out_dir = ctx.out_dir;
  popt.base_dir = ctx.base_dir;
  popt.seed = ctx.seed;
  popt.seed_overridden = ctx.seed_set;
  popt.threads = ctx.threads;
  popt.strict = ctx.strict;

  const auto result = run_pipeline(cfg, popt);
  std::fputs(result.report_text.c_str(), stdout);
  for (const auto& w : result.warnings) ctx.warn(w);
  return finish(ctx, result.all_pass ? 0 : 1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waveguide beamsplitter design and analysis toolkit"};
  app.set_version_flag("--version", std::string("wgbs ") + kVersion);
  app.require_subcommand(1);

  const char* env_root = std::getenv("WGBS_OUT_ROOT");
  const std::string out_root = env_root ? env_root : "wgbs-out";

  struct SubSpec {
    const char* name;
    const char* help;
    int (*run)(const Config&, RunContext&);
  };
  const std::vector<SubSpec> specs = {
      {"dbr", "mirror reflectance spectra (transfer-matrix method)", cmd_dbr},
      {"modes", "vertical and lateral guided-mode ladders", cmd_modes},
      {"coupler", "directional-coupler splitting ratios", cmd_coupler},
      {"fdtd", "time-domain field scenes: dipole coupling, facet outcoupling", cmd_fdtd},
      {"fit-loss", "propagation loss from intensity-vs-distance scans", cmd_fit_loss},
      {"fit-dop", "degree of polarization from analyzer scans", cmd_fit_dop},
      {"budget", "multiplicative efficiency chain with uncertainty propagation", cmd_budget},
      {"hbt", "coincidence (intensity-correlation) scenario", cmd_hbt},
      {"pipeline", "full device analysis: modes, coupler, coupling fraction, fits, "
                   "budget, coincidences",
       cmd_pipeline},
  };

  struct SubState {
    CLI::App* sub = nullptr;
    RunContext ctx;
    int (*run)(const Config&, RunContext&) = nullptr;
  };
  std::vector<SubState> states(specs.size());

  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& st = states[i];
    st.run = specs[i].run;
    st.sub = app.add_subcommand(specs[i].name, specs[i].help);
    st.ctx.out_dir = (fs::path(out_root) / specs[i].name).string();
    st.sub->add_option("--config", st.ctx.config_path, "INI config file")
        ->required()
        ->check(CLI::ExistingFile);
    st.sub->add_option("--out", st.ctx.out_dir, "output directory")->capture_default_str();
    st.sub->add_option("--seed", st.ctx.seed, "override the run seed");
    st.sub->add_option("--threads", st.ctx.threads, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    st.sub->add_flag("--strict", st.ctx.strict, "treat warnings as failures");
  }

  CLI11_PARSE(app, argc, argv);

  for (auto& st : states) {
    if (!st.sub->parsed()) continue;
    try {
      st.ctx.seed_set = st.sub->count("--seed") > 0;
      st.ctx.base_dir = fs::path(st.ctx.config_path).parent_path().string();
      fs::create_directories(st.ctx.out_dir);
      const Config cfg = Config::parse_file(st.ctx.config_path);
      return st.run(cfg, st.ctx);
    } catch (const config_error& e) {
      std::fprintf(stderr, "configuration error: %s\n", e.what());
      return 2;
    } catch (const domain_error& e) {
      std::fprintf(stderr, "input error: %s\n", e.what());
      return 2;
    } catch (const numeric_error& e) {
      std::fprintf(stderr, "numerical failure: %s\n", e.what());
      return 3;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "runtime failure: %s\n", e.what());
      return 3;
    }
  }
  return 2;
}
