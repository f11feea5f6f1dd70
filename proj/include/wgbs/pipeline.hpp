#pragma once

// End-to-end device analysis pipeline.  Runs the full chain of models on one
// device description — vertical/lateral modes, directional coupler, dipole
// coupling (FDTD), propagation-loss fit, polarization fit, efficiency budget,
// and the coincidence (HBT) scenario — writing per-stage CSV artifacts plus a
// single consolidated report that compares each headline number to its target
// band.
//
// Every numeric file is written with %.17g formatting and no timestamps, so a
// re-run with the same config and seed is byte-identical regardless of thread
// count.  Stages run sequentially; parallelism lives inside the FDTD and HBT
// engines, both of which partition work deterministically.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wgbs/budget.hpp"
#include "wgbs/config.hpp"
#include "wgbs/csv.hpp"
#include "wgbs/device.hpp"
#include "wgbs/error.hpp"
#include "wgbs/fdtd_scenes.hpp"
#include "wgbs/manifest.hpp"
#include "wgbs/modes.hpp"
#include "wgbs/photon.hpp"
#include "wgbs/scanfit.hpp"

namespace wgbs {

enum class BandStatus { pass, fail, info };

inline const char* band_status_name(BandStatus s) {
  switch (s) {
    case BandStatus::pass: return "pass";
    case BandStatus::fail: return "FAIL";
    default: return "info";
  }
}

/// One row of the consolidated report: a named quantity, optionally checked
/// against an inclusive target band.  Rows without a band are informational.
struct ReportEntry {
  std::string stage;
  std::string quantity;
  double value = 0.0;
  double band_low = std::numeric_limits<double>::quiet_NaN();
  double band_high = std::numeric_limits<double>::quiet_NaN();
  BandStatus status = BandStatus::info;

  bool has_band() const { return std::isfinite(band_low) && std::isfinite(band_high); }
};

struct PipelineOptions {
  std::string out_dir = "wgbs-out/pipeline";
  /// Directory against which relative paths inside the config resolve
  /// (normally the config file's own directory).
  std::string base_dir;
  std::uint64_t seed = 0;  ///< Used only when seed_overridden is set.
  bool seed_overridden = false;
  int threads = 1;
  bool strict = false;  ///< Escalate warnings to failures (handled by caller).
};

struct PipelineResult {
  std::vector<ReportEntry> entries;
  std::string report_text;
  std::size_t bands_checked = 0;
  std::size_t bands_passed = 0;
  bool all_pass = true;
  std::vector<std::string> warnings;
  RunManifest manifest;
};

namespace detail {

inline std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (base_dir.empty() || path.empty()) return path;
  if (std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

/// Reads an optional two-element band `key = low, high` from the config.
inline std::optional<std::pair<double, double>> band_from(const Config& cfg,
                                                          const std::string& section,
                                                          const std::string& key) {
  if (!cfg.has(section, key)) return std::nullopt;
  const auto v = cfg.get_double_list(section, key);
  if (v.size() != 2 || !(v[0] <= v[1]))
    throw config_error("[" + section + "] " + key + " must be 'low, high' with low <= high");
  return std::make_pair(v[0], v[1]);
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string fmt_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

/// Renders the consolidated report deterministically (fixed column layout,
/// %.10g values, no timestamps or machine identifiers).
inline std::string format_report(const std::vector<ReportEntry>& entries,
                                 std::size_t bands_checked, std::size_t bands_passed) {
  std::ostringstream out;
  out << "device analysis report\n";
  out << "======================\n\n";
  out << detail::pad("stage", 9) << detail::pad("quantity", 42) << detail::pad("value", 16)
      << detail::pad("target band", 28) << "status\n";
  out << detail::pad("-----", 9) << detail::pad("--------", 42) << detail::pad("-----", 16)
      << detail::pad("-----------", 28) << "------\n";
  for (const auto& e : entries) {
    std::string band = "-";
    if (e.has_band())
      band = "[" + detail::fmt_value(e.band_low) + ", " + detail::fmt_value(e.band_high) + "]";
    out << detail::pad(e.stage, 9) << detail::pad(e.quantity, 42)
        << detail::pad(detail::fmt_value(e.value), 16) << detail::pad(band, 28)
        << band_status_name(e.status) << "\n";
  }
  out << "\nbands: " << bands_checked << " checked, " << bands_passed << " passed, "
      << (bands_checked - bands_passed) << " failed\n";
  out << "RESULT: " << (bands_passed == bands_checked ? "PASS" : "FAIL") << "\n";
  return out.str();
}

/// Runs every stage on the given pipeline config.  Throws on stage failure
/// after writing a manifest that marks the failed stage; partial outputs are
/// left in place.  Band misses are not errors — they surface as FAIL rows in
/// the report and a false `all_pass`.
inline PipelineResult run_pipeline(const Config& cfg, const PipelineOptions& opt) {
  namespace fs = std::filesystem;
  PipelineResult res;
  const fs::path out_dir(opt.out_dir);
  fs::create_directories(out_dir);

  const std::uint64_t config_seed = static_cast<std::uint64_t>(cfg.get_int("pipeline", "seed", 1));
  const std::uint64_t seed = opt.seed_overridden ? opt.seed : config_seed;

  RunManifest& manifest = res.manifest;
  manifest.command = "pipeline";
  manifest.config_origin = cfg.origin();
  manifest.config_hash = to_hex(cfg.content_hash());
  manifest.output_directory = opt.out_dir;
  manifest.seed = seed;
  manifest.threads = opt.threads;

  auto add_entry = [&](const std::string& stage, const std::string& quantity, double value,
                       const std::optional<std::pair<double, double>>& band) {
    ReportEntry e;
    e.stage = stage;
    e.quantity = quantity;
    e.value = value;
    if (band) {
      e.band_low = band->first;
      e.band_high = band->second;
      const bool ok = std::isfinite(value) && value >= e.band_low && value <= e.band_high;
      e.status = ok ? BandStatus::pass : BandStatus::fail;
      ++res.bands_checked;
      if (ok) ++res.bands_passed;
    }
    res.entries.push_back(e);
    manifest.add_scalar(stage + "." + quantity, value);
  };

  auto write_table = [&](const std::string& name, const CsvTable& t) {
    const std::string rel = name;
    atomic_write((out_dir / rel).string(), csv_to_string(t));
    manifest.add_output(rel, rel);
  };

  const Device device = device_from_config(cfg);
  std::string current_stage = "setup";

  // Values handed between stages.
  double beta_sim = 0.0;
  double chain_transmission = 1.0;
  double chain_distance_um = 0.0;
  EfficiencyChain published_chain;

  try {
    // --- modes: vertical slab ladder and lateral ladder of one ridge --------
    current_stage = "modes";
    {
      const double wl = cfg.get_double("modes", "wavelength_nm", 910.0);
      const double n_core = device.stack_params.core.real_index(wl);
      const double n_clad = device.stack_params.cladding.real_index(wl);
      const auto vertical = solve_slab_modes(n_core, n_clad, n_clad,
                                             device.ridge.core_thickness_nm, wl, SlabPol::TE);
      if (vertical.empty())
        throw domain_error("modes stage: vertical waveguide is below cutoff");
      const double n_v = vertical.front().effective_index;
      const double n_side = n_v - device.coupler_options.lateral_index_step;
      const auto lateral = solve_slab_modes(n_v, n_side, n_side,
                                            device.ridge.ridge_width_um * 1000.0, wl,
                                            SlabPol::TM);

      CsvTable t;
      t.comments = {"mode ladders at " + detail::fmt_value(wl) + " nm",
                    "axis 0: vertical TE slab; axis 1: lateral TM ladder of one ridge "
                    "(effective-index method)"};
      t.header = {"axis", "order", "effective_index"};
      for (const auto& m : vertical)
        t.rows.push_back({0.0, static_cast<double>(m.order), m.effective_index});
      for (const auto& m : lateral)
        t.rows.push_back({1.0, static_cast<double>(m.order), m.effective_index});
      write_table("modes.csv", t);

      add_entry("modes", "vertical_fundamental_effective_index", n_v,
                detail::band_from(cfg, "modes", "fundamental_index_band"));
      add_entry("modes", "vertical_mode_count", static_cast<double>(vertical.size()),
                std::nullopt);
      add_entry("modes", "lateral_mode_count", static_cast<double>(lateral.size()),
                std::nullopt);
    }

    // --- coupler: supermode model, 50/50 length, as-built splitting ---------
    current_stage = "coupler";
    {
      const double wl = cfg.get_double("coupler", "wavelength_nm", 910.0);
      const auto model = coupler_model(device.ridge, device.stack_params, device.coupler, wl,
                                       device.coupler_options);
      const double l5050 = fifty_fifty_length_um(model);
      const auto built = splitting_ratio(device.coupler.coupler_length_um, model);

      CsvTable t;
      t.comments = {"splitting ratio vs coupling length at " + detail::fmt_value(wl) + " nm"};
      t.header = {"length_um", "cross", "through"};
      const int n = 120;
      for (int i = 0; i <= n; ++i) {
        const double L = model.full_transfer_length_um * static_cast<double>(i) / n;
        const auto s = splitting_ratio(L, model);
        t.rows.push_back({L, s.cross, s.through});
      }
      write_table("coupler.csv", t);

      add_entry("coupler", "fifty_fifty_length_um", l5050,
                detail::band_from(cfg, "coupler", "fifty_fifty_band_um"));
      add_entry("coupler", "full_transfer_length_um", model.full_transfer_length_um,
                std::nullopt);
      add_entry("coupler", "as_built_cross_fraction", built.cross,
                detail::band_from(cfg, "coupler", "as_built_cross_band"));
    }

    // --- beta: dipole-to-waveguide coupling fraction (FDTD) ------------------
    current_stage = "beta";
    {
      const double wl = cfg.get_double("beta", "wavelength_nm", 910.0);
      const double offset = cfg.get_double("beta", "dipole_offset_um", 0.0);
      VerticalSceneOptions vopt;
      vopt.cells_per_material_wavelength = cfg.get_double(
          "beta", "cells_per_material_wavelength", vopt.cells_per_material_wavelength);
      vopt.monitor_distance_um =
          cfg.get_double("beta", "monitor_distance_um", vopt.monitor_distance_um);
      vopt.monitor_halfheight_um =
          cfg.get_double("beta", "monitor_halfheight_um", vopt.monitor_halfheight_um);
      vopt.box_halfsize_um = cfg.get_double("beta", "box_halfsize_um", vopt.box_halfsize_um);
      vopt.side_margin_um = cfg.get_double("beta", "side_margin_um", vopt.side_margin_um);
      vopt.clearance_um = cfg.get_double("beta", "clearance_um", vopt.clearance_um);
      vopt.decay_threshold = cfg.get_double("beta", "decay_threshold", vopt.decay_threshold);
      vopt.max_time_um = cfg.get_double("beta", "max_time_um", vopt.max_time_um);

      const auto r = dipole_beta(device.stack_params, offset, {wl}, vopt, opt.threads);
      beta_sim = r.beta.front();

      CsvTable t;
      t.comments = {"dipole coupling fraction into the two guided arms",
                    "scene " + to_hex(r.scene_fingerprint)};
      t.header = {"wavelength_nm", "beta", "emitted_power"};
      for (std::size_t i = 0; i < r.wavelengths_nm.size(); ++i)
        t.rows.push_back({r.wavelengths_nm[i], r.beta[i], r.emitted_power[i]});
      write_table("beta.csv", t);

      add_entry("beta", "coupling_fraction", beta_sim,
                detail::band_from(cfg, "beta", "coupling_band"));
    }

    // --- loss: propagation-loss fit ------------------------------------------
    current_stage = "loss";
    {
      const std::string data = detail::resolve_path(
          opt.base_dir, cfg.get_string("loss", "data"));
      manifest.add_input(data);
      const std::string arm = cfg.get_string("loss", "arm", "a");
      chain_distance_um = cfg.get_double("loss", "chip_distance_um", 915.0);

      const auto scan = scan_from_csv(data);
      const auto fit = fit_loss(scan, arm);
      if (fit.n_points < 10)
        res.warnings.push_back("loss fit uses only " + std::to_string(fit.n_points) +
                               " points; the stderr estimate is unreliable");

      double alpha_for_chain = fit.alpha_db_per_um;
      if (cfg.has("loss", "alpha_override_db_per_um"))
        alpha_for_chain = cfg.get_double("loss", "alpha_override_db_per_um");
      chain_transmission = transmission(alpha_for_chain, chain_distance_um);

      CsvTable t;
      t.comments = {"least-squares fit of log10 intensity vs distance, arm " + arm};
      t.header = {"alpha_db_per_um", "alpha_stderr_db_per_um", "intercept_log10",
                  "residual_variance", "n_points"};
      t.rows.push_back({fit.alpha_db_per_um, fit.alpha_stderr_db_per_um, fit.intercept_log10,
                        fit.residual_variance, static_cast<double>(fit.n_points)});
      write_table("loss.csv", t);

      add_entry("loss", "alpha_db_per_um", fit.alpha_db_per_um,
                detail::band_from(cfg, "loss", "alpha_band"));
      add_entry("loss", "alpha_stderr_db_per_um", fit.alpha_stderr_db_per_um, std::nullopt);
      add_entry("loss", "chip_transmission", chain_transmission,
                detail::band_from(cfg, "loss", "transmission_band"));
    }

    // --- dop: polarization fit ------------------------------------------------
    current_stage = "dop";
    {
      const std::string data = detail::resolve_path(
          opt.base_dir, cfg.get_string("dop", "data"));
      manifest.add_input(data);
      const auto scan = polarization_from_csv(data);
      const auto fit = fit_dop(scan);

      CsvTable t;
      t.comments = {"Malus-law fit of analyzer scan"};
      t.header = {"dop", "orientation_deg", "amplitude", "background"};
      t.rows.push_back({fit.dop, fit.orientation_deg, fit.amplitude, fit.background});
      write_table("dop.csv", t);

      add_entry("dop", "degree_of_polarization", fit.dop,
                detail::band_from(cfg, "dop", "dop_band"));
      add_entry("dop", "orientation_deg", fit.orientation_deg, std::nullopt);
    }

    // --- budget: efficiency chain, published and remeasured -------------------
    current_stage = "budget";
    {
      const std::string path = detail::resolve_path(
          opt.base_dir, cfg.get_string("budget", "config"));
      manifest.add_input(path);
      const Config sub = Config::parse_file(path);
      auto terms = chain_terms_from_config(sub);
      // Standalone-run extras ([targets] bands) are not this stage's concern;
      // the pipeline carries its own bands.
      for (const auto& k : sub.keys("targets")) (void)sub.get_string("targets", k);
      sub.require_all_consumed();
      published_chain = propagate_chain(terms);

      // On-chip sub-chain: the terms that act before light leaves the chip.
      std::vector<std::string> onchip_names;
      {
        std::istringstream in(cfg.get_string("budget", "onchip_terms",
                                             "coupling_beta, waveguide_transmission"));
        std::string tok;
        while (std::getline(in, tok, ',')) {
          const auto b = tok.find_first_not_of(" \t");
          const auto e = tok.find_last_not_of(" \t");
          if (b != std::string::npos) onchip_names.push_back(tok.substr(b, e - b + 1));
        }
      }
      auto select_terms = [&](const std::vector<EfficiencyTerm>& from) {
        std::vector<EfficiencyTerm> sel;
        for (const auto& name : onchip_names) {
          bool found = false;
          for (const auto& t : from)
            if (t.name == name) {
              sel.push_back(t);
              found = true;
              break;
            }
          if (!found)
            throw config_error("budget stage: on-chip term '" + name +
                               "' is not part of the chain");
        }
        return sel;
      };
      const auto onchip = propagate_chain(select_terms(terms));

      // Remeasured chain: replace the coupling and transmission terms with the
      // values measured earlier in this run.
      auto remeasured_terms = terms;
      bool replaced_beta = false, replaced_trans = false;
      for (auto& t : remeasured_terms) {
        if (t.name == "coupling_beta") {
          t.value = beta_sim;
          t.source = TermSource::fdtd;
          replaced_beta = true;
        } else if (t.name == "waveguide_transmission") {
          t.value = chain_transmission;
          t.source = TermSource::scan_fit;
          replaced_trans = true;
        }
      }
      if (!replaced_beta || !replaced_trans)
        throw config_error(
            "budget stage: chain must contain 'coupling_beta' and "
            "'waveguide_transmission' terms to splice measured values into");
      const auto remeasured = propagate_chain(remeasured_terms);
      const auto onchip_remeasured = propagate_chain(select_terms(remeasured_terms));

      std::ostringstream body;
      body << "published chain\n---------------\n" << chain_report(published_chain);
      body << "\nremeasured chain (simulated coupling fraction, fitted transmission over "
           << detail::fmt_value(chain_distance_um) << " um)\n"
           << "----------------\n"
           << chain_report(remeasured);
      atomic_write((out_dir / "budget.txt").string(), body.str());
      manifest.add_output("budget.txt", "budget.txt");

      add_entry("budget", "overall_efficiency", published_chain.product,
                detail::band_from(cfg, "budget", "overall_band"));
      add_entry("budget", "onchip_efficiency", onchip.product,
                detail::band_from(cfg, "budget", "onchip_band"));
      add_entry("budget", "overall_efficiency_remeasured", remeasured.product,
                detail::band_from(cfg, "budget", "overall_remeasured_band"));
      add_entry("budget", "onchip_efficiency_remeasured", onchip_remeasured.product,
                detail::band_from(cfg, "budget", "onchip_remeasured_band"));
    }

    // --- hbt: coincidence scenario --------------------------------------------
    current_stage = "hbt";
    {
      const std::string path = detail::resolve_path(
          opt.base_dir, cfg.get_string("hbt", "config"));
      manifest.add_input(path);
      const Config sub = Config::parse_file(path);
      auto scenario = hbt_scenario_from_config(sub);
      for (const auto& k : sub.keys("targets")) (void)sub.get_string("targets", k);
      for (const auto& k : sub.keys("output")) (void)sub.get_string("output", k);
      sub.require_all_consumed();
      scenario.seed = seed;  // all randomness flows from the pipeline seed
      if (cfg.has("hbt", "duration_override_s"))
        scenario.duration_s = cfg.get_double("hbt", "duration_override_s");

      const auto hbt = run_hbt(scenario, opt.threads);
      histogram_to_csv(hbt.histogram, (out_dir / "hbt_histogram.csv").string());
      manifest.add_output("hbt_histogram.csv", "hbt_histogram.csv");

      const double rep = scenario.source.rep_rate_hz;
      const double eff_a = measured_overall_efficiency(
          hbt.rate_a_cps, scenario.detector_a.dark_rate_cps, rep);
      const double eff_b = measured_overall_efficiency(
          hbt.rate_b_cps, scenario.detector_b.dark_rate_cps, rep);

      std::ostringstream body;
      body << "coincidence scenario summary\n----------------------------\n";
      body << "duration_s            = " << detail::fmt_value(scenario.duration_s) << "\n";
      body << "rate_a_cps            = " << detail::fmt_value(hbt.rate_a_cps) << "\n";
      body << "rate_b_cps            = " << detail::fmt_value(hbt.rate_b_cps) << "\n";
      body << "signal_fraction_a     = " << detail::fmt_value(hbt.rho_a) << "\n";
      body << "signal_fraction_b     = " << detail::fmt_value(hbt.rho_b) << "\n";
      body << "g2_raw                = " << detail::fmt_value(hbt.raw.value) << " +- "
           << detail::fmt_value(hbt.raw.sigma) << "\n";
      body << "g2_corrected          = " << detail::fmt_value(hbt.corrected.value) << " +- "
           << detail::fmt_value(hbt.corrected.sigma) << "\n";
      body << "efficiency_per_pulse_a = " << detail::fmt_value(eff_a) << "\n";
      body << "efficiency_per_pulse_b = " << detail::fmt_value(eff_b) << "\n";
      body << "budget_overall_reference = " << detail::fmt_value(published_chain.product)
           << "\n";
      atomic_write((out_dir / "hbt.txt").string(), body.str());
      manifest.add_output("hbt.txt", "hbt.txt");

      add_entry("hbt", "g2_raw", hbt.raw.value, detail::band_from(cfg, "hbt", "raw_band"));
      add_entry("hbt", "g2_corrected", hbt.corrected.value,
                detail::band_from(cfg, "hbt", "corrected_band"));
      add_entry("hbt", "efficiency_per_pulse_a", eff_a,
                detail::band_from(cfg, "hbt", "efficiency_a_band"));
      add_entry("hbt", "efficiency_per_pulse_b", eff_b,
                detail::band_from(cfg, "hbt", "efficiency_b_band"));
      add_entry("hbt", "budget_overall_reference", published_chain.product, std::nullopt);
    }

    current_stage = "report";
    cfg.require_all_consumed();
  } catch (const std::exception& e) {
    manifest.failed_stage = current_stage;
    manifest.error = e.what();
    write_manifest((out_dir / "manifest.json").string(), manifest);
    throw;
  }

  res.all_pass = res.bands_passed == res.bands_checked;
  res.report_text = format_report(res.entries, res.bands_checked, res.bands_passed);
  atomic_write((out_dir / "report.txt").string(), res.report_text);
  manifest.add_output("report.txt", "report.txt");
  write_manifest((out_dir / "manifest.json").string(), manifest);
  return res;
}

}  // namespace wgbs
