// Engine-level tests for the 2D time-domain solver: power conservation,
// dispersion-limited accuracy and its convergence order, absorber quality,
// run-length and worker-count invariance, failure detection, and artifact
// round trips.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "wgbs/fdtd.hpp"

using namespace wgbs;

namespace {

// Four monitors forming a closed box of half-size r around (cx, cy), with
// outward orientation.
void add_box(FdtdConfig& cfg, const std::string& prefix, double cx, double cy, double r) {
  cfg.monitors.push_back({prefix + "_left", cx - r, cy - r, cx - r, cy + r, -1});
  cfg.monitors.push_back({prefix + "_right", cx + r, cy - r, cx + r, cy + r, +1});
  cfg.monitors.push_back({prefix + "_bottom", cx - r, cy - r, cx + r, cy - r, -1});
  cfg.monitors.push_back({prefix + "_top", cx - r, cy + r, cx + r, cy + r, +1});
}

double box_power(const std::vector<FluxResult>& res, const std::string& prefix, std::size_t l) {
  double p = 0.0;
  for (const auto& r : res)
    if (r.id.rfind(prefix, 0) == 0) p += r.power[l];
  return p;
}

// Phase velocity between two on-axis probes 4 um apart, from a
// through-origin fit of the unwrapped spectral phase (the fit averages out
// residual absorber-reflection ripple).
double measure_phase_velocity(double resolution_cells_per_um) {
  FdtdConfig cfg;
  cfg.width_um = 16.0;
  cfg.height_um = 10.0;
  cfg.resolution_cells_per_um = resolution_cells_per_um;
  cfg.absorber_x_um = cfg.absorber_y_um = 1.5;
  cfg.source = {3.0, 5.0, 0.0, {}, 900.0, 60.0, 6.0};
  cfg.run.decay_threshold = 1e-10;
  const double sep = 4.0;
  cfg.monitors.push_back({"near", 6.0, 4.9, 6.0, 5.1, +1});
  cfg.monitors.push_back({"far", 6.0 + sep, 4.9, 6.0 + sep, 5.1, +1});
  for (int k = 0; k <= 10; ++k) cfg.wavelengths_nm.push_back(870.0 + 6.0 * k);
  const auto out = run_fdtd(cfg);

  std::vector<double> phi, omega;
  for (std::size_t l = 0; l < cfg.wavelengths_nm.size(); ++l) {
    phi.push_back(std::arg(out[1].ez_spectrum[l] / out[0].ez_spectrum[l]));
    omega.push_back(2.0 * std::numbers::pi / (cfg.wavelengths_nm[l] / 1000.0));
  }
  for (std::size_t l = 1; l < phi.size(); ++l) {
    while (phi[l] - phi[l - 1] > std::numbers::pi) phi[l] -= 2.0 * std::numbers::pi;
    while (phi[l] - phi[l - 1] < -std::numbers::pi) phi[l] += 2.0 * std::numbers::pi;
  }
  double sw = 0, sp = 0, sww = 0, swp = 0;
  const double n = static_cast<double>(phi.size());
  for (std::size_t l = 0; l < phi.size(); ++l) {
    sw += omega[l];
    sp += phi[l];
    sww += omega[l] * omega[l];
    swp += omega[l] * phi[l];
  }
  const double tau = (n * swp - sw * sp) / (n * sww - sw * sw);
  const double cycles = std::round((tau * omega[0] - phi[0]) / (2.0 * std::numbers::pi));
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < phi.size(); ++l) {
    num += omega[l] * (phi[l] + 2.0 * std::numbers::pi * cycles);
    den += omega[l] * omega[l];
  }
  return sep / (num / den);
}

FdtdConfig small_vacuum_scene() {
  FdtdConfig cfg;
  cfg.width_um = 8.0;
  cfg.height_um = 8.0;
  cfg.resolution_cells_per_um = 20.0;
  cfg.absorber_x_um = cfg.absorber_y_um = 1.0;
  cfg.source = {4.0, 4.0, 0.0, {}, 910.0, 60.0, 6.0};
  cfg.monitors.push_back({"right", 6.0, 3.0, 6.0, 5.0, +1});
  cfg.monitors.push_back({"top", 3.0, 6.0, 5.0, 6.0, +1});
  cfg.wavelengths_nm = {890.0, 910.0, 930.0};
  return cfg;
}

}  // namespace

TEST_CASE("scene validation rejects ill-posed configurations") {
  const auto expect_rejected = [](FdtdConfig cfg) {
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
  };

  FdtdConfig good = small_vacuum_scene();
  REQUIRE_NOTHROW(good.validate());

  { FdtdConfig c = good; c.width_um = 0.0; expect_rejected(c); }
  { FdtdConfig c = good; c.resolution_cells_per_um = -5.0; expect_rejected(c); }
  { FdtdConfig c = good; c.courant_fraction = 1.0; expect_rejected(c); }
  { FdtdConfig c = good; c.courant_fraction = 0.0; expect_rejected(c); }
  { FdtdConfig c = good; c.wavelengths_nm.clear(); expect_rejected(c); }
  { FdtdConfig c = good; c.wavelengths_nm.push_back(-910.0); expect_rejected(c); }
  { FdtdConfig c = good; c.absorber_x_um = 4.0; expect_rejected(c); }
  { FdtdConfig c = good; c.source.bandwidth_fwhm_nm = 0.0; expect_rejected(c); }
  { FdtdConfig c = good; c.source.start_sigmas = 1.0; expect_rejected(c); }
  { FdtdConfig c = good; c.run.check_interval_steps = 0; expect_rejected(c); }

  // Resolution floor: 10 cells per shortest material wavelength.
  {
    FdtdConfig c = good;
    c.rects.push_back({3.5, 3.5, 4.5, 4.5, 3.48});
    c.resolution_cells_per_um = 20.0;  // 910 nm in n = 3.48 spans only ~5 cells
    expect_rejected(c);
  }
  // Source and monitors must stay clear of the absorber.
  { FdtdConfig c = good; c.source.x_um = 0.5; expect_rejected(c); }
  {
    FdtdConfig c = good;
    c.source.profile = {1.0, 1.0};
    c.source.y1_um = c.source.y_um;  // no extent
    expect_rejected(c);
  }
  { FdtdConfig c = good; c.monitors.push_back({"bad", 0.5, 3.0, 0.5, 5.0, +1}); expect_rejected(c); }
  { FdtdConfig c = good; c.monitors.push_back({"diag", 2.0, 2.0, 3.0, 3.0, +1}); expect_rejected(c); }
  { FdtdConfig c = good; c.monitors.push_back({"inv", 3.0, 5.0, 3.0, 2.0, +1}); expect_rejected(c); }
  { FdtdConfig c = good; c.monitors.push_back({"sgn", 3.0, 2.0, 3.0, 5.0, 2}); expect_rejected(c); }
  { FdtdConfig c = good; c.monitors.push_back({"", 3.0, 2.0, 3.0, 5.0, 1}); expect_rejected(c); }

  REQUIRE_THROWS_AS(run_fdtd(good, 0), config_error);
}

TEST_CASE("point source power is conserved between nested boxes in vacuum") {
  FdtdConfig cfg;
  cfg.width_um = 12.0;
  cfg.height_um = 12.0;
  cfg.resolution_cells_per_um = 20.0;
  cfg.absorber_x_um = cfg.absorber_y_um = 1.0;
  cfg.source = {6.0, 6.0, 0.0, {}, 910.0, 60.0, 6.0};
  cfg.wavelengths_nm = {880.0, 910.0, 940.0};
  add_box(cfg, "inner", 6.0, 6.0, 1.5);
  add_box(cfg, "outer", 6.0, 6.0, 3.5);
  const auto res = run_fdtd(cfg);

  for (std::size_t l = 0; l < cfg.wavelengths_nm.size(); ++l) {
    const double inner = box_power(res, "inner", l);
    const double outer = box_power(res, "outer", l);
    CAPTURE(cfg.wavelengths_nm[l], inner, outer);
    REQUIRE(inner > 0.0);
    REQUIRE(outer > 0.0);
    // Same total power through boxes of different size: conservation and
    // box-size independence in one statement.
    REQUIRE(outer / inner == Catch::Approx(1.0).margin(0.01));
  }
}

TEST_CASE("free-space phase velocity is met within 1% and converges at second order") {
  const double v_coarse = measure_phase_velocity(20.0);
  const double v_fine = measure_phase_velocity(40.0);
  const double err_coarse = std::abs(v_coarse - 1.0);
  const double err_fine = std::abs(v_fine - 1.0);
  CAPTURE(v_coarse, v_fine);
  REQUIRE(err_coarse < 0.01);
  // Halving the step reduces the dispersion error fourfold (second order);
  // allow [3, 5] for residual absorber ripple.
  REQUIRE(err_coarse / err_fine > 3.0);
  REQUIRE(err_coarse / err_fine < 5.0);
  // Numerical dispersion makes the lattice slightly slow, never fast.
  REQUIRE(v_coarse < 1.0);
}

TEST_CASE("absorbing boundary reflects less than 1e-4 of a plane wave") {
  const auto probe_power = [](double width) {
    FdtdConfig cfg;
    cfg.width_um = width;
    cfg.height_um = 8.0;
    cfg.resolution_cells_per_um = 20.0;
    cfg.absorber_x_um = cfg.absorber_y_um = 1.0;
    cfg.source = {3.0, 1.2, 6.8, std::vector<double>(7, 1.0), 910.0, 60.0, 6.0};
    cfg.monitors.push_back({"probe", 6.0, 3.8, 6.0, 4.2, +1});
    cfg.wavelengths_nm = {910.0};
    return run_fdtd(cfg)[0].power[0];
  };
  // Identical scenes except for the distance to the right absorber; edge
  // diffraction is common to both, so the difference isolates the
  // reflection returning to the probe.
  const double far_wall = probe_power(30.0);
  const double near_wall = probe_power(9.0);
  CAPTURE(far_wall, near_wall);
  REQUIRE(far_wall > 0.0);
  REQUIRE(std::abs(far_wall - near_wall) / far_wall < 1e-4);
}

TEST_CASE("doubling the run time leaves converged spectra unchanged") {
  FdtdConfig cfg = small_vacuum_scene();
  const auto short_run = run_fdtd(cfg);
  FdtdConfig longer = cfg;
  longer.run.min_time_um = 150.0;  // well past the natural decay stop
  const auto long_run = run_fdtd(longer);
  for (std::size_t m = 0; m < short_run.size(); ++m)
    for (std::size_t l = 0; l < short_run[m].power.size(); ++l) {
      REQUIRE(long_run[m].power[l] ==
              Catch::Approx(short_run[m].power[l]).epsilon(0.005));
    }
}

TEST_CASE("results are bit-identical for any worker count") {
  FdtdConfig cfg = small_vacuum_scene();
  cfg.rects.push_back({4.5, 3.2, 5.5, 4.8, 1.7});  // break symmetry with a dielectric block
  cfg.resolution_cells_per_um = 22.0;              // keep the floor with n = 1.7
  const auto serial = run_fdtd(cfg, 1);
  for (int workers : {2, 3, 7}) {
    const auto parallel = run_fdtd(cfg, workers);
    REQUIRE(parallel.size() == serial.size());
    for (std::size_t m = 0; m < serial.size(); ++m) {
      for (std::size_t l = 0; l < serial[m].power.size(); ++l) {
        // Bitwise equality, not approximate.
        REQUIRE(parallel[m].power[l] == serial[m].power[l]);
        REQUIRE(parallel[m].ez_spectrum[l].real() == serial[m].ez_spectrum[l].real());
        REQUIRE(parallel[m].ez_spectrum[l].imag() == serial[m].ez_spectrum[l].imag());
      }
    }
  }
}

TEST_CASE("instability is detected and aborts with a diagnostic") {
  FdtdConfig cfg = small_vacuum_scene();
  // A sub-unity index raises the local phase velocity above c, so a Courant
  // fraction valid for vacuum violates the local stability bound.
  cfg.rects.push_back({3.0, 3.0, 5.0, 5.0, 0.55});
  cfg.courant_fraction = 0.9;
  REQUIRE_THROWS_MATCHES(
      run_fdtd(cfg), numeric_error,
      Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("instabilit") ||
                                      Catch::Matchers::ContainsSubstring("not finite")));
}

TEST_CASE("spectrum CSV survives a write/read round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "wgbs_flux_csv";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "flux.csv").string();

  FluxResult flux;
  flux.id = "guided_right";
  flux.wavelengths_nm = {905.0, 910.0, 915.0};
  flux.power = {1.234567890123456e-3, -7.5e-9, 0.4999999999999999};
  flux_to_csv(flux, path);
  const FluxResult back = flux_from_csv(path);
  REQUIRE(back.id == flux.id);
  REQUIRE(back.wavelengths_nm == flux.wavelengths_nm);
  REQUIRE(back.power == flux.power);  // exact: 17 significant digits

  SECTION("malformed files are rejected") {
    {
      std::ofstream out(path);
      out << "wavelength_nm;power\n910,1\n";
    }
    REQUIRE_THROWS_AS(flux_from_csv(path), domain_error);
    {
      std::ofstream out(path);
      out << "wavelength_nm,power\n910\n";
    }
    REQUIRE_THROWS_AS(flux_from_csv(path), domain_error);
    {
      std::ofstream out(path);
      out << "wavelength_nm,power\n910,abc\n";
    }
    REQUIRE_THROWS_AS(flux_from_csv(path), domain_error);
    REQUIRE_THROWS_AS(flux_from_csv((dir / "missing.csv").string()), domain_error);
  }
}

TEST_CASE("epsilon map and field snapshot use the documented grid layout") {
  const auto dir = std::filesystem::temp_directory_path() / "wgbs_grids";
  std::filesystem::create_directories(dir);

  FdtdConfig cfg = small_vacuum_scene();
  cfg.rects.push_back({5.0, 5.0, 7.0, 7.0, 2.0});
  cfg.resolution_cells_per_um = 25.0;

  const std::string eps_path = (dir / "eps.bin").string();
  save_epsilon_map(cfg, eps_path);

  std::ifstream in(eps_path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic, line;
  std::getline(in, magic);
  REQUIRE(magic == "wgbs-grid 1");
  int nx = 0, ny = 0;
  double spacing = 0.0;
  std::string field;
  while (std::getline(in, line) && !line.empty()) {
    std::istringstream ls(line);
    std::string key, eq;
    ls >> key >> eq;
    if (key == "nx") ls >> nx;
    if (key == "ny") ls >> ny;
    if (key == "spacing_um") ls >> spacing;
    if (key == "field") ls >> field;
  }
  REQUIRE(nx == 201);
  REQUIRE(ny == 201);
  REQUIRE(spacing == Catch::Approx(0.04));
  REQUIRE(field == "epsilon");
  std::vector<double> grid(static_cast<std::size_t>(nx) * ny);
  in.read(reinterpret_cast<char*>(grid.data()),
          static_cast<std::streamsize>(grid.size() * sizeof(double)));
  REQUIRE(in.gcount() == static_cast<std::streamsize>(grid.size() * sizeof(double)));
  const auto at = [&](double x, double y) {
    const int i = static_cast<int>(std::llround(x / spacing));
    const int j = static_cast<int>(std::llround(y / spacing));
    return grid[static_cast<std::size_t>(j) * nx + i];
  };
  REQUIRE(at(2.0, 2.0) == 1.0);          // background
  REQUIRE(at(6.0, 6.0) == 4.0);          // inside the block, n^2
  REQUIRE(at(6.0, 2.0) == 1.0);

  SECTION("field snapshot is written at the end of a run") {
    FdtdConfig snap = small_vacuum_scene();
    snap.run.decay_threshold = 0.1;  // stop early, fields still present
    snap.field_snapshot_path = (dir / "ez.bin").string();
    run_fdtd(snap);
    std::ifstream fs(snap.field_snapshot_path, std::ios::binary);
    REQUIRE(fs.good());
    std::string fmagic;
    std::getline(fs, fmagic);
    REQUIRE(fmagic == "wgbs-grid 1");
  }
}

TEST_CASE("scene text is stable and drives the content hash") {
  FdtdConfig a = small_vacuum_scene();
  a.rects.push_back({1.0, 1.0, 2.0, 2.0, 3.48});
  a.resolution_cells_per_um = 40.0;
  FdtdConfig b = a;

  REQUIRE(scene_to_text(a) == scene_to_text(b));
  REQUIRE(scene_hash(a) == scene_hash(b));

  b.rects.back().index = 3.4800001;
  REQUIRE(scene_hash(a) != scene_hash(b));

  FdtdConfig c = a;
  c.wavelengths_nm.push_back(955.0);
  REQUIRE(scene_hash(a) != scene_hash(c));

  const std::string text = scene_to_text(a);
  REQUIRE(text.find("[domain]") != std::string::npos);
  REQUIRE(text.find("[rect]") != std::string::npos);
  REQUIRE(text.find("[source]") != std::string::npos);
  REQUIRE(text.find("[monitor]") != std::string::npos);
  REQUIRE(text.find("[run]") != std::string::npos);
}
