#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "wgbs/device.hpp"

using namespace wgbs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("material constant and tabulated dispersion") {
  const Material c("core", 3.48);
  REQUIRE(c.index(910.0) == std::complex<double>(3.48, 0.0));
  REQUIRE(c.index(1.0) == std::complex<double>(3.48, 0.0));
  REQUIRE_FALSE(c.tabulated());

  const Material t("tab", {900.0, 920.0, 940.0},
                   {{3.5, 0.0}, {3.4, 0.01}, {3.3, 0.02}});
  REQUIRE(t.tabulated());
  REQUIRE(t.index(900.0) == std::complex<double>(3.5, 0.0));
  REQUIRE(t.index(940.0) == std::complex<double>(3.3, 0.02));
  REQUIRE_THAT(t.index(910.0).real(), WithinAbs(3.45, 1e-12));
  REQUIRE_THAT(t.index(910.0).imag(), WithinAbs(0.005, 1e-12));
  REQUIRE_THAT(t.index(930.0).real(), WithinAbs(3.35, 1e-12));
  REQUIRE_THROWS_AS(t.index(899.9), domain_error);
  REQUIRE_THROWS_AS(t.index(940.1), domain_error);
  REQUIRE_THROWS_AS(c.index(0.0), domain_error);
  REQUIRE_THROWS_AS(c.index(-5.0), domain_error);
}

TEST_CASE("material invariants enforced at construction") {
  REQUIRE_THROWS_AS(Material("bad", 0.9), domain_error);
  REQUIRE_THROWS_AS(Material("bad", std::complex<double>(1.5, -0.1)), domain_error);
  REQUIRE_THROWS_AS(Material("bad", {900.0, 900.0}, {{1.5, 0.0}, {1.6, 0.0}}), domain_error);
  REQUIRE_THROWS_AS(Material("bad", {920.0, 900.0}, {{1.5, 0.0}, {1.6, 0.0}}), domain_error);
  REQUIRE_THROWS_AS(Material("bad", {900.0}, {{0.5, 0.0}}), domain_error);
  REQUIRE_THROWS_AS(Material("bad", {-1.0}, {{1.5, 0.0}}), domain_error);
  REQUIRE_THROWS_AS(Material("bad", {900.0, 920.0}, {{1.5, 0.0}}), domain_error);
}

TEST_CASE("vertical stack has the canonical layer sequence") {
  const auto stack = build_vertical_stack();
  // 4 top pairs + core + 20 bottom pairs
  REQUIRE(stack.layers().size() == 2 * 4 + 1 + 2 * 20);
  REQUIRE(stack.ambient().index(930.0).real() == 1.0);
  REQUIRE(stack.substrate().index(930.0).real() == 3.48);

  // quarter-wave thicknesses from the configured indices
  const double t_high = 930.0 / (4.0 * 3.48);
  const double t_low = 930.0 / (4.0 * 2.95);
  REQUIRE_THAT(t_high, WithinAbs(66.81, 0.01));  // ~66.8 nm
  REQUIRE_THAT(t_low, WithinAbs(78.81, 0.01));

  const auto& ls = stack.layers();
  // surface layer is high-index, the layer above the core is low-index
  REQUIRE(ls[0].material.name() == "core");
  REQUIRE_THAT(ls[0].thickness_nm, WithinRel(t_high, 1e-12));
  REQUIRE(ls[7].material.name() == "cladding");
  // core layer is exactly 267 nm
  REQUIRE(ls[8].material.name() == "core");
  REQUIRE(ls[8].thickness_nm == 267.0);
  // bottom mirror starts low-index below the core, ends high-index at substrate
  REQUIRE(ls[9].material.name() == "cladding");
  REQUIRE_THAT(ls[9].thickness_nm, WithinRel(t_low, 1e-12));
  REQUIRE(ls.back().material.name() == "core");

  // deterministic / pure
  const auto stack2 = build_vertical_stack();
  REQUIRE(stack2.layers().size() == stack.layers().size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    REQUIRE(stack2.layers()[i].thickness_nm == ls[i].thickness_nm);
    REQUIRE(stack2.layers()[i].material.name() == ls[i].material.name());
  }
}

TEST_CASE("stack validation rejects non-positive thickness") {
  const Material air("air", 1.0), core("core", 3.48);
  REQUIRE_THROWS_AS(LayerStack(air, core, {{core, 0.0}}), domain_error);
  REQUIRE_THROWS_AS(LayerStack(air, core, {{core, -1.0}}), domain_error);
  REQUIRE_NOTHROW(LayerStack(air, core, {}));
}

TEST_CASE("stack reversal swaps half-spaces and layer order") {
  const auto stack = build_vertical_stack();
  const auto rev = stack.reversed();
  REQUIRE(rev.ambient().name() == stack.substrate().name());
  REQUIRE(rev.substrate().name() == stack.ambient().name());
  REQUIRE(rev.layers().front().thickness_nm == stack.layers().back().thickness_nm);
  REQUIRE_THAT(rev.total_thickness_nm(), WithinRel(stack.total_thickness_nm(), 1e-12));
}

TEST_CASE("geometry invariants") {
  RidgeGeometry r;
  REQUIRE_NOTHROW(r.validate());
  r.sidewall_angle_deg = 15.0;
  REQUIRE_NOTHROW(r.validate());
  r.sidewall_angle_deg = 15.1;
  REQUIRE_THROWS_AS(r.validate(), domain_error);
  r = RidgeGeometry{};
  r.ridge_width_um = 0.0;
  REQUIRE_THROWS_AS(r.validate(), domain_error);

  CouplerSpec c;
  REQUIRE_NOTHROW(c.validate());
  c.bend_separation_um = 0.0;
  REQUIRE_THROWS_AS(c.validate(), domain_error);
  c = CouplerSpec{};
  c.bend_length_um = -1.0;
  REQUIRE_THROWS_AS(c.validate(), domain_error);
  c = CouplerSpec{};
  c.coupler_length_um = -0.1;
  REQUIRE_THROWS_AS(c.validate(), domain_error);
}

TEST_CASE("cosine bend endpoints and midpoint") {
  const CouplerSpec spec;  // s = 50, L_b = 437.1
  REQUIRE(cosine_bend_offset(0.0, spec) == 0.0);
  REQUIRE_THAT(cosine_bend_offset(437.1, spec), WithinAbs(50.0, 1e-12));
  REQUIRE_THAT(cosine_bend_offset(437.1 / 2, spec), WithinAbs(25.0, 1e-12));
  REQUIRE_THROWS_AS(cosine_bend_offset(-1e-9, spec), domain_error);
  REQUIRE_THROWS_AS(cosine_bend_offset(437.1 + 1e-9, spec), domain_error);
}

TEST_CASE("cosine bend is monotone with flat endpoints") {
  const CouplerSpec spec;
  const double lb = spec.bend_length_um;
  double prev = -1.0;
  for (int i = 0; i <= 500; ++i) {
    const double y = cosine_bend_offset(lb * i / 500.0, spec);
    REQUIRE(y >= prev);
    prev = y;
  }
  // one-sided 3-point first derivative at both endpoints
  const double h = 1e-4 * lb;
  const double tol = 1e-6 * spec.bend_separation_um / lb;
  const double d0 = (-3.0 * cosine_bend_offset(0.0, spec) + 4.0 * cosine_bend_offset(h, spec) -
                     cosine_bend_offset(2 * h, spec)) /
                    (2 * h);
  const double d1 = (3.0 * cosine_bend_offset(lb, spec) - 4.0 * cosine_bend_offset(lb - h, spec) +
                     cosine_bend_offset(lb - 2 * h, spec)) /
                    (2 * h);
  REQUIRE_THAT(d0, WithinAbs(0.0, tol));
  REQUIRE_THAT(d1, WithinAbs(0.0, tol));
}

namespace {
// independent arc-length oracle: dense trapezoid over sampled offsets
double arc_length_trapezoid(const CouplerSpec& spec, int n) {
  double len = 0.0;
  double x_prev = 0.0, y_prev = cosine_bend_offset(0.0, spec);
  for (int i = 1; i <= n; ++i) {
    const double x = spec.bend_length_um * i / n;
    const double y = cosine_bend_offset(x, spec);
    len += std::hypot(x - x_prev, y - y_prev);
    x_prev = x;
    y_prev = y;
  }
  return len;
}
}  // namespace

TEST_CASE("bend path length matches a dense chord-sum oracle") {
  const CouplerSpec spec;
  const double quad = bend_path_length(spec);
  const double oracle = arc_length_trapezoid(spec, 1 << 21);
  REQUIRE_THAT(quad, WithinRel(oracle, 1e-6));
  REQUIRE(quad >= spec.bend_length_um);
}

TEST_CASE("bend path length limits and monotonicity in separation") {
  CouplerSpec spec;
  spec.bend_separation_um = 0.0;  // straight path
  REQUIRE(bend_path_length(spec) == spec.bend_length_um);

  double prev = spec.bend_length_um;
  for (const double s : {5.0, 20.0, 50.0, 120.0}) {
    spec.bend_separation_um = s;
    const double len = bend_path_length(spec);
    REQUIRE(len > prev);
    prev = len;
  }
}

TEST_CASE("device loads from config with fallbacks") {
  const auto cfg = Config::parse_string(R"(
[materials]
core = 3.5
[stack]
top_pairs = 3
[ridge]
width_um = 1.5
[coupler]
length_um = 100.0
[coupler.model]
lateral_index_step = 0.004
)");
  const Device d = device_from_config(cfg);
  cfg.require_all_consumed();
  REQUIRE(d.stack_params.core.index(910.0).real() == 3.5);
  REQUIRE(d.stack_params.cladding.index(910.0).real() == 2.95);  // fallback
  REQUIRE(d.stack_params.top_pairs == 3);
  REQUIRE(d.stack_params.bottom_pairs == 20);
  REQUIRE(d.ridge.ridge_width_um == 1.5);
  REQUIRE(d.coupler.coupler_length_um == 100.0);
  REQUIRE(d.coupler_options.lateral_index_step == 0.004);
  const auto stack = d.build_stack();
  REQUIRE(stack.layers().size() == 2 * 3 + 1 + 2 * 20);

  const Device defaults = device_from_config(Config::parse_string(""));
  REQUIRE(defaults.coupler.coupler_length_um == 118.5);
  REQUIRE(defaults.coupler.bend_separation_um == 50.0);
  REQUIRE(defaults.coupler.bend_length_um == 437.1);
  REQUIRE(defaults.ridge.sidewall_angle_deg == 5.0);
}

TEST_CASE("device config accepts tabulated materials") {
  CsvTable t;
  t.header = {"wavelength_nm", "n", "k"};
  t.rows = {{800.0, 3.6, 0.0}, {1000.0, 3.4, 0.0}};
  write_csv("/tmp/wgbs_core_table.csv", t);
  const auto cfg = Config::parse_string(
      "[materials]\ncore_table = /tmp/wgbs_core_table.csv\n");
  const Device d = device_from_config(cfg);
  REQUIRE_THAT(d.stack_params.core.index(900.0).real(), WithinAbs(3.5, 1e-12));
}
