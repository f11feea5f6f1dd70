#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "wgbs/config.hpp"
#include "wgbs/error.hpp"
#include "wgbs/materials.hpp"
#include "wgbs/numerics.hpp"

namespace wgbs {

struct Layer {
  Material material;
  double thickness_nm;
};

/// Planar layer stack, listed top (incidence side) to bottom, between an
/// ambient and a substrate half-space.
class LayerStack {
 public:
  LayerStack(Material ambient, Material substrate, std::vector<Layer> layers)
      : ambient_(std::move(ambient)), substrate_(std::move(substrate)), layers_(std::move(layers)) {
    for (const auto& l : layers_) {
      if (!(l.thickness_nm > 0))
        throw domain_error("layer '" + l.material.name() + "': thickness must be positive");
    }
  }

  const Material& ambient() const { return ambient_; }
  const Material& substrate() const { return substrate_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Same physical structure illuminated from the other side.
  LayerStack reversed() const {
    std::vector<Layer> rev(layers_.rbegin(), layers_.rend());
    return LayerStack(substrate_, ambient_, std::move(rev));
  }

  double total_thickness_nm() const {
    double t = 0;
    for (const auto& l : layers_) t += l.thickness_nm;
    return t;
  }

 private:
  Material ambient_;
  Material substrate_;
  std::vector<Layer> layers_;
};

/// N quarter-wave (low, high) pairs from the top, tuned to center_wl_nm.
inline LayerStack quarter_wave_mirror(const Material& low, const Material& high, int pairs,
                                      double center_wl_nm, const Material& ambient,
                                      const Material& substrate) {
  if (pairs < 1) throw domain_error("quarter_wave_mirror: needs at least one pair");
  if (!(center_wl_nm > 0)) throw domain_error("quarter_wave_mirror: bad center wavelength");
  const double t_low = center_wl_nm / (4.0 * low.real_index(center_wl_nm));
  const double t_high = center_wl_nm / (4.0 * high.real_index(center_wl_nm));
  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(2 * pairs));
  for (int i = 0; i < pairs; ++i) {
    layers.push_back({low, t_low});
    layers.push_back({high, t_high});
  }
  return LayerStack(ambient, substrate, std::move(layers));
}

/// Parameters of the vertical layer structure: a thick high-index core
/// between two quarter-wave mirrors, grown on a high-index substrate.
struct StackParams {
  Material core{"core", 3.48};
  Material cladding{"cladding", 2.95};
  Material ambient{"ambient", 1.0};
  Material substrate{"substrate", 3.48};
  double center_wl_nm = 930.0;
  double core_thickness_nm = 267.0;
  int top_pairs = 4;
  int bottom_pairs = 20;
};

/// Canonical vertical structure: `top_pairs` (high, low) quarter-wave pairs
/// under the surface, the core layer, then `bottom_pairs` (low, high) pairs
/// above the substrate. Mirrors face the core with their low-index layer.
inline LayerStack build_vertical_stack(const StackParams& p = StackParams{}) {
  if (p.top_pairs < 0 || p.bottom_pairs < 0)
    throw domain_error("build_vertical_stack: negative pair count");
  if (!(p.core_thickness_nm > 0)) throw domain_error("build_vertical_stack: bad core thickness");
  const double t_high = p.center_wl_nm / (4.0 * p.core.real_index(p.center_wl_nm));
  const double t_low = p.center_wl_nm / (4.0 * p.cladding.real_index(p.center_wl_nm));
  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(2 * (p.top_pairs + p.bottom_pairs) + 1));
  for (int i = 0; i < p.top_pairs; ++i) {
    layers.push_back({p.core, t_high});
    layers.push_back({p.cladding, t_low});
  }
  layers.push_back({p.core, p.core_thickness_nm});
  for (int i = 0; i < p.bottom_pairs; ++i) {
    layers.push_back({p.cladding, t_low});
    layers.push_back({p.core, t_high});
  }
  return LayerStack(p.ambient, p.substrate, std::move(layers));
}

/// Etched ridge cross-section. The etch runs through the core; the stop
/// index counts layers into the bottom mirror (0 = stop at its first layer).
/// Sidewalls are treated as vertical by every solver; the measured angle is
/// recorded for provenance only.
struct RidgeGeometry {
  double ridge_width_um = 2.0;
  double core_thickness_nm = 267.0;
  int etch_stop_layer = 0;
  double sidewall_angle_deg = 5.0;

  void validate() const {
    if (!(ridge_width_um > 0)) throw domain_error("ridge: width must be positive");
    if (!(core_thickness_nm > 0)) throw domain_error("ridge: core thickness must be positive");
    if (etch_stop_layer < 0) throw domain_error("ridge: etch stop layer must be >= 0");
    if (!(sidewall_angle_deg >= 0.0 && sidewall_angle_deg <= 15.0))
      throw domain_error("ridge: sidewall angle outside [0, 15] degrees");
  }
};

/// Zero-gap directional coupler with cosine lead-in/lead-out bends.
struct CouplerSpec {
  double coupler_length_um = 118.5;
  double gap_um = 0.0;
  double bend_separation_um = 50.0;
  double bend_length_um = 437.1;

  void validate() const {
    if (!(coupler_length_um >= 0)) throw domain_error("coupler: length must be >= 0");
    if (!(gap_um >= 0)) throw domain_error("coupler: gap must be >= 0");
    if (!(bend_separation_um > 0)) throw domain_error("coupler: bend separation must be positive");
    if (!(bend_length_um > 0)) throw domain_error("coupler: bend length must be positive");
  }
};

/// Lateral offset of the cosine bend at position x along the bend,
/// y(x) = (s/2)(1 - cos(pi x / L_b)). Monotone, flat at both ends.
/// Accepts s = 0 (straight path) even though built devices require s > 0.
inline double cosine_bend_offset(double x_um, const CouplerSpec& spec) {
  const double lb = spec.bend_length_um;
  if (!(lb > 0)) throw domain_error("cosine_bend_offset: bend length must be positive");
  if (!(spec.bend_separation_um >= 0))
    throw domain_error("cosine_bend_offset: bend separation must be >= 0");
  if (!(x_um >= 0.0 && x_um <= lb))
    throw domain_error("cosine_bend_offset: position outside [0, bend_length]");
  return 0.5 * spec.bend_separation_um * (1.0 - std::cos(std::numbers::pi * x_um / lb));
}

/// Arc length of the cosine bend, by adaptive quadrature (relative error
/// well under 1e-8). Always >= bend_length, exactly L_b for s = 0.
inline double bend_path_length(const CouplerSpec& spec) {
  const double s = spec.bend_separation_um;
  const double lb = spec.bend_length_um;
  if (!(lb > 0)) throw domain_error("bend_path_length: bend length must be positive");
  if (!(s >= 0)) throw domain_error("bend_path_length: bend separation must be >= 0");
  const double amp = 0.5 * s * std::numbers::pi / lb;
  const double len = adaptive_simpson(
      [&](double x) {
        const double slope = amp * std::sin(std::numbers::pi * x / lb);
        return std::sqrt(1.0 + slope * slope);
      },
      0.0, lb, 1e-11);
  return len;
}

/// Options of the two-mode coupler model that are calibration inputs rather
/// than geometry: the lateral index step seen by the merged section.  The
/// default is calibrated so the model reproduces the measured 50/50 length
/// of the fabricated coupler at 910 nm.
struct CouplerModelOptions {
  double lateral_index_step = 2.98701318e-3;
};

/// Full device description as loaded from a config file.
struct Device {
  StackParams stack_params;
  RidgeGeometry ridge;
  CouplerSpec coupler;
  CouplerModelOptions coupler_options;

  LayerStack build_stack() const { return build_vertical_stack(stack_params); }
};

/// Reads a device from config sections [materials], [stack], [ridge],
/// [coupler], [coupler.model]. Missing keys fall back to the canonical
/// device values.
inline Device device_from_config(const Config& cfg) {
  Device d;
  StackParams& p = d.stack_params;
  auto material = [&](const char* key, const char* table_key, const Material& fallback) {
    if (cfg.has("materials", table_key))
      return Material::from_table_csv(key, cfg.get_string("materials", table_key));
    if (cfg.has("materials", key)) {
      const auto n = cfg.get_complex("materials", key);
      return Material(key, n);
    }
    return fallback;
  };
  p.core = material("core", "core_table", p.core);
  p.cladding = material("cladding", "cladding_table", p.cladding);
  p.ambient = material("ambient", "ambient_table", p.ambient);
  p.substrate = material("substrate", "substrate_table", p.substrate);
  p.center_wl_nm = cfg.get_double("stack", "center_wavelength_nm", p.center_wl_nm);
  p.core_thickness_nm = cfg.get_double("stack", "core_thickness_nm", p.core_thickness_nm);
  p.top_pairs = static_cast<int>(cfg.get_int("stack", "top_pairs", p.top_pairs));
  p.bottom_pairs = static_cast<int>(cfg.get_int("stack", "bottom_pairs", p.bottom_pairs));

  d.ridge.ridge_width_um = cfg.get_double("ridge", "width_um", d.ridge.ridge_width_um);
  d.ridge.core_thickness_nm = p.core_thickness_nm;
  d.ridge.etch_stop_layer =
      static_cast<int>(cfg.get_int("ridge", "etch_stop_layer", d.ridge.etch_stop_layer));
  d.ridge.sidewall_angle_deg =
      cfg.get_double("ridge", "sidewall_angle_deg", d.ridge.sidewall_angle_deg);
  d.ridge.validate();

  d.coupler.coupler_length_um = cfg.get_double("coupler", "length_um", d.coupler.coupler_length_um);
  d.coupler.gap_um = cfg.get_double("coupler", "gap_um", d.coupler.gap_um);
  d.coupler.bend_separation_um =
      cfg.get_double("coupler", "bend_separation_um", d.coupler.bend_separation_um);
  d.coupler.bend_length_um = cfg.get_double("coupler", "bend_length_um", d.coupler.bend_length_um);
  d.coupler.validate();

  d.coupler_options.lateral_index_step = cfg.get_double(
      "coupler.model", "lateral_index_step", d.coupler_options.lateral_index_step);

  return d;
}

}  // namespace wgbs
