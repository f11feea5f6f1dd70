#pragma once

#include <algorithm>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "wgbs/csv.hpp"
#include "wgbs/error.hpp"

namespace wgbs {

/// Optical material: a label plus a dispersion model, either a constant
/// complex index or a tabulated (wavelength -> n + ik) curve with linear
/// interpolation. k >= 0 (absorbing or lossless only).
class Material {
 public:
  Material(std::string name, double n) : Material(std::move(name), std::complex<double>(n, 0)) {}

  Material(std::string name, std::complex<double> n) : name_(std::move(name)), constant_(n) {
    validate_index(constant_);
  }

  Material(std::string name, std::vector<double> wavelength_nm,
           std::vector<std::complex<double>> n)
      : name_(std::move(name)),
        table_wl_(std::move(wavelength_nm)),
        table_n_(std::move(n)) {
    if (table_wl_.size() != table_n_.size() || table_wl_.empty())
      throw domain_error("material '" + name_ + "': table shape mismatch");
    for (std::size_t i = 0; i < table_wl_.size(); ++i) {
      if (!(table_wl_[i] > 0))
        throw domain_error("material '" + name_ + "': non-positive wavelength in table");
      if (i > 0 && !(table_wl_[i] > table_wl_[i - 1]))
        throw domain_error("material '" + name_ + "': wavelengths must be strictly increasing");
      validate_index(table_n_[i]);
    }
  }

  /// Loads a table csv with columns wavelength_nm, n[, k].
  static Material from_table_csv(std::string name, const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto wl = t.column("wavelength_nm");
    const auto n = t.column("n");
    std::vector<std::complex<double>> idx(wl.size());
    if (std::find(t.header.begin(), t.header.end(), "k") != t.header.end()) {
      const auto k = t.column("k");
      for (std::size_t i = 0; i < wl.size(); ++i) idx[i] = {n[i], k[i]};
    } else {
      for (std::size_t i = 0; i < wl.size(); ++i) idx[i] = {n[i], 0.0};
    }
    return Material(std::move(name), wl, std::move(idx));
  }

  const std::string& name() const { return name_; }
  bool tabulated() const { return !table_wl_.empty(); }

  std::complex<double> index(double wavelength_nm) const {
    if (!(wavelength_nm > 0))
      throw domain_error("material '" + name_ + "': wavelength must be positive");
    if (table_wl_.empty()) return constant_;
    if (wavelength_nm < table_wl_.front() || wavelength_nm > table_wl_.back())
      throw domain_error("material '" + name_ + "': wavelength " +
                         std::to_string(wavelength_nm) + " nm outside table range");
    const auto it = std::lower_bound(table_wl_.begin(), table_wl_.end(), wavelength_nm);
    const std::size_t hi = static_cast<std::size_t>(it - table_wl_.begin());
    if (hi == 0 || table_wl_[hi] == wavelength_nm) return table_n_[hi];
    const std::size_t lo = hi - 1;
    const double f = (wavelength_nm - table_wl_[lo]) / (table_wl_[hi] - table_wl_[lo]);
    return table_n_[lo] + f * (table_n_[hi] - table_n_[lo]);
  }

  double real_index(double wavelength_nm) const { return index(wavelength_nm).real(); }

 private:
  void validate_index(std::complex<double> n) const {
    if (!(n.real() >= 1.0))
      throw domain_error("material '" + name_ + "': real index must be >= 1");
    if (!(n.imag() >= 0.0))
      throw domain_error("material '" + name_ + "': negative extinction not supported");
  }

  std::string name_;
  std::complex<double> constant_{1.0, 0.0};
  std::vector<double> table_wl_;
  std::vector<std::complex<double>> table_n_;
};

}  // namespace wgbs
