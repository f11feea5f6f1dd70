#pragma once

#include <stdexcept>
#include <string>

namespace wgbs {

/// Raised when a config file is malformed, has unknown keys, or fails validation.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an operation is called with arguments outside its domain
/// (negative thickness, position outside a bend, detector with no samples, ...).
class domain_error : public std::runtime_error {
 public:
  explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numerical procedure fails: divergent field update,
/// non-bracketed root, insufficient statistics, non-convergent quadrature.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wgbs
