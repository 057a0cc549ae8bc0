#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lsi/errors.hpp"
#include "lsi/lattice/torus.hpp"

namespace lsi::sine_gordon {

constexpr double kPi = std::numbers::pi;
constexpr double kCertifiedBetaMax = 6.0 * kPi;
constexpr double kEngineBetaMax = 8.0 * kPi;

struct SineGordonParams {
  double beta = 4.0 * kPi;
  double z = 0.0;
  double mass = 1.0;
  double mesh = 1.0;
  double side = 8.0;  // physical side L
  double safety = 1.0;

  int sites_per_axis() const { return static_cast<int>(std::lround(side / mesh)); }
  int sites() const { return sites_per_axis() * sites_per_axis(); }
  /// z_0 = ε^{2-β/4π} z.
  double z0() const { return std::pow(mesh, 2.0 - beta / (4.0 * kPi)) * z; }
  /// |z| m^{-2+β/4π}, the dimensionless small-z parameter.
  double reduced_coupling() const { return std::abs(z) * std::pow(mass, -2.0 + beta / (4.0 * kPi)); }
  lattice::Torus torus() const { return lattice::Torus(sites_per_axis(), mesh, side); }

  void validate() const {
    if (!(beta > 0.0) || !(beta < kEngineBetaMax)) {
      throw std::invalid_argument("beta must lie in (0, 8pi)");
    }
    if (!(mass > 0.0) || !(mesh > 0.0) || !(side > 0.0)) {
      throw std::invalid_argument("mass, mesh and side must be positive");
    }
    if (!std::isfinite(z)) {
      throw std::invalid_argument("z must be finite");
    }
    if (!(safety >= 1.0)) {
      throw std::invalid_argument("safety factor must be at least 1");
    }
    const double ratio = side / mesh;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 2.0) {
      std::ostringstream msg;
      msg << "L/eps must be an integer >= 2, got " << ratio;
      throw std::invalid_argument(msg.str());
    }
  }

  void validate_for_certification() const {
    validate();
    if (!(beta < kCertifiedBetaMax)) {
      throw GateFailure("beta_range", "beta out of certified range (need beta < 6pi)");
    }
  }
};

/// Parses "4.5pi", "4.5*pi", "pi", or a plain number.
inline double parse_beta(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (c != ' ') {
      s += c;
    }
  }
  if (s.empty()) {
    throw std::invalid_argument("empty beta");
  }
  double factor = 1.0;
  for (const char* suffix : {"*pi", "pi", "π"}) {
    const std::string suf(suffix);
    if (s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      s.erase(s.size() - suf.size());
      factor = kPi;
      break;
    }
  }
  if (s.empty()) {
    return factor;
  }
  std::size_t used = 0;
  const double value = std::stod(s, &used);
  if (used != s.size()) {
    throw std::invalid_argument("cannot parse beta '" + text + "'");
  }
  return value * factor;
}

}  // namespace lsi::sine_gordon
