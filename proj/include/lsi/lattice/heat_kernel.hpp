#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include "lsi/lattice/spectrum.hpp"
#include "lsi/lattice/torus.hpp"
#include "lsi/numerics/bessel.hpp"

namespace lsi::lattice {

enum class KernelFlavor { infinite_plane, torus, torus_mean_zero };

inline const char* to_string(KernelFlavor f) {
  switch (f) {
    case KernelFlavor::infinite_plane:
      return "infinite_plane";
    case KernelFlavor::torus:
      return "torus";
    case KernelFlavor::torus_mean_zero:
      return "torus_mean_zero";
  }
  return "unknown";
}

/// p_t(x) = e^{-4t} I_{x1}(2t) I_{x2}(2t) for the walk generated by Δ on Z².
inline double infinite_heat_kernel(int x1, int x2, double t) {
  if (t < 0.0) {
    throw std::invalid_argument("heat kernel time must be nonnegative");
  }
  return numerics::scaled_bessel_i(x1, 2.0 * t) * numerics::scaled_bessel_i(x2, 2.0 * t);
}

/// Same kernel from its Fourier integral (2π)^{-2} ∫ cos(k·x) e^{-t Σ(2-2cos k_j)} dk,
/// evaluated with the periodic trapezoid rule on an M×M grid.
inline double infinite_heat_kernel_fourier(int x1, int x2, double t, int points = 0) {
  if (t < 0.0) {
    throw std::invalid_argument("heat kernel time must be nonnegative");
  }
  if (points <= 0) {
    const int reach = std::max(std::abs(x1), std::abs(x2));
    points = 2 * (reach + static_cast<int>(std::ceil(12.0 * std::sqrt(2.0 * t + 1.0))) + 40);
  }
  const double h = 2.0 * std::numbers::pi / points;
  double total = 0.0;
  for (int a = 0; a < points; ++a) {
    const double k1 = -std::numbers::pi + a * h;
    const double row_weight = std::cos(k1 * x1) * std::exp(-t * (2.0 - 2.0 * std::cos(k1)));
    double row = 0.0;
    for (int b = 0; b < points; ++b) {
      const double k2 = -std::numbers::pi + b * h;
      row += std::cos(k2 * x2) * std::exp(-t * (2.0 - 2.0 * std::cos(k2)));
    }
    total += row_weight * row;
  }
  return total / (static_cast<double>(points) * points);
}

struct HeatKernelTable {
  KernelFlavor flavor = KernelFlavor::torus;
  int side_sites = 0;
  double t = 0.0;
  Eigen::VectorXd values;  // indexed by displacement

  double at(int d) const { return values(d); }
};

/// p_t^L = e^{tΔ_Λ}(0, ·), evaluated in the eigenbasis of Δ_Λ.
inline HeatKernelTable torus_heat_kernel(const Torus& torus, double t,
                                         KernelFlavor flavor = KernelFlavor::torus) {
  if (t < 0.0) {
    throw std::invalid_argument("heat kernel time must be nonnegative");
  }
  if (flavor == KernelFlavor::infinite_plane) {
    throw std::invalid_argument("torus_heat_kernel builds torus flavors only");
  }
  TorusSpectrum spectrum(torus);
  Eigen::VectorXd modes = (-t * spectrum.laplacian_eigenvalues().array()).exp();
  HeatKernelTable out{flavor, torus.side(), t, spectrum.synthesize(modes)};
  if (flavor == KernelFlavor::torus_mean_zero) {
    out.values.array() -= 1.0 / torus.size();
  }
  return out;
}

/// Σ_y p_t(x + side·y) over periodic images, truncated once images are negligible.
inline HeatKernelTable torus_heat_kernel_images(const Torus& torus, double t) {
  const int side = torus.side();
  const int reach = 2 + static_cast<int>(std::ceil((10.0 * std::sqrt(2.0 * t + 1.0) + 20.0) / side));
  Eigen::VectorXd values = Eigen::VectorXd::Zero(torus.size());
  for (int d = 0; d < torus.size(); ++d) {
    const auto c = torus.coords(d);
    double s1 = 0.0;
    double s2 = 0.0;
    for (int y = -reach; y <= reach; ++y) {
      s1 += numerics::scaled_bessel_i(c[0] + side * y, 2.0 * t);
      s2 += numerics::scaled_bessel_i(c[1] + side * y, 2.0 * t);
    }
    values(d) = s1 * s2;
  }
  return HeatKernelTable{KernelFlavor::torus, side, t, values};
}

}  // namespace lsi::lattice
