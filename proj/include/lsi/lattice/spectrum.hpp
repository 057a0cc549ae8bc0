#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "lsi/lattice/torus.hpp"

namespace lsi::lattice {

/// Real Fourier analysis on the torus. Every kernel handled here is a
/// function of the displacement that is even in each coordinate, so the
/// cosine basis cos(k1 d1) cos(k2 d2) diagonalises it. Modes and
/// displacements share the site indexing j1 + side * j2.
class TorusSpectrum {
 public:
  explicit TorusSpectrum(const Torus& torus) : side_(torus.side()) {
    cos_ = Eigen::MatrixXd(side_, side_);
    for (int j = 0; j < side_; ++j) {
      for (int d = 0; d < side_; ++d) {
        cos_(j, d) = std::cos(2.0 * std::numbers::pi * j * d / side_);
      }
    }
    laplacian_ = Eigen::VectorXd(side_ * side_);
    for (int j2 = 0; j2 < side_; ++j2) {
      for (int j1 = 0; j1 < side_; ++j1) {
        laplacian_(j1 + side_ * j2) = (2.0 - 2.0 * cos_(j1, 1)) + (2.0 - 2.0 * cos_(j2, 1));
      }
    }
  }

  int side() const { return side_; }
  int size() const { return side_ * side_; }

  /// Eigenvalues of -Δ indexed by mode; mode 0 is the constant.
  const Eigen::VectorXd& laplacian_eigenvalues() const { return laplacian_; }

  /// Smallest nonzero eigenvalue of -Δ.
  double laplacian_gap() const { return 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / side_); }

  /// K(d) = (1/n) Σ_k cos(k1 d1) cos(k2 d2) g_k.
  Eigen::VectorXd synthesize(const Eigen::VectorXd& g) const {
    Eigen::Map<const Eigen::MatrixXd> modes(g.data(), side_, side_);
    Eigen::MatrixXd out = cos_ * modes * cos_ / static_cast<double>(size());
    return Eigen::Map<Eigen::VectorXd>(out.data(), size());
  }

  /// f̂_k = Σ_d cos(k1 d1) cos(k2 d2) f(d).
  Eigen::VectorXd analyze(const Eigen::VectorXd& f) const {
    Eigen::Map<const Eigen::MatrixXd> table(f.data(), side_, side_);
    Eigen::MatrixXd out = cos_ * table * cos_;
    return Eigen::Map<Eigen::VectorXd>(out.data(), size());
  }

  /// Single displacement value of the synthesis.
  double synthesize_at(const Eigen::VectorXd& g, int d) const {
    const int d1 = d % side_;
    const int d2 = d / side_;
    double acc = 0.0;
    for (int j2 = 0; j2 < side_; ++j2) {
      double row = 0.0;
      for (int j1 = 0; j1 < side_; ++j1) {
        row += cos_(j1, d1) * g(j1 + side_ * j2);
      }
      acc += row * cos_(j2, d2);
    }
    return acc / size();
  }

  /// Dense matrix M(x, y) = table(x - y).
  Eigen::MatrixXd circulant(const Eigen::VectorXd& table, const Torus& torus) const {
    const int n = size();
    Eigen::MatrixXd out(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        out(x, y) = table(torus.displacement(x, y));
      }
    }
    return out;
  }

 private:
  int side_;
  Eigen::MatrixXd cos_;
  Eigen::VectorXd laplacian_;
};

}  // namespace lsi::lattice
