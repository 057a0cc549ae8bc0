#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>

#include "lsi/lattice/torus.hpp"

namespace lsi::lattice {

enum class OperatorKind { laplacian, A, projector, heat, covariance };

/// Dense symmetric operator over sites. Operators built on a torus remember
/// it, together with the mass term ε²m² for A.
struct LatticeOperator {
  Eigen::MatrixXd matrix;
  OperatorKind kind = OperatorKind::covariance;
  std::optional<Torus> torus;
  double mass = 0.0;
  double mass_term = 0.0;
};

/// Unit lattice Laplacian Δ_Λ (diagonal -4, neighbours summed with multiplicity).
inline Eigen::MatrixXd laplacian_matrix(const Torus& torus) {
  const int n = torus.size();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    for (int y : torus.neighbours(x)) {
      lap(x, y) += 1.0;
      lap(x, x) -= 1.0;
    }
  }
  return lap;
}

inline LatticeOperator build_laplacian(const Torus& torus) {
  return LatticeOperator{laplacian_matrix(torus), OperatorKind::laplacian, torus, 0.0, 0.0};
}

/// A = -Δ_Λ + ε²m².
inline LatticeOperator build_operator_A(const Torus& torus, double mass, double mesh) {
  if (!(mass > 0.0)) {
    throw std::invalid_argument("mass must be positive (massless case unsupported)");
  }
  if (mesh != torus.mesh()) {
    throw std::invalid_argument("mesh does not match the torus");
  }
  const double term = mesh * mesh * mass * mass;
  Eigen::MatrixXd a = -laplacian_matrix(torus);
  a.diagonal().array() += term;
  return LatticeOperator{std::move(a), OperatorKind::A, torus, mass, term};
}

inline LatticeOperator build_operator_A(const Torus& torus, double mass) {
  return build_operator_A(torus, mass, torus.mesh());
}

/// Orthogonal projector onto mean-zero fields.
inline Eigen::MatrixXd mean_zero_projector(int n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
}

}  // namespace lsi::lattice
