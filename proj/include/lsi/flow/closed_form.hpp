#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "lsi/flow/potential.hpp"
#include "lsi/lattice/schedule.hpp"

namespace lsi::flow {

/// Exact flow of V_0 = ½ φᵀKφ: V_t = ½ φᵀ K(1 + C_t K)⁻¹ φ + ½ log det(1 + C_t K).
class QuadraticFlow {
 public:
  QuadraticFlow(Matrix k, const lattice::CovarianceSchedule& schedule) : k_(std::move(k)), schedule_(&schedule) {}

  Matrix hessian(double t) const {
    const Matrix c = schedule_->C(t);
    const int n = static_cast<int>(k_.rows());
    Matrix h = k_ * (Matrix::Identity(n, n) + c * k_).inverse();
    return 0.5 * (h + h.transpose());
  }
  Vector gradient(double t, const Vector& phi) const { return hessian(t) * phi; }
  double value(double t, const Vector& phi) const {
    const Matrix c = schedule_->C(t);
    const int n = static_cast<int>(k_.rows());
    const double logdet = std::log((Matrix::Identity(n, n) + c * k_).determinant());
    return 0.5 * phi.dot(hessian(t) * phi) + 0.5 * logdet;
  }

 private:
  Matrix k_;
  const lattice::CovarianceSchedule* schedule_;
};

}  // namespace lsi::flow
