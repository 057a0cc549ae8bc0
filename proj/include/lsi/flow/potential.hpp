#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace lsi::flow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A potential V_0 on R^N with value, gradient and Hessian evaluators.
struct PotentialModel {
  std::string name;
  int dimension = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  bool smooth = true;
  bool convex = false;
  std::optional<Vector> period;

  double operator()(const Vector& phi) const { return value(phi); }
};

inline void require_dimension(const PotentialModel& model, const Vector& phi) {
  if (phi.size() != model.dimension) {
    throw std::invalid_argument("field has dimension " + std::to_string(phi.size()) + ", model expects " +
                                std::to_string(model.dimension));
  }
}

inline PotentialModel zero_potential(int n) {
  return PotentialModel{"zero",
                        n,
                        [](const Vector&) { return 0.0; },
                        [n](const Vector&) { return Vector::Zero(n).eval(); },
                        [n](const Vector&) { return Matrix::Zero(n, n).eval(); },
                        true,
                        true,
                        std::nullopt};
}

/// V_0(φ) = ½ φᵀ K φ for a symmetric K.
inline PotentialModel quadratic_potential(const Matrix& k) {
  const Matrix sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const bool convex = eig.eigenvalues().minCoeff() >= 0.0;
  return PotentialModel{"quadratic",
                        static_cast<int>(sym.rows()),
                        [sym](const Vector& phi) { return 0.5 * phi.dot(sym * phi); },
                        [sym](const Vector& phi) { return (sym * phi).eval(); },
                        [sym](const Vector&) { return sym; },
                        true,
                        convex,
                        std::nullopt};
}

/// V_0(φ) = Σ_x (a/4 φ_x⁴ - b/2 φ_x²).
inline PotentialModel double_well_potential(int n, double a, double b) {
  return PotentialModel{"double_well",
                        n,
                        [a, b](const Vector& phi) {
                          double v = 0.0;
                          for (Eigen::Index i = 0; i < phi.size(); ++i) {
                            const double p2 = phi(i) * phi(i);
                            v += 0.25 * a * p2 * p2 - 0.5 * b * p2;
                          }
                          return v;
                        },
                        [a, b](const Vector& phi) {
                          return (a * phi.array().cube() - b * phi.array()).matrix().eval();
                        },
                        [a, b](const Vector& phi) {
                          return Matrix((3.0 * a * phi.array().square() - b).matrix().asDiagonal());
                        },
                        true,
                        b <= 0.0,
                        std::nullopt};
}

/// V_0(φ) = Σ_x (c/2 φ_x² + g/4 φ_x⁴) with c, g ≥ 0: a convex quadratic-plus-quartic potential.
inline PotentialModel convex_quartic_potential(int n, double c, double g) {
  if (c < 0.0 || g < 0.0) {
    throw std::invalid_argument("convex quartic potential needs nonnegative coefficients");
  }
  PotentialModel model = double_well_potential(n, g, -c);
  model.name = "convex_quartic";
  model.convex = true;
  return model;
}

/// V_0(φ) = Σ_x amplitude · cos(√β φ_x).
inline PotentialModel cosine_potential(int n, double beta, double amplitude) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("beta must be positive");
  }
  const double k = std::sqrt(beta);
  return PotentialModel{"sine_gordon",
                        n,
                        [k, amplitude](const Vector& phi) { return amplitude * (k * phi.array()).cos().sum(); },
                        [k, amplitude](const Vector& phi) {
                          return (-k * amplitude * (k * phi.array()).sin()).matrix().eval();
                        },
                        [k, amplitude](const Vector& phi) {
                          return Matrix((-k * k * amplitude * (k * phi.array()).cos()).matrix().asDiagonal());
                        },
                        true,
                        amplitude == 0.0,
                        Vector::Constant(n, 2.0 * std::numbers::pi / k)};
}

struct DerivativeCheck {
  double gradient_error = 0.0;
  double hessian_error = 0.0;
  double asymmetry = 0.0;
};

/// Worst relative mismatch between the analytic derivatives and central finite differences.
template <class Sampler>
DerivativeCheck check_derivatives(const PotentialModel& model, Sampler&& sample, int points = 20, double h = 1e-5) {
  DerivativeCheck out;
  const int n = model.dimension;
  for (int p = 0; p < points; ++p) {
    const Vector phi = sample();
    const Vector g = model.gradient(phi);
    const Matrix hess = model.hessian(phi);
    const double gscale = std::max(1.0, g.cwiseAbs().maxCoeff());
    const double hscale = std::max(1.0, hess.cwiseAbs().maxCoeff());
    out.asymmetry = std::max(out.asymmetry, (hess - hess.transpose()).cwiseAbs().maxCoeff() / hscale);
    for (int i = 0; i < n; ++i) {
      Vector up = phi;
      Vector down = phi;
      up(i) += h;
      down(i) -= h;
      const double fd = (model.value(up) - model.value(down)) / (2.0 * h);
      out.gradient_error = std::max(out.gradient_error, std::abs(fd - g(i)) / gscale);
      const Vector gd = (model.gradient(up) - model.gradient(down)) / (2.0 * h);
      out.hessian_error = std::max(out.hessian_error, (gd - hess.col(i)).cwiseAbs().maxCoeff() / hscale);
    }
  }
  return out;
}

}  // namespace lsi::flow
