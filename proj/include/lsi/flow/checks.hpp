#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lsi/flow/evaluator.hpp"

namespace lsi::flow {

struct DerivativeResiduals {
  double gradient = 0.0;
  double hessian = 0.0;
};

/// Residuals of (f,∇V_t) = P_{s,t}(f,∇V_s) and of the Hessian relation with its
/// variance correction. The left sides use the direct s = 0 route.
inline DerivativeResiduals derivative_relation_check(const FlowEvaluator& flow, double s, double t, const Vector& f,
                                                     const Vector& phi) {
  if (!(s <= t)) {
    throw std::invalid_argument("derivative relation needs s <= t");
  }
  if (s == t) {
    return {};
  }
  const double lhs_grad = f.dot(flow.gradient(t, phi).value);
  const double lhs_hess = f.dot(flow.hessian(t, phi).value * f);
  const Cloud c = flow.cloud(s, t, phi);
  double p_grad = 0.0;
  double p_grad_sq = 0.0;
  double p_hess = 0.0;
  for (Eigen::Index i = 0; i < c.points.cols(); ++i) {
    const Vector x = c.points.col(i);
    const double w = c.weights(i);
    const double g = f.dot(flow.gradient_at(s, x));
    p_grad += w * g;
    p_grad_sq += w * g * g;
    p_hess += w * f.dot(flow.hessian_at(s, x) * f);
  }
  DerivativeResiduals out;
  out.gradient = std::abs(lhs_grad - p_grad);
  out.hessian = std::abs(lhs_hess - (p_hess - (p_grad_sq - p_grad * p_grad)));
  return out;
}

namespace detail {

constexpr std::array<std::pair<int, double>, 4> kFirstStencil{{{1, 8.0}, {-1, -8.0}, {2, -1.0}, {-2, 1.0}}};

template <class G>
Vector fd_gradient(G&& g, const Vector& phi, double h) {
  Vector out = Vector::Zero(phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    for (const auto& [k, c] : kFirstStencil) {
      Vector x = phi;
      x(i) += k * h;
      out(i) += c * g(x);
    }
  }
  return out / (12.0 * h);
}

template <class G>
Matrix fd_hessian(G&& g, const Vector& phi, double h) {
  const Eigen::Index n = phi.size();
  Matrix out = Matrix::Zero(n, n);
  const double centre = g(phi);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = -30.0 * centre;
    for (int k : {1, -1}) {
      Vector x = phi;
      x(i) += k * h;
      acc += 16.0 * g(x);
      x(i) += k * h;
      acc -= g(x);
    }
    out(i, i) = acc / (12.0 * h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double mixed = 0.0;
      for (const auto& [a, ca] : kFirstStencil) {
        for (const auto& [b, cb] : kFirstStencil) {
          Vector x = phi;
          x(i) += a * h;
          x(j) += b * h;
          mixed += ca * cb * g(x);
        }
      }
      out(i, j) = out(j, i) = mixed / (144.0 * h * h);
    }
  }
  return out;
}

/// Jacobian of a vector field by the fourth-order stencil.
template <class G>
Matrix fd_jacobian(G&& g, const Vector& phi, double h) {
  const Eigen::Index n = phi.size();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& [k, c] : kFirstStencil) {
      Vector x = phi;
      x(i) += k * h;
      out.col(i) += c * g(x);
    }
  }
  out /= 12.0 * h;
  return 0.5 * (out + out.transpose());
}

inline Matrix sym_sqrt(const Matrix& q) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (q + q.transpose()));
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace detail

struct CommutationReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double second_derivative_term = 0.0;
  double time_step = 0.0;
  double space_step = 0.0;
};

/// (L_t - ∂_t)(∇√F_t)²_Q against 2(∇√F_t, He V_t Ċ_t ∇√F_t)_Q + ¼ F_t |Ċ_t^{1/2}(He log F_t)Q^{1/2}|²
/// with F_t = P_{0,t}F. When `q_follows_cdot` is set, Q = Ċ_τ moves with the scale and the
/// right side gains -(∇√F_t)²_{C̈_t}.
inline CommutationReport commutation_identity_check(const FlowEvaluator& flow, double t, const Matrix& q,
                                                    const Observable& f, const VectorObservable& grad_f,
                                                    const Vector& phi, bool q_follows_cdot = false,
                                                    double h = 2e-3) {
  const int n = flow.dimension();
  if (!flow.method().is_quadrature() || n > 3) {
    throw std::invalid_argument("commutation identity check needs quadrature and N <= 3");
  }
  const auto& sched = flow.schedule();
  {
    const Cloud c = flow.cloud(0.0, std::max(t, 1e-12), phi);
    for (Eigen::Index i = 0; i < c.points.cols(); ++i) {
      if (!(f(c.points.col(i)) > 0.0)) {
        throw std::invalid_argument("observable must be strictly positive");
      }
    }
  }
  const double dt = FlowEvaluator::default_time_step(t);
  if (!(t > dt)) {
    throw std::invalid_argument("commutation identity check needs t > dt");
  }
  auto form = [&](double tau) { return q_follows_cdot ? sched.Cdot(tau) : q; };
  auto g = [&](double tau, const Vector& x) {
    const auto ft = flow.flowed(tau, f, grad_f, x);
    return ft.gradient.dot(form(tau) * ft.gradient) / (4.0 * ft.value);
  };
  auto g_now = [&](const Vector& x) { return g(t, x); };
  const Matrix cdot = sched.Cdot(t);
  const Vector grad_v = flow.gradient(t, phi).value;
  const Matrix hess_v = flow.hessian(t, phi).value;
  const Vector grad_g = detail::fd_gradient(g_now, phi, h);
  const Matrix hess_g = detail::fd_hessian(g_now, phi, h);
  const double generator = 0.5 * (cdot.array() * hess_g.array()).sum() - grad_v.dot(cdot * grad_g);
  const double time_derivative = (g(t + dt, phi) - g(t - dt, phi)) / (2.0 * dt);

  const auto ft = flow.flowed(t, f, grad_f, phi);
  const Matrix hess_f =
      detail::fd_jacobian([&](const Vector& x) { return flow.flowed(t, f, grad_f, x).gradient; }, phi, h);
  const Matrix hess_log = hess_f / ft.value - ft.gradient * ft.gradient.transpose() / (ft.value * ft.value);
  const Vector grad_sqrt = ft.gradient / (2.0 * std::sqrt(ft.value));
  const Matrix qt = form(t);
  const Matrix frob = detail::sym_sqrt(cdot) * hess_log * detail::sym_sqrt(qt);

  CommutationReport out;
  out.time_step = dt;
  out.space_step = h;
  out.lhs = generator - time_derivative;
  out.rhs = 2.0 * grad_sqrt.dot(qt * hess_v * cdot * grad_sqrt) + 0.25 * ft.value * frob.squaredNorm();
  if (q_follows_cdot) {
    out.second_derivative_term = -grad_sqrt.dot(sched.Cddot(t) * grad_sqrt);
    out.rhs += out.second_derivative_term;
  }
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

struct EntropyDecomposition {
  double left = 0.0;
  double right = 0.0;
  double gap = 0.0;
  double tail = 0.0;
  std::vector<double> grid;
  std::vector<double> integrand;
  std::vector<double> entropy_along;
  bool monotone = true;
};

/// Ent_{ν_0}(F) against 2∫₀^∞ E_{ν_t}(∇√F_t)²_{Ċ_t} dt. The integrand is interpolated
/// log-linearly between grid points and the tail past the grid is exponential.
inline EntropyDecomposition entropy_decomposition(const FlowEvaluator& flow, const Observable& f,
                                                  const VectorObservable& grad_f, std::vector<double> t_grid) {
  if (!flow.method().is_quadrature()) {
    throw std::invalid_argument("entropy decomposition needs the quadrature method");
  }
  if (t_grid.size() < 2) {
    throw std::invalid_argument("entropy decomposition needs at least two grid points");
  }
  if (t_grid.front() != 0.0) {
    t_grid.insert(t_grid.begin(), 0.0);
  }
  const auto& sched = flow.schedule();
  const int n = flow.dimension();
  auto phi_log = [](double x) { return x * std::log(x); };

  EntropyDecomposition out;
  out.grid = t_grid;
  {
    const Cloud c = flow.cloud(0.0, kInfinity, Vector::Zero(n));
    double ef = 0.0;
    double eflogf = 0.0;
    for (Eigen::Index i = 0; i < c.points.cols(); ++i) {
      const double v = f(c.points.col(i));
      if (!(v > 0.0)) {
        throw std::invalid_argument("observable must be strictly positive");
      }
      ef += c.weights(i) * v;
      eflogf += c.weights(i) * phi_log(v);
    }
    out.left = eflogf - phi_log(ef);
  }
  for (double t : t_grid) {
    const GaussianRule& outer = flow.rule(t, kInfinity);
    const Matrix cdot = sched.Cdot(t);
    const Eigen::Index m = outer.size();
    Vector logw(m);
    Vector dissipation(m);
    Vector entropy(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector x = outer.points.col(i);
      const auto ft = flow.flowed(t, f, grad_f, x);
      logw(i) = outer.log_weights(i) - ft.potential;
      dissipation(i) = ft.gradient.dot(cdot * ft.gradient) / (4.0 * ft.value);
      entropy(i) = phi_log(ft.value);
    }
    const Vector w = (logw.array() - logw.maxCoeff()).exp();
    const Vector weights = w / w.sum();
    out.integrand.push_back(weights.dot(dissipation));
    out.entropy_along.push_back(weights.dot(entropy));
  }
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k) {
    const double a = out.integrand[k];
    const double b = out.integrand[k + 1];
    const double width = t_grid[k + 1] - t_grid[k];
    if (a > 0.0 && b > 0.0 && std::abs(a - b) > 1e-12 * std::max(a, b)) {
      integral += width * (b - a) / std::log(b / a);
    } else {
      integral += 0.5 * width * (a + b);
    }
    if (out.entropy_along[k + 1] > out.entropy_along[k] + 1e-8) {
      out.monotone = false;
    }
  }
  const std::size_t last = t_grid.size() - 1;
  const double f_last = out.integrand[last];
  if (f_last > 0.0) {
    const double f_prev = out.integrand[last - 1];
    const double rate = std::log(f_prev / f_last) / (t_grid[last] - t_grid[last - 1]);
    if (!(rate > 0.0)) {
      throw std::runtime_error("grid too short: integrand is not decaying at the end of the grid");
    }
    out.tail = f_last / rate;
  }
  out.right = 2.0 * (integral + out.tail);
  if (2.0 * out.tail > 0.05 * out.right) {
    throw std::runtime_error("grid too short: tail estimate exceeds 5% of the scale integral");
  }
  out.gap = std::abs(out.left - out.right);
  return out;
}

}  // namespace lsi::flow
