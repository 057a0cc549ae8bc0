#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "lsi/errors.hpp"

namespace lsi::numerics {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub–Welsch: nodes are eigenvalues of the Jacobi matrix, weights come from
// the first eigenvector components scaled by the total mass.
inline Rule golub_welsch(const Eigen::VectorXd& off_diagonal, double mass) {
  const auto n = off_diagonal.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    jacobi(k, k + 1) = off_diagonal(k);
    jacobi(k + 1, k) = off_diagonal(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  Rule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double v0 = solver.eigenvectors()(0, k);
    rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()(k);
    rule.weights[static_cast<std::size_t>(k)] = mass * v0 * v0;
  }
  return rule;
}

template <class Build>
const Rule& cached_rule(std::map<int, Rule>& cache, std::mutex& mutex, int n, Build&& build) {
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, build(n)).first;
  }
  return it->second;
}

}  // namespace detail

/// Gauss–Hermite rule for the standard normal density (weights sum to 1).
inline const Rule& gauss_hermite(int n) {
  static std::map<int, Rule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, n, [](int m) {
    if (m == 1) {
      return Rule{{0.0}, {1.0}};
    }
    Eigen::VectorXd off(m - 1);
    for (int k = 1; k < m; ++k) {
      off(k - 1) = std::sqrt(static_cast<double>(k));
    }
    return detail::golub_welsch(off, 1.0);
  });
}

/// Gauss–Legendre rule on [-1, 1].
inline const Rule& gauss_legendre(int n) {
  static std::map<int, Rule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, n, [](int m) {
    if (m == 1) {
      return Rule{{0.0}, {2.0}};
    }
    Eigen::VectorXd off(m - 1);
    for (int k = 1; k < m; ++k) {
      const double kk = static_cast<double>(k);
      off(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
    }
    return detail::golub_welsch(off, 2.0);
  });
}

/// Composite Gauss–Legendre with equal panels.
template <class F>
double integrate_panels(F&& f, double a, double b, int panels, int order = 8) {
  const Rule& rule = gauss_legendre(order);
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    double panel = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      panel += rule.weights[k] * f(mid + 0.5 * h * rule.nodes[k]);
    }
    total += 0.5 * h * panel;
  }
  return total;
}

struct AdaptiveResult {
  double value = 0.0;
  double previous = 0.0;
  int nodes = 0;
};

/// Doubles the panel count until the relative change drops below `rel_tol`.
/// Throws QuadratureFailure (with the last two values) when the node cap is hit.
template <class F>
AdaptiveResult integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-7,
                                  int max_nodes = 1 << 14, int order = 8, double abs_floor = 0.0) {
  AdaptiveResult result;
  if (b <= a) {
    return result;
  }
  int panels = 1;
  result.value = integrate_panels(f, a, b, panels, order);
  result.nodes = order;
  while (true) {
    panels *= 2;
    if (panels * order > max_nodes) {
      throw QuadratureFailure("adaptive quadrature did not converge", result.value, result.previous);
    }
    result.previous = result.value;
    result.value = integrate_panels(f, a, b, panels, order);
    result.nodes = panels * order;
    const double change = std::abs(result.value - result.previous);
    if (change <= rel_tol * std::abs(result.value) || change <= abs_floor) {
      return result;
    }
  }
}

}  // namespace lsi::numerics
