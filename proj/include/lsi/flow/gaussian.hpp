#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "lsi/numerics/quadrature.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::flow {

/// Spectral square root S of a PSD matrix K (K = S Sᵀ), keeping only
/// directions with eigenvalue above 1e-14 times the largest.
inline Eigen::MatrixXd psd_root(const Eigen::MatrixXd& k) {
  const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = ev.size() > 0 ? ev.maxCoeff() : 0.0;
  if (ev.size() > 0 && ev.minCoeff() < -1e-10 * std::max(1.0, top)) {
    throw std::invalid_argument("covariance is not positive semidefinite");
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (top > 0.0 && ev(i) > 1e-14 * top) {
      keep.push_back(i);
    }
  }
  Eigen::MatrixXd root(sym.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    root.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(keep[c]) * std::sqrt(ev(keep[c]));
  }
  return root;
}

/// Discrete approximation of N(0, K): points ζ_i (columns) with log base weights.
struct GaussianRule {
  Eigen::MatrixXd points;
  Eigen::VectorXd log_weights;
  bool monte_carlo = false;

  Eigen::Index size() const { return points.cols(); }
};

/// Tensor Gauss–Hermite rule along the range of K.
inline GaussianRule gaussian_quadrature(const Eigen::MatrixXd& k, int nodes_per_dim) {
  const Eigen::MatrixXd root = psd_root(k);
  const int rank = static_cast<int>(root.cols());
  const auto& rule = numerics::gauss_hermite(nodes_per_dim);
  Eigen::Index total = 1;
  for (int r = 0; r < rank; ++r) {
    total *= nodes_per_dim;
  }
  GaussianRule out;
  out.points = Eigen::MatrixXd::Zero(k.rows(), total);
  out.log_weights = Eigen::VectorXd::Zero(total);
  std::vector<int> digit(static_cast<std::size_t>(rank), 0);
  Eigen::VectorXd z(rank);
  for (Eigen::Index i = 0; i < total; ++i) {
    double lw = 0.0;
    for (int r = 0; r < rank; ++r) {
      z(r) = rule.nodes[static_cast<std::size_t>(digit[static_cast<std::size_t>(r)])];
      lw += std::log(rule.weights[static_cast<std::size_t>(digit[static_cast<std::size_t>(r)])]);
    }
    if (rank > 0) {
      out.points.col(i) = root * z;
    }
    out.log_weights(i) = lw;
    for (int r = 0; r < rank; ++r) {
      if (++digit[static_cast<std::size_t>(r)] < nodes_per_dim) {
        break;
      }
      digit[static_cast<std::size_t>(r)] = 0;
    }
  }
  return out;
}

/// Plain Monte Carlo sample of N(0, K) from a counter-based substream.
inline GaussianRule gaussian_sample(const Eigen::MatrixXd& k, long samples, std::uint64_t seed, std::uint64_t task) {
  const Eigen::MatrixXd root = psd_root(k);
  numerics::CounterRng rng(seed, task);
  std::normal_distribution<double> normal;
  GaussianRule out;
  out.monte_carlo = true;
  out.points = Eigen::MatrixXd::Zero(k.rows(), samples);
  out.log_weights = Eigen::VectorXd::Constant(samples, -std::log(static_cast<double>(samples)));
  Eigen::VectorXd z(root.cols());
  for (long i = 0; i < samples; ++i) {
    for (Eigen::Index r = 0; r < z.size(); ++r) {
      z(r) = normal(rng);
    }
    if (z.size() > 0) {
      out.points.col(i) = root * z;
    }
  }
  return out;
}

}  // namespace lsi::flow
