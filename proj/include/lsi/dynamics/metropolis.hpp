#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "lsi/flow/potential.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::dynamics {

struct MetropolisOptions {
  int chains = 4;
  long sweeps = 20000;
  long burn_in = 2000;
  int thinning = 5;
  double step = 1.0;
  std::uint64_t seed = 1;
};

struct MetropolisResult {
  Eigen::MatrixXd samples;  // one row per retained sweep, chains concatenated
  double acceptance = 0.0;
  long per_chain = 0;
};

/// Single-site random-walk Metropolis for the density ∝ exp(-½ φᵀAφ - V_0(φ)).
inline MetropolisResult metropolis_sample(const Eigen::MatrixXd& a, const flow::PotentialModel& v0,
                                          const MetropolisOptions& options) {
  const int n = static_cast<int>(a.rows());
  if (v0.dimension != n) {
    throw std::invalid_argument("potential and operator dimensions differ");
  }
  if (options.chains < 1 || options.sweeps <= options.burn_in || options.thinning < 1) {
    throw std::invalid_argument("invalid Metropolis options");
  }
  const long kept = (options.sweeps - options.burn_in) / options.thinning;
  MetropolisResult out;
  out.per_chain = kept;
  out.samples = Eigen::MatrixXd::Zero(kept * options.chains, n);
  long accepted = 0;
  long proposed = 0;
  for (int c = 0; c < options.chains; ++c) {
    numerics::CounterRng rng(options.seed, static_cast<std::uint64_t>(c));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd a_phi = Eigen::VectorXd::Zero(n);
    double v = v0.value(phi);
    long row = static_cast<long>(c) * kept;
    for (long sweep = 0; sweep < options.sweeps; ++sweep) {
      for (int i = 0; i < n; ++i) {
        const double old = phi(i);
        const double delta = options.step * normal(rng);
        const double quad = delta * a_phi(i) + 0.5 * a(i, i) * delta * delta;
        phi(i) = old + delta;
        const double v_new = v0.value(phi);
        ++proposed;
        if (uniform(rng) < std::exp(-(quad + v_new - v))) {
          a_phi += delta * a.col(i);
          v = v_new;
          ++accepted;
        } else {
          phi(i) = old;
        }
      }
      if (sweep >= options.burn_in && (sweep - options.burn_in) % options.thinning == options.thinning - 1) {
        out.samples.row(row++) = phi.transpose();
      }
    }
  }
  out.acceptance = static_cast<double>(accepted) / static_cast<double>(proposed);
  return out;
}

/// Standard error of a column mean from batch means (one batch per `batches` slice).
inline double batch_standard_error(const Eigen::VectorXd& series, int batches = 20) {
  const long n = series.size();
  const long size = n / batches;
  if (size < 2) {
    throw std::invalid_argument("series too short for batch means");
  }
  Eigen::VectorXd means(batches);
  for (int b = 0; b < batches; ++b) {
    means(b) = series.segment(b * size, size).mean();
  }
  const double mean = means.mean();
  return std::sqrt((means.array() - mean).square().sum() / (batches - 1) / batches);
}

}  // namespace lsi::dynamics
