#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lsi/errors.hpp"
#include "lsi/flow/evaluator.hpp"
#include "lsi/flow/gaussian.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::flow {

struct BackwardOptions {
  double start_scale = 4.0;
  int steps = 50;
  std::uint64_t seed = 1;
  int replicas = 1000;
  int burn_in = 1000;
  int thinning = 2;
  // Closed forms of V_t and ∇V_t; quadrature through the evaluator when empty.
  std::function<double(double, const Vector&)> potential;
  std::function<Vector(double, const Vector&)> gradient;
};

struct BackwardResult {
  Matrix samples;  // one row per replica
  std::vector<double> mesh;
  double acceptance_rate = 0.0;
};

/// Scale mesh from T down to 0, uniform in log(1 + t).
inline std::vector<double> backward_mesh(double start_scale, int steps) {
  std::vector<double> mesh(static_cast<std::size_t>(steps) + 1);
  const double top = std::log1p(start_scale);
  for (int j = 0; j <= steps; ++j) {
    mesh[static_cast<std::size_t>(steps - j)] = std::expm1(top * j / steps);
  }
  mesh.back() = 0.0;
  mesh.front() = start_scale;
  return mesh;
}

/// Backward SDE dφ̃ = -Ċ_{T-r}∇V_{T-r}(φ̃)dr + √Ċ_{T-r} dB from ν_T to ν_0.
/// Each step from scale t' down to t uses the exact increment covariance C_{t'} - C_t
/// for both the noise and the drift. ν_T is initialised by an independence
/// Metropolis chain with proposal N(0, C_∞ - C_T) and target ∝ e^{-V_T}.
inline BackwardResult backward_sample(const FlowEvaluator& flow, const BackwardOptions& options) {
  if (options.steps < 1 || options.replicas < 1 || !(options.start_scale > 0.0)) {
    throw std::invalid_argument("backward sampler needs positive steps, replicas and start scale");
  }
  const int n = flow.dimension();
  const auto& sched = flow.schedule();
  const double big_t = options.start_scale;
  auto potential = [&](double t, const Vector& x) {
    return options.potential ? options.potential(t, x) : flow.potential_at(t, x);
  };
  auto gradient = [&](double t, const Vector& x) {
    return options.gradient ? options.gradient(t, x) : flow.gradient_at(t, x);
  };

  BackwardResult out;
  out.mesh = backward_mesh(big_t, options.steps);
  out.samples = Matrix::Zero(options.replicas, n);

  const Matrix proposal_root = psd_root(sched.Cdiff(big_t, kInfinity));
  numerics::CounterRng chain_rng(options.seed, 0);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  auto propose = [&]() {
    Vector z(proposal_root.cols());
    for (Eigen::Index r = 0; r < z.size(); ++r) {
      z(r) = normal(chain_rng);
    }
    return proposal_root.cols() > 0 ? Vector(proposal_root * z) : Vector(Vector::Zero(n));
  };
  Vector state = propose();
  double state_v = potential(big_t, state);
  long accepted = 0;
  long proposals = 0;
  auto advance = [&]() {
    const Vector y = propose();
    const double vy = potential(big_t, y);
    ++proposals;
    if (uniform(chain_rng) < std::exp(state_v - vy)) {
      state = y;
      state_v = vy;
      ++accepted;
    }
  };
  for (int k = 0; k < options.burn_in; ++k) {
    advance();
  }

  std::vector<Matrix> roots;
  std::vector<Matrix> increments;
  for (int j = 0; j < options.steps; ++j) {
    const Matrix inc = sched.Cdiff(out.mesh[static_cast<std::size_t>(j + 1)], out.mesh[static_cast<std::size_t>(j)]);
    increments.push_back(inc);
    roots.push_back(psd_root(inc));
  }

  for (int r = 0; r < options.replicas; ++r) {
    for (int k = 0; k < std::max(1, options.thinning); ++k) {
      advance();
    }
    Vector phi = state;
    numerics::CounterRng rng(options.seed, static_cast<std::uint64_t>(r) + 1);
    for (int j = 0; j < options.steps; ++j) {
      const double t = out.mesh[static_cast<std::size_t>(j)];
      const Vector drift = -increments[static_cast<std::size_t>(j)] * gradient(t, phi);
      if (drift.cwiseAbs().maxCoeff() > 1.0) {
        std::ostringstream msg;
        msg << "backward step at scale " << t << " has drift " << drift.cwiseAbs().maxCoeff()
            << " > 1; refine the mesh";
        throw InstabilityError(msg.str());
      }
      const Matrix& root = roots[static_cast<std::size_t>(j)];
      Vector z(root.cols());
      for (Eigen::Index c = 0; c < z.size(); ++c) {
        z(c) = normal(rng);
      }
      phi += drift;
      if (z.size() > 0) {
        phi += root * z;
      }
    }
    out.samples.row(r) = phi.transpose();
  }
  out.acceptance_rate = proposals > 0 ? static_cast<double>(accepted) / proposals : 1.0;
  return out;
}

}  // namespace lsi::flow
