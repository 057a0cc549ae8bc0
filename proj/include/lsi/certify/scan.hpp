#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsi/certify/gamma.hpp"
#include "lsi/flow/evaluator.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::certify {

using flow::Matrix;
using flow::Vector;
using PointSampler = std::function<Vector(numerics::CounterRng&)>;

struct ScanOptions {
  int restarts = 8;
  int max_sweeps = 40;
  double initial_step = 0.5;
  double min_step = 1e-3;
  std::uint64_t seed = 1;
};

/// λ_min(Q_t He V_t(φ) Q_t).
inline double curvature_at(const flow::FlowEvaluator& flow, double t, const Vector& phi) {
  const Matrix q = flow.schedule().Q(t);
  const Matrix h = flow.hessian(t, phi).value;
  const Matrix form = q * (0.5 * (h + h.transpose())) * q;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(form, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Sampled minimum of the curvature over φ at each grid time: random starts, then
/// coordinate descent with step halving. The result is empirical, never certified.
/// Convex models keep convexity along the flow, so their schedule gets a
/// nonnegative tail; otherwise no tail is attached.
inline MuSchedule mu_scan(const flow::FlowEvaluator& flow, const std::vector<double>& t_grid,
                          const PointSampler& sampler, const ScanOptions& opts = {}) {
  if (t_grid.empty() || t_grid.front() != 0.0) {
    throw std::invalid_argument("scan grid must start at t = 0");
  }
  if (opts.restarts < 1) {
    throw std::invalid_argument("need at least one restart");
  }
  MuSchedule out;
  out.provenance = Provenance::sampled_scan;
  out.t = t_grid;
  out.rate.resize(t_grid.size());
  const int n = flow.dimension();
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opts.restarts; ++r) {
      numerics::CounterRng rng(opts.seed, static_cast<std::uint64_t>(k) * 1000003ULL + static_cast<std::uint64_t>(r));
      Vector phi = sampler(rng);
      double value = curvature_at(flow, t, phi);
      double step = opts.initial_step;
      for (int sweep = 0; sweep < opts.max_sweeps && step >= opts.min_step; ++sweep) {
        bool moved = false;
        for (int i = 0; i < n; ++i) {
          for (double dir : {1.0, -1.0}) {
            Vector trial = phi;
            trial(i) += dir * step;
            const double v = curvature_at(flow, t, trial);
            if (v < value) {
              value = v;
              phi = trial;
              moved = true;
              break;
            }
          }
        }
        if (!moved) {
          step *= 0.5;
        }
      }
      best = std::min(best, value);
    }
    out.rate[k] = best;
  }
  if (flow.potential().convex) {
    out.tail = TailBound::nonnegative(t_grid.back());
  }
  return out;
}

/// Classical comparator: Hessian of the Hamiltonian ≥ λ·id for convex V_0 and A ≥ λ.
inline Certificate bakry_emery_baseline(const flow::PotentialModel& model, double lambda) {
  if (!model.convex) {
    throw std::invalid_argument("Bakry-Emery baseline needs a potential declared convex");
  }
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive");
  }
  Certificate c;
  c.theorem = Theorem::heat;
  c.lambda_min = lambda;
  c.gamma = lambda;
  c.log_gamma = std::log(lambda);
  c.mu = constant_schedule({0.0, 1.0}, 0.0);
  c.certified = true;
  c.diagnostics["baseline"] = "bakry_emery";
  c.diagnostics["model"] = model.name;
  c.config_fingerprint = schedule_fingerprint(c.mu, lambda, c.theorem);
  return c;
}

struct TestFunction {
  std::string name;
  flow::Observable value;
  flow::VectorObservable gradient;
};

struct BatteryRow {
  std::string name;
  double entropy = 0.0;
  double dirichlet_bound = 0.0;
  bool pass = false;
};

struct EmpiricalReport {
  std::vector<BatteryRow> rows;
  double gamma = 0.0;
  double slack = 0.01;
  bool all_pass = true;
};

/// exp((v, φ)).
inline TestFunction exponential_function(const Vector& v) {
  return TestFunction{"exp_linear",
                      [v](const Vector& phi) { return std::exp(v.dot(phi)); },
                      [v](const Vector& phi) { return (std::exp(v.dot(phi)) * v).eval(); }};
}

/// 1 + a·cos((k, φ) + c) with |a| < 1.
inline TestFunction trigonometric_function(const Vector& k, double a, double c) {
  if (!(std::abs(a) < 1.0)) {
    throw std::invalid_argument("amplitude must be below one to stay positive");
  }
  return TestFunction{"trig",
                      [k, a, c](const Vector& phi) { return 1.0 + a * std::cos(k.dot(phi) + c); },
                      [k, a, c](const Vector& phi) { return (-a * std::sin(k.dot(phi) + c) * k).eval(); }};
}

inline TestFunction constant_function(int n) {
  return TestFunction{"constant", [](const Vector&) { return 1.0; },
                      [n](const Vector&) { return Vector::Zero(n).eval(); }};
}

/// Constant, linear exponentials along each axis and the diagonal, a smooth bump,
/// and `random_trig` random positive trigonometric functions.
inline std::vector<TestFunction> standard_battery(int n, int random_trig = 4, std::uint64_t seed = 7) {
  std::vector<TestFunction> out;
  out.push_back(constant_function(n));
  for (int i = 0; i < n; ++i) {
    Vector v = Vector::Zero(n);
    v(i) = 0.5;
    out.push_back(exponential_function(v));
  }
  out.push_back(exponential_function(Vector::Constant(n, -0.3)));
  out.push_back(TestFunction{"bump",
                             [](const Vector& phi) { return 1.0 + std::exp(-0.5 * phi.squaredNorm()); },
                             [](const Vector& phi) { return (-std::exp(-0.5 * phi.squaredNorm()) * phi).eval(); }});
  numerics::CounterRng rng(seed, 0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int r = 0; r < random_trig; ++r) {
    Vector k(n);
    for (int i = 0; i < n; ++i) {
      k(i) = 2.0 * unit(rng);
    }
    const double a = 0.95 * std::abs(unit(rng));
    const double c = 3.14159 * unit(rng);
    out.push_back(trigonometric_function(k, a, c));
  }
  return out;
}

/// Ent_{ν_0}(F) against (2/γ) E_{ν_0}|∇√F|², allowing `slack` relative quadrature error.
inline EmpiricalReport lsi_empirical_check(const flow::FlowEvaluator& flow, double gamma,
                                           const std::vector<TestFunction>& battery, double slack = 0.01) {
  if (!flow.method().is_quadrature() || flow.dimension() > 4) {
    throw std::invalid_argument("empirical LSI check needs quadrature and N <= 4");
  }
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("gamma must be positive");
  }
  EmpiricalReport report;
  report.gamma = gamma;
  report.slack = slack;
  const Vector zero = Vector::Zero(flow.dimension());
  const flow::Cloud cloud = flow.cloud(0.0, flow::kInfinity, zero);
  const Eigen::Index m = cloud.points.cols();
  for (const TestFunction& f : battery) {
    Vector fv(m);
    Vector flogf(m);
    Vector energy(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector x = cloud.points.col(i);
      const double v = f.value(x);
      if (!(v > 0.0)) {
        throw std::invalid_argument("battery member " + f.name + " is not strictly positive");
      }
      fv(i) = v;
      flogf(i) = v * std::log(v);
      energy(i) = f.gradient(x).squaredNorm() / (4.0 * v);
    }
    BatteryRow row;
    row.name = f.name;
    const double mean = cloud.weights.dot(fv);
    row.entropy = cloud.weights.dot(flogf) - mean * std::log(mean);
    row.dirichlet_bound = 2.0 / gamma * cloud.weights.dot(energy);
    const double scale = std::max(std::abs(row.entropy), row.dirichlet_bound);
    row.pass = row.entropy <= row.dirichlet_bound * (1.0 + slack) + 1e-12 * std::max(1.0, scale);
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace lsi::certify
