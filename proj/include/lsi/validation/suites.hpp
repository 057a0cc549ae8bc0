#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lsi/certify/scan.hpp"
#include "lsi/flow/checks.hpp"
#include "lsi/flow/evaluator.hpp"
#include "lsi/flow/potential.hpp"
#include "lsi/lattice/heat_kernel.hpp"
#include "lsi/lattice/schedule.hpp"
#include "lsi/lattice/sums.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::validation {

using flow::Matrix;
using flow::Vector;

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  const Check& worst() const {
    return *std::max_element(checks.begin(), checks.end(), [](const Check& a, const Check& b) {
      const double ra = a.tolerance > 0.0 ? a.value / a.tolerance : a.value;
      const double rb = b.tolerance > 0.0 ? b.value / b.tolerance : b.value;
      return ra < rb;
    });
  }
  void add(std::string name, double value, double tolerance) {
    checks.push_back(Check{std::move(name), value, tolerance, std::isfinite(value) && value <= tolerance});
  }
};

inline nlohmann::json to_json(const SuiteReport& r) {
  nlohmann::json j{{"suite", r.suite}, {"all_pass", r.all_pass()}, {"checks", nlohmann::json::array()}};
  for (const auto& c : r.checks) {
    j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  }
  return j;
}

/// Two-site operator [[1.5, -0.5], [-0.5, 1.5]] used by the toy models.
inline Matrix toy_operator() {
  Matrix a(2, 2);
  a << 1.5, -0.5, -0.5, 1.5;
  return a;
}

inline std::vector<std::pair<std::string, flow::PotentialModel>> toy_models() {
  return {{"double_well", flow::double_well_potential(2, 1.0, 0.5)},
          {"sine_gordon", flow::cosine_potential(2, 2.0, 0.5)}};
}

/// e^{R tanh((v,φ)/R)}, a bounded positive observable, and its gradient.
inline std::pair<flow::Observable, flow::VectorObservable> clipped_exponential(const Vector& v, double r) {
  flow::Observable f = [v, r](const Vector& phi) { return std::exp(r * std::tanh(v.dot(phi) / r)); };
  flow::VectorObservable g = [v, r](const Vector& phi) {
    const double u = v.dot(phi) / r;
    const double sech2 = 1.0 - std::tanh(u) * std::tanh(u);
    return Vector(std::exp(r * std::tanh(u)) * sech2 * v);
  };
  return {f, g};
}

/// Semigroup law, normalisation, positivity, duality, Polchinski residual, derivative
/// relations and the commutation identity on the two-site toy models.
inline SuiteReport semigroup_suite(std::uint64_t seed = 6, int nodes = 20) {
  SuiteReport out;
  out.suite = "semigroup";
  const auto schedule = lattice::CovarianceSchedule::heat(toy_operator());
  numerics::CounterRng rng(seed, 0);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto field = [&] {
    Vector v(2);
    v << normal(rng), normal(rng);
    return v;
  };
  for (const auto& [name, model] : toy_models()) {
    const flow::FlowEvaluator flow(model, schedule, flow::Method::quadrature(nodes));
    flow::Observable f = [](const Vector& x) { return std::cos(x(0) - 0.5 * x(1)) + 0.2 * x(0); };
    double law = 0.0;
    for (int k = 0; k < 5; ++k) {
      double a = 1.2 * unit(rng), b = 1.2 * unit(rng), c = 1.2 * unit(rng);
      if (k == 0) {
        a = 0.0, b = 0.5, c = 1.0;
      }
      std::array<double, 3> st{a, b, c};
      std::sort(st.begin(), st.end());
      const Vector phi = field();
      flow::Observable inner = [&](const Vector& x) { return flow.semigroup(st[0], st[1], f, x).value; };
      law = std::max(law, std::abs(flow.semigroup(st[1], st[2], inner, phi).value -
                                   flow.semigroup(st[0], st[2], f, phi).value));
    }
    out.add(name + ": semigroup law", law, 1e-5);

    flow::Observable one = [](const Vector&) { return 1.0; };
    double norm = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double s = unit(rng);
      norm = std::max(norm, std::abs(flow.semigroup(s, s + 0.7, one, field()).value - 1.0));
    }
    out.add(name + ": P1 = 1", norm, 1e-10);

    double negative = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double a = 2.0 * unit(rng) - 1.0, b = 2.0 * unit(rng) - 1.0, c = unit(rng);
      flow::Observable g = [=](const Vector& x) { return c * std::pow(std::sin(a * x(0) + b * x(1)), 2); };
      const double s = 0.5 * unit(rng);
      negative = std::max(negative, -flow.semigroup(s, s + 0.6, g, field()).value);
    }
    out.add(name + ": positivity (max negative part)", std::max(negative, 0.0), 0.0);

    flow::Observable h = [](const Vector& x) { return std::cos(x(0)) * std::exp(0.2 * x(1)); };
    flow::Observable pst = [&](const Vector& x) { return flow.semigroup(0.3, 1.2, h, x).value; };
    out.add(name + ": duality", std::abs(flow.nu_expectation(1.2, pst).value - flow.nu_expectation(0.3, h).value),
            1e-5);

    const double dt = 1e-3;
    double polchinski = 0.0;
    for (int k = 0; k < 3; ++k) {
      polchinski = std::max(polchinski, flow.polchinski_residual(0.5 + unit(rng), field(), dt));
    }
    out.add(name + ": Polchinski residual", polchinski, std::max(1e-4, 10.0 * dt * dt));

    const auto d = flow::derivative_relation_check(flow, 0.2, 0.8, Vector::LinSpaced(2, 0.6, 0.8), field());
    out.add(name + ": gradient relation", d.gradient, 1e-4);
    out.add(name + ": Hessian relation", d.hessian, 1e-4);

    const flow::FlowEvaluator fine(model, schedule, flow::Method::quadrature(nodes + 4));
    const auto [fe, ge] = clipped_exponential(Vector::LinSpaced(2, 0.5, 0.7), 2.0);
    const auto c = flow::commutation_identity_check(fine, 0.6, Matrix::Identity(2, 2), fe, ge,
                                                    Vector::LinSpaced(2, -0.4, 0.3));
    out.add(name + ": commutation identity", c.residual, 1e-4);
  }
  return out;
}

/// Bessel against Fourier, torus stochasticity, on-diagonal decay and the log-covariance band.
inline SuiteReport heat_kernel_suite() {
  SuiteReport out;
  out.suite = "heat_kernel";
  double bessel = 0.0;
  for (double t : {0.5, 2.0, 10.0}) {
    for (int x1 = -5; x1 <= 5; ++x1) {
      for (int x2 = -5; x2 <= 5; ++x2) {
        bessel = std::max(bessel, std::abs(lattice::infinite_heat_kernel(x1, x2, t) -
                                           lattice::infinite_heat_kernel_fourier(x1, x2, t)));
      }
    }
  }
  out.add("Bessel vs Fourier", bessel, 1e-10);
  const lattice::Torus torus = lattice::build_torus(8, 1.0, 8.0);
  double stochastic = 0.0;
  for (double t : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    stochastic = std::max(stochastic, std::abs(lattice::torus_heat_kernel(torus, t).values.sum() - 1.0));
  }
  out.add("torus stochasticity", stochastic, 1e-10);
  double decay = 0.0;
  for (int k = 0; k <= 40; ++k) {
    const double t = 10.0 * std::pow(100.0, k / 40.0);
    decay = std::max(decay, std::abs(4.0 * std::numbers::pi * t * lattice::infinite_heat_kernel(0, 0, t) - 1.0) * t);
  }
  out.add("t |4 pi t p_t(0) - 1| on [10, 1000]", decay, 1.0);
  const lattice::Torus big = lattice::build_torus(64, 1.0, 64.0);
  const auto s = lattice::CovarianceSchedule::on_torus(big, 0.25, lattice::ScheduleMode::heat);
  std::vector<double> grid{0.0};
  for (int k = 0; k <= 60; ++k) {
    grid.push_back(0.01 * std::pow(10.0, k / 12.0));
  }
  const auto report = lattice::log_covariance_check(s, 1.0, grid);
  out.add("log covariance below band top", report.max_deviation - lattice::kLogCovarianceBandHi, 0.0);
  out.add("log covariance above band bottom", lattice::kLogCovarianceBandLo - report.min_deviation, 0.0);
  out.add("log covariance points outside scale assumption", report.excluded, 0.0);
  return out;
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> grid;
  for (int k = 0; k < points; ++k) {
    grid.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (points - 1)));
  }
  return grid;
}

/// Ent_{ν_0}(F) against the scale integral for the standard battery, N = 1 and 2.
/// Relative gap for nonzero entropy; absolute gap for the constant member.
inline SuiteReport entropy_suite(double tolerance = 0.02) {
  SuiteReport out;
  out.suite = "entropy_decomposition";
  struct Case {
    std::string name;
    flow::PotentialModel model;
    lattice::CovarianceSchedule schedule;
  };
  std::vector<Case> cases;
  cases.push_back({"gaussian_1", flow::zero_potential(1), lattice::CovarianceSchedule::heat(Matrix::Identity(1, 1))});
  for (const auto& [name, model] : toy_models()) {
    cases.push_back({name, model, lattice::CovarianceSchedule::heat(toy_operator())});
  }
  for (const auto& c : cases) {
    const flow::FlowEvaluator flow(c.model, c.schedule, flow::Method::quadrature(c.model.dimension == 1 ? 40 : 24));
    for (const auto& member : certify::standard_battery(c.model.dimension)) {
      const auto r = flow::entropy_decomposition(flow, member.value, member.gradient, log_grid(1e-3, 40.0, 40));
      const std::string label = c.name + ": " + member.name;
      if (r.left > 1e-12) {
        out.add(label + " relative gap", r.gap / r.left, tolerance);
      } else {
        out.add(label + " absolute gap", r.gap, 1e-10);
      }
      out.add(label + " entropy monotone", r.monotone ? 0.0 : 1.0, 0.0);
    }
  }
  return out;
}

}  // namespace lsi::validation
