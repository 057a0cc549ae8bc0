#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "lsi/errors.hpp"
#include "lsi/flow/gaussian.hpp"
#include "lsi/flow/potential.hpp"
#include "lsi/lattice/schedule.hpp"
#include "lsi/numerics/digest.hpp"

namespace lsi::flow {

using Observable = std::function<double(const Vector&)>;
using VectorObservable = std::function<Vector(const Vector&)>;

constexpr double kInfinity = lattice::kInfinity;

struct Method {
  enum class Kind { quadrature, monte_carlo };
  Kind kind = Kind::quadrature;
  int nodes_per_dim = 12;
  long samples = 100000;
  long inner_samples = 4096;
  std::uint64_t seed = 1;

  static Method quadrature(int nodes = 12) { return Method{Kind::quadrature, nodes, 0, 0, 0}; }
  static Method monte_carlo(long samples, std::uint64_t seed, long inner = 4096) {
    return Method{Kind::monte_carlo, 0, samples, inner, seed};
  }
  bool is_quadrature() const { return kind == Kind::quadrature; }
};

constexpr int kQuadratureMaxDimension = 6;
constexpr double kEssFloor = 0.1;

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  double ess_fraction = 1.0;
};

struct VectorEstimate {
  Vector value;
  Vector std_error;
  double ess_fraction = 1.0;
};

struct MatrixEstimate {
  Matrix value;
  double ess_fraction = 1.0;
};

/// Self-normalised weighted cloud φ + ζ_i, ζ ~ N(0, C_t - C_s), weights ∝ e^{-V_s(φ+ζ_i)}.
struct Cloud {
  Matrix points;
  Vector weights;
  double log_mean = 0.0;
  double log_mean_se = 0.0;
  double ess_fraction = 1.0;
  bool monte_carlo = false;

  Estimate average(const Vector& values) const {
    Estimate e;
    e.value = weights.dot(values);
    e.ess_fraction = ess_fraction;
    if (monte_carlo) {
      e.std_error = std::sqrt((weights.array().square() * (values.array() - e.value).square()).sum());
    }
    return e;
  }
};

/// Renormalised potential V_t and Polchinski semigroup P_{s,t} for a potential
/// and covariance schedule, by tensor Gauss–Hermite quadrature or Monte Carlo.
class FlowEvaluator {
 public:
  FlowEvaluator(PotentialModel potential, lattice::CovarianceSchedule schedule, Method method = Method::quadrature())
      : potential_(std::move(potential)),
        schedule_(std::move(schedule)),
        method_(method),
        cache_(std::make_shared<Cache>()) {
    if (potential_.dimension != schedule_.dimension()) {
      throw std::invalid_argument("potential and schedule dimensions differ");
    }
    if (method_.is_quadrature() && potential_.dimension > kQuadratureMaxDimension) {
      throw std::invalid_argument("tensor quadrature is limited to N <= 6; use Monte Carlo");
    }
    if (method_.is_quadrature() && method_.nodes_per_dim < 1) {
      throw std::invalid_argument("need at least one node per dimension");
    }
    if (!method_.is_quadrature() && (method_.samples < 2 || method_.inner_samples < 2)) {
      throw std::invalid_argument("Monte Carlo needs at least two samples");
    }
  }

  const PotentialModel& potential() const { return potential_; }
  const lattice::CovarianceSchedule& schedule() const { return schedule_; }
  const Method& method() const { return method_; }
  int dimension() const { return potential_.dimension; }

  /// Gaussian rule for N(0, C_t - C_s); inner rules serve nested evaluations of V_s.
  const GaussianRule& rule(double s, double t, bool inner = false) const {
    const Key key{s, t, inner};
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->rules.find(key);
    if (it != cache_->rules.end()) {
      return *it->second;
    }
    const Matrix k = schedule_.Cdiff(s, t);
    GaussianRule r;
    if (method_.is_quadrature()) {
      r = gaussian_quadrature(k, method_.nodes_per_dim);
    } else {
      numerics::Digest d;
      d.update(s);
      d.update(t);
      d.update(inner ? "inner" : "outer");
      const std::uint64_t task = std::stoull(d.hex(), nullptr, 16);
      r = gaussian_sample(k, inner ? method_.inner_samples : method_.samples, method_.seed, task);
    }
    auto stored = std::make_shared<const GaussianRule>(std::move(r));
    cache_->rules.emplace(key, stored);
    return *stored;
  }

  Cloud cloud(double s, double t, const Vector& phi, bool inner = false) const {
    require_dimension(potential_, phi);
    if (!(s >= 0.0 && s <= t)) {
      throw std::invalid_argument("semigroup needs 0 <= s <= t");
    }
    const GaussianRule& r = rule(s, t, inner);
    const Eigen::Index m = r.size();
    Cloud c;
    c.monte_carlo = r.monte_carlo;
    c.points = r.points.colwise() + phi;
    Vector logw(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = potential_at(s, c.points.col(i));
      if (!std::isfinite(v)) {
        throw std::domain_error("non-finite integrand in Gaussian convolution");
      }
      logw(i) = r.log_weights(i) - v;
    }
    const double top = logw.maxCoeff();
    Vector w = (logw.array() - top).exp();
    const double total = w.sum();
    c.log_mean = top + std::log(total);
    c.weights = w / total;
    const Vector base = (r.log_weights.array() - r.log_weights.maxCoeff()).exp();
    const Vector base_norm = base / base.sum();
    c.ess_fraction = 1.0 / (c.weights.array().square() / base_norm.array()).sum();
    if (c.monte_carlo) {
      const double mean = w.mean();
      const double var = (w.array() - mean).square().sum() / static_cast<double>(m - 1);
      c.log_mean_se = std::sqrt(var / static_cast<double>(m)) / mean;
      if (c.ess_fraction < kEssFloor) {
        throw DegenerateWeights("effective sample size " + std::to_string(c.ess_fraction * 100.0) +
                                "% is below the 10% floor");
      }
    }
    return c;
  }

  /// V_s at a point; nested convolution when s > 0.
  double potential_at(double s, const Vector& x) const {
    if (s == 0.0) {
      return potential_.value(x);
    }
    return -cloud(0.0, s, x, true).log_mean;
  }
  Vector gradient_at(double s, const Vector& x) const {
    if (s == 0.0) {
      return potential_.gradient(x);
    }
    return weighted_gradient(cloud(0.0, s, x, true)).value;
  }
  Matrix hessian_at(double s, const Vector& x) const {
    if (s == 0.0) {
      return potential_.hessian(x);
    }
    return weighted_hessian(cloud(0.0, s, x, true));
  }

  Estimate potential_value(double t, const Vector& phi) const {
    require_dimension(potential_, phi);
    if (t == 0.0) {
      return Estimate{potential_.value(phi), 0.0, 1.0};
    }
    const Cloud c = cloud(0.0, t, phi);
    return Estimate{-c.log_mean, c.log_mean_se, c.ess_fraction};
  }

  /// ∇V_t = P_{0,t}∇V_0.
  VectorEstimate gradient(double t, const Vector& phi) const {
    require_dimension(potential_, phi);
    if (t == 0.0) {
      return VectorEstimate{potential_.gradient(phi), Vector::Zero(dimension()), 1.0};
    }
    return weighted_gradient(cloud(0.0, t, phi));
  }

  /// He V_t = P_{0,t} He V_0 - Cov(∇V_0) under the self-normalised weights.
  MatrixEstimate hessian(double t, const Vector& phi) const {
    require_dimension(potential_, phi);
    if (t == 0.0) {
      return MatrixEstimate{potential_.hessian(phi), 1.0};
    }
    const Cloud c = cloud(0.0, t, phi);
    return MatrixEstimate{weighted_hessian(c), c.ess_fraction};
  }

  /// P_{s,t}F(φ), the weighted average of F(φ+ζ) under e^{-V_s(φ+ζ)}.
  Estimate semigroup(double s, double t, const Observable& f, const Vector& phi) const {
    require_dimension(potential_, phi);
    if (s == t) {
      return Estimate{f(phi), 0.0, 1.0};
    }
    const Cloud c = cloud(s, t, phi);
    Vector values(c.points.cols());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      values(i) = f(c.points.col(i));
    }
    return c.average(values);
  }

  VectorEstimate semigroup_vector(double s, double t, const VectorObservable& g, const Vector& phi) const {
    require_dimension(potential_, phi);
    if (s == t) {
      const Vector v = g(phi);
      return VectorEstimate{v, Vector::Zero(v.size()), 1.0};
    }
    const Cloud c = cloud(s, t, phi);
    return average_vector(c, g);
  }

  /// E_{ν_t}F = P_{t,∞}F(0); E_{ν_∞}F = F(0).
  Estimate nu_expectation(double t, const Observable& f) const {
    const Vector zero = Vector::Zero(dimension());
    if (std::isinf(t)) {
      return Estimate{f(zero), 0.0, 1.0};
    }
    return semigroup(t, kInfinity, f, zero);
  }

  struct Flowed {
    double value = 0.0;
    Vector gradient;
    double potential = 0.0;
  };

  /// F_t = P_{0,t}F, its gradient ∇F_t = E∇F - E[F∇V_0] + E[F]E[∇V_0], and V_t, from one cloud.
  Flowed flowed(double t, const Observable& f, const VectorObservable& grad_f, const Vector& phi) const {
    Flowed out;
    if (t == 0.0) {
      out.value = f(phi);
      out.gradient = grad_f(phi);
      out.potential = potential_.value(phi);
      return out;
    }
    const Cloud c = cloud(0.0, t, phi);
    const int n = dimension();
    Vector ef = Vector::Zero(n);
    Vector efv = Vector::Zero(n);
    Vector ev = Vector::Zero(n);
    double e = 0.0;
    for (Eigen::Index i = 0; i < c.points.cols(); ++i) {
      const Vector x = c.points.col(i);
      const double w = c.weights(i);
      const double fx = f(x);
      const Vector gv = potential_.gradient(x);
      e += w * fx;
      ef += w * grad_f(x);
      efv += w * fx * gv;
      ev += w * gv;
    }
    out.value = e;
    out.gradient = ef - efv + e * ev;
    out.potential = -c.log_mean;
    return out;
  }

  /// |∂_t V_t - ½ Δ_{Ċ_t} V_t + ½ (∇V_t)²_{Ċ_t}| with a central difference in t.
  double polchinski_residual(double t, const Vector& phi, double dt = 0.0) const {
    if (dt <= 0.0) {
      dt = default_time_step(t);
    }
    if (!(t > dt)) {
      throw std::invalid_argument("polchinski residual needs t > dt > 0");
    }
    const double dv = (potential_value(t + dt, phi).value - potential_value(t - dt, phi).value) / (2.0 * dt);
    const Matrix cdot = schedule_.Cdot(t);
    const Vector g = gradient(t, phi).value;
    const Matrix h = hessian(t, phi).value;
    const double laplacian = (cdot.array() * h.array()).sum();
    const double square = g.dot(cdot * g);
    return std::abs(dv - 0.5 * laplacian + 0.5 * square);
  }

  static double default_time_step(double t) { return std::max(1e-3, 1e-3 * t); }

  VectorEstimate weighted_gradient(const Cloud& c) const {
    return average_vector(c, [this](const Vector& x) { return potential_.gradient(x); });
  }

  Matrix weighted_hessian(const Cloud& c) const {
    const int n = dimension();
    Matrix eh = Matrix::Zero(n, n);
    Matrix egg = Matrix::Zero(n, n);
    Vector eg = Vector::Zero(n);
    for (Eigen::Index i = 0; i < c.points.cols(); ++i) {
      const Vector x = c.points.col(i);
      const double w = c.weights(i);
      const Vector g = potential_.gradient(x);
      eh += w * potential_.hessian(x);
      egg += w * g * g.transpose();
      eg += w * g;
    }
    Matrix h = eh - (egg - eg * eg.transpose());
    return 0.5 * (h + h.transpose());
  }

 private:
  struct Key {
    double s;
    double t;
    bool inner;
    bool operator<(const Key& o) const {
      return std::tie(s, t, inner) < std::tie(o.s, o.t, o.inner);
    }
  };
  struct Cache {
    std::mutex mutex;
    std::map<Key, std::shared_ptr<const GaussianRule>> rules;
  };

  template <class G>
  static VectorEstimate average_vector(const Cloud& c, G&& g) {
    Vector first = g(Vector(c.points.col(0)));
    const Eigen::Index d = first.size();
    Matrix values(d, c.points.cols());
    values.col(0) = first;
    for (Eigen::Index i = 1; i < c.points.cols(); ++i) {
      values.col(i) = g(Vector(c.points.col(i)));
    }
    VectorEstimate e;
    e.value = values * c.weights;
    e.std_error = Vector::Zero(d);
    e.ess_fraction = c.ess_fraction;
    if (c.monte_carlo) {
      for (Eigen::Index k = 0; k < d; ++k) {
        e.std_error(k) =
            std::sqrt((c.weights.array().square() * (values.row(k).transpose().array() - e.value(k)).square()).sum());
      }
    }
    return e;
  }

  PotentialModel potential_;
  lattice::CovarianceSchedule schedule_;
  Method method_;
  std::shared_ptr<Cache> cache_;
};

}  // namespace lsi::flow
