#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsi/errors.hpp"
#include "lsi/lattice/torus.hpp"
#include "lsi/numerics/quadrature.hpp"
#include "lsi/numerics/rng.hpp"
#include "lsi/sine_gordon/params.hpp"

namespace lsi::dynamics {

using sine_gordon::SineGordonParams;

enum class DynamicsKind { glauber, kawasaki };

inline const char* to_string(DynamicsKind k) { return k == DynamicsKind::glauber ? "glauber" : "kawasaki"; }

inline DynamicsKind parse_dynamics(const std::string& s) {
  if (s == "glauber") {
    return DynamicsKind::glauber;
  }
  if (s == "kawasaki") {
    return DynamicsKind::kawasaki;
  }
  throw std::invalid_argument("unknown dynamics '" + s + "'");
}

constexpr double kStabilityGate = 0.1;
constexpr double kDefaultStepFraction = 0.05;
constexpr double kMaxIncrement = 10.0;
constexpr double kConservationLimit = 1e-6;

/// Largest eigenvalue of -Δ_Λ on the torus.
inline double laplacian_top(int side) {
  double top = 0.0;
  for (int k = 0; k < side; ++k) {
    top = std::max(top, 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / side));
  }
  return 2.0 * top;
}

/// Smallest nonzero eigenvalue of -Δ_Λ.
inline double laplacian_gap(int side) { return 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / side); }

/// Stiffest linear rate of the drift: λ_max(A) + β|z_0|, times λ_max(-Δ_Λ) for Kawasaki.
inline double stiffest_rate(DynamicsKind kind, const SineGordonParams& p) {
  const int side = p.sites_per_axis();
  const double glauber = laplacian_top(side) + p.mesh * p.mesh * p.mass * p.mass + p.beta * std::abs(p.z0());
  return kind == DynamicsKind::glauber ? glauber : laplacian_top(side) * glauber;
}

/// Unit-lattice rate to continuum rate: ε⁻² (Glauber), ε⁻⁴ (Kawasaki).
inline double continuum_rate(DynamicsKind kind, const SineGordonParams& p, double unit_rate) {
  const double e2 = p.mesh * p.mesh;
  return kind == DynamicsKind::glauber ? unit_rate / e2 : unit_rate / (e2 * e2);
}

struct Observable {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

/// Linear observable φ ↦ w·φ.
inline Observable linear_observable(std::string name, Eigen::VectorXd w) {
  return Observable{std::move(name), [w](const Eigen::VectorXd& phi) { return w.dot(phi); },
                    [w](const Eigen::VectorXd&) { return w; }};
}

/// Names: zero_mode, mode_K1_K2 (normalised cosine mode), cos (site average of cos √βφ),
/// block_R (mean over an R×R block at the origin).
inline Observable make_observable(const std::string& name, const SineGordonParams& p) {
  const lattice::Torus torus = p.torus();
  const int n = torus.size();
  const int side = torus.side();
  if (name == "zero_mode") {
    return linear_observable(name, Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))));
  }
  if (name == "cos") {
    const double k = std::sqrt(p.beta);
    return Observable{name, [k](const Eigen::VectorXd& phi) { return (k * phi.array()).cos().mean(); },
                      [k, n](const Eigen::VectorXd& phi) {
                        return (-k / n * (k * phi.array()).sin()).matrix().eval();
                      }};
  }
  int a = 0;
  int b = 0;
  if (std::sscanf(name.c_str(), "mode_%d_%d", &a, &b) == 2) {
    Eigen::VectorXd w(n);
    for (int x = 0; x < n; ++x) {
      const auto c = torus.coords(x);
      w(x) = std::cos(2.0 * std::numbers::pi * (a * c[0] + b * c[1]) / side);
    }
    const double norm = w.norm();
    if (norm == 0.0) {
      throw std::invalid_argument("empty Fourier mode " + name);
    }
    return linear_observable(name, w / norm);
  }
  if (std::sscanf(name.c_str(), "block_%d", &a) == 1 && a >= 1 && a <= side) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < a; ++i) {
      for (int j = 0; j < a; ++j) {
        w(torus.index(i, j)) = 1.0 / (a * a);
      }
    }
    return linear_observable(name, w);
  }
  throw std::invalid_argument("unknown observable '" + name + "'");
}

inline std::vector<std::string> default_observables(DynamicsKind kind) {
  if (kind == DynamicsKind::glauber) {
    return {"zero_mode", "mode_1_0", "cos", "block_2"};
  }
  return {"mode_1_0", "mode_0_1", "cos", "block_2"};
}

enum class InitialState { zero, gaussian };

struct DynamicsRun {
  DynamicsKind kind = DynamicsKind::glauber;
  SineGordonParams params;
  double dt = 0.0;  // 0 selects kDefaultStepFraction / stiffest rate
  double horizon = 10.0;
  int replicas = 2;
  std::uint64_t seed = 1;
  std::vector<std::string> observables;  // empty selects the default battery
  int record_every = 1;
  InitialState initial = InitialState::zero;
  std::optional<Eigen::VectorXd> start;  // overrides `initial`

  double step() const { return dt > 0.0 ? dt : kDefaultStepFraction / stiffest_rate(kind, params); }
  long steps() const { return static_cast<long>(std::ceil(horizon / step() - 1e-9)); }
  std::vector<std::string> observable_names() const {
    return observables.empty() ? default_observables(kind) : observables;
  }

  void validate() const {
    params.validate();
    if (replicas < 2) {
      throw std::invalid_argument("at least two replicas are required");
    }
    if (start && kind == DynamicsKind::kawasaki && std::abs(start->sum()) > 1e-9 * (1.0 + start->cwiseAbs().sum())) {
      throw std::invalid_argument("Kawasaki start field must have mean zero");
    }
    if (!(horizon > 0.0) || !(dt >= 0.0) || record_every < 1) {
      throw std::invalid_argument("horizon, dt and record_every must be positive");
    }
    const double product = step() * stiffest_rate(kind, params);
    if (product > kStabilityGate) {
      std::ostringstream msg;
      msg << "dt * stiffest rate = " << product << " exceeds " << kStabilityGate;
      throw GateFailure("stability", msg.str());
    }
  }
};

struct Trajectories {
  DynamicsKind kind = DynamicsKind::glauber;
  SineGordonParams params;
  double dt = 0.0;
  long steps = 0;
  int record_every = 1;
  std::vector<std::string> names;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> series;  // per observable: replicas × records
  Eigen::MatrixXd final_fields;         // replicas × sites
  double max_increment = 0.0;
  double max_conservation_drift = 0.0;  // max |Σφ - Σφ_0| (Kawasaki)
  double stiffest = 0.0;

  double record_dt() const { return dt * record_every; }
};

/// One Euler–Maruyama integrator for both dynamics on the unit lattice, with
/// H(φ) = ½φᵀAφ + Σ_x z_0 cos(√β φ_x) and A = -Δ_Λ + ε²m².
class Integrator {
 public:
  Integrator(DynamicsKind kind, const SineGordonParams& p, double dt)
      : kind_(kind), torus_(p.torus()), n_(torus_.size()), dt_(dt), noise_(std::sqrt(2.0 * dt)),
        mass_term_(p.mesh * p.mesh * p.mass * p.mass), k_(std::sqrt(p.beta)), z0_(p.z0()),
        grad_(n_), inc_(n_), eta_(2 * n_) {
    nb_.reserve(static_cast<std::size_t>(n_));
    for (int x = 0; x < n_; ++x) {
      nb_.push_back(torus_.neighbours(x));
    }
  }

  int sites() const { return n_; }
  double dt() const { return dt_; }

  /// ∇H(φ).
  void gradient(const Eigen::VectorXd& phi, Eigen::VectorXd& out) const {
    for (int x = 0; x < n_; ++x) {
      const auto& e = nb_[static_cast<std::size_t>(x)];
      out(x) = (4.0 + mass_term_) * phi(x) - phi(e[0]) - phi(e[1]) - phi(e[2]) - phi(e[3]) -
               k_ * z0_ * std::sin(k_ * phi(x));
    }
  }

  /// Deterministic part of the generator: -∇H (Glauber) or Δ_Λ∇H (Kawasaki).
  Eigen::VectorXd drift(const Eigen::VectorXd& phi) const {
    Eigen::VectorXd g(n_);
    gradient(phi, g);
    if (kind_ == DynamicsKind::glauber) {
      return -g;
    }
    Eigen::VectorXd out(n_);
    laplacian(g, out);
    return out;
  }

  /// Advances φ by one step; returns the largest |increment|.
  template <class Rng>
  double step(Eigen::VectorXd& phi, Rng& rng) {
    gradient(phi, grad_);
    if (kind_ == DynamicsKind::glauber) {
      for (int x = 0; x < n_; ++x) {
        inc_(x) = -dt_ * grad_(x) + noise_ * normal_(rng);
      }
    } else {
      laplacian(grad_, inc_);
      inc_ *= dt_;
      // Edge (x, x+e_k) carries η; the divergence adds it at x and removes it at x+e_k.
      for (int i = 0; i < 2 * n_; ++i) {
        eta_(i) = noise_ * normal_(rng);
      }
      for (int x = 0; x < n_; ++x) {
        const auto& e = nb_[static_cast<std::size_t>(x)];
        inc_(x) += eta_(2 * x) + eta_(2 * x + 1) - eta_(2 * e[1]) - eta_(2 * e[3] + 1);
      }
    }
    phi += inc_;
    return inc_.cwiseAbs().maxCoeff();
  }

  /// Σ over edges of (g_x - g_{x+e})², the Kawasaki Dirichlet density; |g|² for Glauber.
  double dirichlet_density(const Eigen::VectorXd& g) const {
    if (kind_ == DynamicsKind::glauber) {
      return g.squaredNorm();
    }
    double total = 0.0;
    for (int x = 0; x < n_; ++x) {
      const auto& e = nb_[static_cast<std::size_t>(x)];
      total += (g(x) - g(e[0])) * (g(x) - g(e[0])) + (g(x) - g(e[2])) * (g(x) - g(e[2]));
    }
    return total;
  }

 private:
  void laplacian(const Eigen::VectorXd& g, Eigen::VectorXd& out) const {
    for (int x = 0; x < n_; ++x) {
      const auto& e = nb_[static_cast<std::size_t>(x)];
      out(x) = g(e[0]) + g(e[1]) + g(e[2]) + g(e[3]) - 4.0 * g(x);
    }
  }

  DynamicsKind kind_;
  lattice::Torus torus_;
  int n_;
  double dt_;
  double noise_;
  double mass_term_;
  double k_;
  double z0_;
  std::vector<std::array<int, 4>> nb_;
  Eigen::VectorXd grad_;
  Eigen::VectorXd inc_;
  Eigen::VectorXd eta_;
  std::normal_distribution<double> normal_;
};

/// Initial field: zero, or an independent N(0, 1/(8+ε²m²)) draw per site (mean removed for Kawasaki).
inline Eigen::VectorXd initial_field(const DynamicsRun& run, numerics::CounterRng& rng) {
  const int n = run.params.sites();
  if (run.start) {
    if (run.start->size() != n) {
      throw std::invalid_argument("start field has the wrong dimension");
    }
    return *run.start;
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  if (run.initial == InitialState::gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(8.0 + std::pow(run.params.mesh * run.params.mass, 2)));
    for (int x = 0; x < n; ++x) {
      phi(x) = normal(rng);
    }
    if (run.kind == DynamicsKind::kawasaki) {
      phi.array() -= phi.mean();
    }
  }
  return phi;
}

/// Runs all replicas; `visit(replica, step, phi_before, phi_after)` is called after every step.
template <class Visit>
Trajectories simulate_with(const DynamicsRun& run, Visit&& visit) {
  run.validate();
  std::vector<Observable> obs;
  for (const auto& name : run.observable_names()) {
    obs.push_back(make_observable(name, run.params));
  }
  const long steps = run.steps();
  const long records = steps / run.record_every + 1;
  Trajectories out;
  out.kind = run.kind;
  out.params = run.params;
  out.dt = run.step();
  out.steps = steps;
  out.record_every = run.record_every;
  out.stiffest = stiffest_rate(run.kind, run.params);
  for (const auto& o : obs) {
    out.names.push_back(o.name);
    out.series.push_back(Eigen::MatrixXd::Zero(run.replicas, records));
  }
  for (long r = 0; r < records; ++r) {
    out.times.push_back(static_cast<double>(r * run.record_every) * out.dt);
  }
  const int n = run.params.sites();
  out.final_fields = Eigen::MatrixXd::Zero(run.replicas, n);
  for (int rep = 0; rep < run.replicas; ++rep) {
    numerics::CounterRng rng(run.seed, static_cast<std::uint64_t>(rep));
    Integrator integrator(run.kind, run.params, out.dt);
    Eigen::VectorXd phi = initial_field(run, rng);
    Eigen::VectorXd before = phi;
    const double total0 = phi.sum();
    auto record = [&](long r) {
      for (std::size_t k = 0; k < obs.size(); ++k) {
        out.series[k](rep, r) = obs[k].value(phi);
      }
    };
    record(0);
    for (long s = 1; s <= steps; ++s) {
      before = phi;
      const double inc = integrator.step(phi, rng);
      out.max_increment = std::max(out.max_increment, inc);
      if (!(inc <= kMaxIncrement)) {
        std::ostringstream msg;
        msg << "instability: |increment| = " << inc << " at replica " << rep << ", step " << s
            << ", dt = " << out.dt << ", max |phi| = " << phi.cwiseAbs().maxCoeff();
        throw InstabilityError(msg.str());
      }
      if (run.kind == DynamicsKind::kawasaki) {
        const double drift = std::abs(phi.sum() - total0);
        out.max_conservation_drift = std::max(out.max_conservation_drift, drift);
        if (drift > kConservationLimit) {
          std::ostringstream msg;
          msg << "conservation drift " << drift << " at replica " << rep << ", step " << s;
          throw GateFailure("conservation", msg.str());
        }
      }
      visit(rep, s, before, phi);
      if (s % run.record_every == 0) {
        record(s / run.record_every);
      }
    }
    out.final_fields.row(rep) = phi.transpose();
  }
  return out;
}

inline Trajectories glauber_simulate(DynamicsRun run) {
  run.kind = DynamicsKind::glauber;
  return simulate_with(run, [](int, long, const Eigen::VectorXd&, const Eigen::VectorXd&) {});
}

inline Trajectories kawasaki_simulate(DynamicsRun run) {
  run.kind = DynamicsKind::kawasaki;
  return simulate_with(run, [](int, long, const Eigen::VectorXd&, const Eigen::VectorXd&) {});
}

inline Trajectories simulate(const DynamicsRun& run) {
  return run.kind == DynamicsKind::glauber ? glauber_simulate(run) : kawasaki_simulate(run);
}

struct MeanWithError {
  double mean = 0.0;
  double error = 0.0;
};

inline MeanWithError replica_mean(const Eigen::VectorXd& per_replica) {
  const double n = static_cast<double>(per_replica.size());
  const double mean = per_replica.mean();
  const double var = (per_replica.array() - mean).square().sum() / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

struct DirichletEstimate {
  MeanWithError increments;  // E[(f(φ_{t+dt}) - f(φ_t))²] / 2dt
  MeanWithError form;        // E[Dirichlet density of ∇f]
};

/// Two estimators of the Dirichlet energy of f in stationarity: one-step increments of the
/// simulated chain, and the quadratic form of the generator evaluated on the same states.
inline DirichletEstimate dirichlet_energy(const DynamicsRun& run, const Observable& f, double burn_in) {
  Eigen::VectorXd incr = Eigen::VectorXd::Zero(run.replicas);
  Eigen::VectorXd form = Eigen::VectorXd::Zero(run.replicas);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(run.replicas);
  const Integrator probe(run.kind, run.params, run.step());
  const long first = static_cast<long>(std::ceil(burn_in / run.step()));
  simulate_with(run, [&](int rep, long s, const Eigen::VectorXd& before, const Eigen::VectorXd& after) {
    if (s <= first) {
      return;
    }
    const double d = f.value(after) - f.value(before);
    incr(rep) += d * d / (2.0 * run.step());
    form(rep) += probe.dirichlet_density(f.gradient(before));
    count(rep) += 1.0;
  });
  if (count.minCoeff() < 1.0) {
    throw std::invalid_argument("burn-in leaves no steps");
  }
  return {replica_mean(incr.cwiseQuotient(count)), replica_mean(form.cwiseQuotient(count))};
}

struct GewekeRow {
  std::string observable;
  double z = 0.0;
  bool pass = true;
};

/// Two-sided Student t quantile (dof degrees of freedom) for the Bonferroni-corrected
/// 5% level over `tests` comparisons.
inline double geweke_threshold(int tests, int dof) {
  const double alpha = 0.05 / std::max(1, tests);
  const double nu = static_cast<double>(dof);
  const double norm = std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) / std::sqrt(nu * std::numbers::pi);
  auto tail = [&](double x) {
    return 1.0 - 2.0 * numerics::integrate_panels(
                           [&](double u) { return norm * std::pow(1.0 + u * u / nu, -0.5 * (nu + 1.0)); }, 0.0, x,
                           64, 16);
  };
  double lo = 0.0;
  double hi = 1.0;
  while (tail(hi) > alpha) {
    hi *= 2.0;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Per replica: mean of the first half minus mean of the second half of the retained
/// records; the replica average of the differences is tested against zero.
inline std::vector<GewekeRow> stationarity_test(const Trajectories& tr, double burn_in) {
  std::vector<GewekeRow> rows;
  const long first = std::lower_bound(tr.times.begin(), tr.times.end(), burn_in - 1e-12) - tr.times.begin();
  const long kept = static_cast<long>(tr.times.size()) - first;
  if (kept < 4) {
    throw std::invalid_argument("too few records after burn-in");
  }
  const long half = kept / 2;
  const double threshold =
      geweke_threshold(static_cast<int>(tr.names.size()), static_cast<int>(tr.series.at(0).rows()) - 1);
  for (std::size_t k = 0; k < tr.names.size(); ++k) {
    const Eigen::MatrixXd& s = tr.series[k];
    Eigen::VectorXd diff(s.rows());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      diff(r) = s.row(r).segment(first, half).mean() - s.row(r).segment(first + kept - half, half).mean();
    }
    const MeanWithError m = replica_mean(diff);
    GewekeRow row;
    row.observable = tr.names[k];
    row.z = m.error > 0.0 ? m.mean / m.error : 0.0;
    row.pass = std::abs(row.z) <= threshold;
    rows.push_back(row);
  }
  return rows;
}

constexpr double kMinR2 = 0.9;
constexpr double kFitThreshold = 0.25;

struct RelaxationEstimate {
  std::string observable;
  std::string method = "autocorrelation_fit";
  double rate = 0.0;  // unit-lattice time
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double r2 = 0.0;
  int fit_points = 0;
  bool flagged = false;
  double continuum_rate = 0.0;
  double continuum_ci_lo = 0.0;
  double continuum_ci_hi = 0.0;
};

struct RelaxationReport {
  std::vector<RelaxationEstimate> observables;
  RelaxationEstimate slowest;
  std::vector<GewekeRow> stationarity;
};

namespace detail {

/// Normalised autocorrelation pooled over the given replicas.
inline std::vector<double> autocorrelation(const Eigen::MatrixXd& s, long first, const std::vector<int>& reps,
                                           long max_lag) {
  const long len = s.cols() - first;
  double mean = 0.0;
  for (int r : reps) {
    mean += s.row(r).segment(first, len).mean();
  }
  mean /= static_cast<double>(reps.size());
  std::vector<double> acf(static_cast<std::size_t>(max_lag + 1), 0.0);
  for (long lag = 0; lag <= max_lag; ++lag) {
    double total = 0.0;
    for (int r : reps) {
      const Eigen::VectorXd x = s.row(r).segment(first, len).transpose().array() - mean;
      total += x.head(len - lag).dot(x.tail(len - lag)) / static_cast<double>(len - lag);
    }
    acf[static_cast<std::size_t>(lag)] = total / static_cast<double>(reps.size());
  }
  const double c0 = acf[0];
  for (double& v : acf) {
    v = c0 > 0.0 ? v / c0 : 0.0;
  }
  return acf;
}

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

/// Least squares for log ρ against lag time over lags 1..count.
inline LineFit fit_log(const std::vector<double>& acf, long count, double record_dt) {
  std::vector<double> x;
  std::vector<double> y;
  for (long lag = 1; lag <= count; ++lag) {
    const double v = acf[static_cast<std::size_t>(lag)];
    if (v <= 0.0) {
      break;
    }
    x.push_back(lag * record_dt);
    y.push_back(std::log(v));
  }
  LineFit out;
  const double n = static_cast<double>(x.size());
  if (n < 2) {
    out.slope = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  out.slope = cxy / vx;
  out.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return out;
}

/// Two-sided 95% Student t quantile.
inline double student_t95(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                 2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086};
  if (dof < 1) {
    return std::numeric_limits<double>::infinity();
  }
  return dof <= 20 ? table[dof - 1] : 1.96 + 2.4 / dof;
}

}  // namespace detail

/// Exponential fit to the pooled autocorrelation over the lags with ρ ≥ 0.25; the
/// confidence interval is a delete-one-group jackknife over replica groups.
inline RelaxationEstimate fit_relaxation(const Trajectories& tr, std::size_t k, double burn_in, int groups = 10) {
  const Eigen::MatrixXd& s = tr.series[k];
  const long first = std::lower_bound(tr.times.begin(), tr.times.end(), burn_in - 1e-12) - tr.times.begin();
  const long len = s.cols() - first;
  const long max_lag = std::max<long>(2, len / 4);
  std::vector<int> all(static_cast<std::size_t>(s.rows()));
  for (int r = 0; r < static_cast<int>(s.rows()); ++r) {
    all[static_cast<std::size_t>(r)] = r;
  }
  RelaxationEstimate est;
  est.observable = tr.names[k];
  const std::vector<double> acf = detail::autocorrelation(s, first, all, max_lag);
  long count = 0;
  while (count + 1 <= max_lag && acf[static_cast<std::size_t>(count + 1)] >= kFitThreshold) {
    ++count;
  }
  count = std::max<long>(count, 2);
  const detail::LineFit fit = detail::fit_log(acf, count, tr.record_dt());
  est.rate = -fit.slope;
  est.r2 = fit.r2;
  est.fit_points = static_cast<int>(count);
  groups = std::min<int>(groups, static_cast<int>(s.rows()));
  std::vector<double> jack;
  for (int g = 0; g < groups; ++g) {
    std::vector<int> reps;
    for (int r : all) {
      if (r % groups != g) {
        reps.push_back(r);
      }
    }
    const auto a = detail::autocorrelation(s, first, reps, count);
    jack.push_back(-detail::fit_log(a, count, tr.record_dt()).slope);
  }
  double mean = 0.0;
  for (double v : jack) {
    mean += v;
  }
  mean /= groups;
  double var = 0.0;
  for (double v : jack) {
    var += (v - mean) * (v - mean);
  }
  const double se = std::sqrt(var * (groups - 1.0) / groups);
  const double half = detail::student_t95(groups - 1) * se;
  est.ci_lo = est.rate - half;
  est.ci_hi = est.rate + half;
  est.flagged = !(est.r2 >= kMinR2) || !std::isfinite(half);
  est.continuum_rate = continuum_rate(tr.kind, tr.params, est.rate);
  est.continuum_ci_lo = continuum_rate(tr.kind, tr.params, est.ci_lo);
  est.continuum_ci_hi = continuum_rate(tr.kind, tr.params, est.ci_hi);
  return est;
}

/// Stationarity check, then one fit per observable; the slowest finite fitted rate is reported.
/// Observables with zero variance (conserved quantities) are skipped.
inline RelaxationReport estimate_relaxation(const Trajectories& tr, double burn_in) {
  RelaxationReport out;
  out.stationarity = stationarity_test(tr, burn_in);
  for (const auto& row : out.stationarity) {
    if (!row.pass) {
      std::ostringstream msg;
      msg << "stationarity test failed for " << row.observable << " (z = " << row.z << ")";
      throw GateFailure("stationarity", msg.str());
    }
  }
  bool found = false;
  for (std::size_t k = 0; k < tr.names.size(); ++k) {
    const Eigen::MatrixXd& s = tr.series[k];
    if ((s.array() - s.mean()).abs().maxCoeff() <= 1e-12 * (1.0 + s.cwiseAbs().maxCoeff())) {
      continue;
    }
    RelaxationEstimate est = fit_relaxation(tr, k, burn_in);
    if (std::isfinite(est.rate) && (!found || est.rate < out.slowest.rate)) {
      out.slowest = est;
      found = true;
    }
    out.observables.push_back(est);
  }
  if (!found) {
    throw std::runtime_error("no observable produced a finite relaxation rate");
  }
  return out;
}

inline nlohmann::json to_json(const RelaxationEstimate& e) {
  return {{"observable", e.observable},
          {"method", e.method},
          {"rate", e.rate},
          {"ci", {e.ci_lo, e.ci_hi}},
          {"r2", e.r2},
          {"fit_points", e.fit_points},
          {"flagged", e.flagged},
          {"continuum_rate", e.continuum_rate},
          {"continuum_ci", {e.continuum_ci_lo, e.continuum_ci_hi}}};
}

inline nlohmann::json to_json(const RelaxationReport& r) {
  nlohmann::json j;
  j["observables"] = nlohmann::json::array();
  for (const auto& e : r.observables) {
    j["observables"].push_back(to_json(e));
  }
  j["slowest"] = to_json(r.slowest);
  j["stationarity"] = nlohmann::json::array();
  for (const auto& g : r.stationarity) {
    j["stationarity"].push_back({{"observable", g.observable}, {"z", g.z}, {"pass", g.pass}});
  }
  return j;
}

/// Thinned observable series as CSV: replica,t,<observables>.
inline std::string series_csv(const Trajectories& tr, int thin = 1) {
  std::ostringstream out;
  out.precision(17);
  out << "replica,t";
  for (const auto& n : tr.names) {
    out << ',' << n;
  }
  out << '\n';
  const Eigen::Index reps = tr.series.empty() ? 0 : tr.series[0].rows();
  for (Eigen::Index r = 0; r < reps; ++r) {
    for (std::size_t c = 0; c < tr.times.size(); c += static_cast<std::size_t>(std::max(1, thin))) {
      out << r << ',' << tr.times[c];
      for (const auto& s : tr.series) {
        out << ',' << s(r, static_cast<Eigen::Index>(c));
      }
      out << '\n';
    }
  }
  return out.str();
}

inline void write_series_csv(const Trajectories& tr, const std::string& path, int thin = 1) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << series_csv(tr, thin);
}

}  // namespace lsi::dynamics
