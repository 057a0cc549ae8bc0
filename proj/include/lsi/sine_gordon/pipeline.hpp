#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "lsi/certify/gamma.hpp"
#include "lsi/errors.hpp"
#include "lsi/lattice/schedule.hpp"
#include "lsi/lattice/sums.hpp"
#include "lsi/numerics/digest.hpp"
#include "lsi/sine_gordon/coefficients.hpp"
#include "lsi/sine_gordon/model.hpp"
#include "lsi/sine_gordon/params.hpp"

namespace lsi::sine_gordon {

constexpr int kSeriesTerms = 60;

/// Σ_{n≥1, n≠2} n^n/n! |a|^n B^{n-1}, exact to n = 60 plus the geometric tail from n^n/n! ≤ e^n.
/// Returns +∞ when e|a|B ≥ 1.
inline double hessian_series(double a, double b) {
  a = std::abs(a);
  if (a == 0.0) {
    return 0.0;
  }
  if (b == 0.0) {
    return a;
  }
  const double ratio = std::exp(1.0) * a * b;
  if (!(ratio < 1.0)) {
    return std::numeric_limits<double>::infinity();
  }
  double sum = a;
  for (int n = 3; n <= kSeriesTerms; ++n) {
    sum += std::exp(n * std::log(n) - std::lgamma(n + 1.0) + n * std::log(a) + (n - 1) * std::log(b));
  }
  sum += std::exp((kSeriesTerms + 1) * std::log(std::exp(1.0) * a) + kSeriesTerms * std::log(b)) / (1.0 - ratio);
  return sum;
}

/// Σ_{n≥1, n≠2} (n/n!) n^{n-2}|a|^n B^{n-1}, same tail policy.
inline double gradient_series(double a, double b) {
  a = std::abs(a);
  if (a == 0.0) {
    return 0.0;
  }
  if (b == 0.0) {
    return a;
  }
  const double ratio = std::exp(1.0) * a * b;
  if (!(ratio < 1.0)) {
    return std::numeric_limits<double>::infinity();
  }
  double sum = a;
  for (int n = 3; n <= kSeriesTerms; ++n) {
    sum += std::exp((n - 1) * std::log(n) - std::lgamma(n + 1.0) + n * std::log(a) + (n - 1) * std::log(b));
  }
  sum += std::exp((kSeriesTerms + 1) * std::log(std::exp(1.0) * a) + kSeriesTerms * std::log(b)) / (1.0 - ratio);
  return sum;
}

/// Scale profile of the series radius: t for t ≤ 1, ℓ_t² beyond (t ∧ (εm)^{-2}).
inline double radius_profile(double t, double mesh, double mass) { return std::min(t, 1.0 / (mesh * mesh * mass * mass)); }

/// Finite-lattice constant C with |||Ṽ_t|||_3 ≤ 3|a_t|³ (C b_t)² on the calibration times,
/// b_t the radius profile.
struct ThreeBodyConstant {
  double value = 0.0;
  std::vector<double> t;
  std::vector<double> ratio;  // sqrt(|||Ṽ_t|||_3 / 3|a_t|³) / b_t
};

inline std::vector<double> calibration_times(const SineGordonParams& p) {
  const double saturation = 1.0 / (p.mesh * p.mesh * p.mass * p.mass);
  std::vector<double> out;
  for (double t = 0.0625; t <= 8.0 * saturation * 1.0000001; t *= 2.0) {
    out.push_back(t);
  }
  return out;
}

inline ThreeBodyConstant three_body_constant(const SineGordonParams& p, const lattice::CovarianceSchedule& s) {
  static std::map<std::tuple<double, double, double, double, int>, ThreeBodyConstant> cache;
  static std::mutex mutex;
  const auto key = std::make_tuple(p.beta, p.mesh, p.side, p.mass, static_cast<int>(s.mode()));
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) {
      return it->second;
    }
  }
  const CoefficientEngine engine(s, p.beta, 1.0);
  ThreeBodyConstant out;
  for (double t : calibration_times(p)) {
    const double a = engine.amplitude(t);
    const double r = std::sqrt(engine.coeff_norm(3, t) / (3.0 * a * a * a)) / radius_profile(t, p.mesh, p.mass);
    out.t.push_back(t);
    out.ratio.push_back(r);
    out.value = std::max(out.value, r);
  }
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, out);
  return out;
}

/// Everything the certificate needs at one scale t.
struct ScaleData {
  double t = 0.0;
  double ell = 1.0;
  double q_norm2 = 1.0;  // ‖Q_t‖²
  double q_row = 1.0;    // sup_x Σ_y |Q_t(x,y)|
  double a = 0.0;        // a_t = z_t / 2
  double z_t = 0.0;
  double B = 0.0;
  double gate_ratio = 0.0;  // e|a_t|B_t
  bool gate_ok = true;
  lattice::AppendixSums sums;
  double hess_n2 = 0.0;
  double series = 0.0;
  double mu_dot = 0.0;
  double grad_sup = 0.0;  // sup_x |(Q_t ∇V_t)_x|
};

/// Lower bound on λ_min(Q_t He V_t^{(2)} Q_t), uniform in φ: neutral part by the
/// difference form, charged part by the norm route.
inline double hess_bound_n2(const SineGordonParams& p, const lattice::CovarianceSchedule& s, double t) {
  const double a = 0.5 * coupling_at(p, s, t).z_t;
  if (a == 0.0 || t == 0.0) {
    return 0.0;
  }
  const lattice::AppendixSums sums = lattice::lattice_sums(s, p.beta, t, false);
  return -2.0 * p.beta * a * a * sums.S2 - 4.0 * p.beta * a * a * sums.S1 * s.Cdot_norm(t);
}

class SineGordonPipeline {
 public:
  SineGordonPipeline(const SineGordonParams& p, lattice::ScheduleMode mode)
      : params_(p), schedule_(sg_schedule(p, mode)), mode_(mode) {
    params_.validate_for_certification();
    if (p.beta >= 4.0 * kPi && p.z != 0.0) {
      three_body_ = three_body_constant(p, schedule_);
    }
  }

  const SineGordonParams& params() const { return params_; }
  const lattice::CovarianceSchedule& schedule() const { return schedule_; }
  double lambda() const { return schedule_.lambda_min(); }
  const std::optional<ThreeBodyConstant>& three_body() const { return three_body_; }

  double series_radius(double t) const {
    if (t == 0.0 || params_.z == 0.0) {
      return 0.0;
    }
    if (params_.beta < 4.0 * kPi) {
      return params_.safety * mayer_M(schedule_, params_.beta, t);
    }
    return params_.safety * three_body_->value * radius_profile(t, params_.mesh, params_.mass);
  }

  ScaleData scale(double t) const {
    ScaleData d;
    d.t = t;
    const CouplingRow row = coupling_at(params_, schedule_, t);
    d.ell = row.ell;
    d.z_t = row.z_t;
    d.a = 0.5 * row.z_t;
    d.q_norm2 = schedule_.Cdot_norm(t);
    d.q_row = schedule_.Q_row_abs_sum(t);
    d.B = series_radius(t);
    d.gate_ratio = std::exp(1.0) * std::abs(d.a) * d.B;
    d.gate_ok = d.gate_ratio < 1.0;
    const double beta = params_.beta;
    if (t > 0.0) {
      d.sums = lattice::lattice_sums(schedule_, beta, t, false);
    } else {
      d.sums.t = 0.0;
      d.sums.beta = beta;
    }
    const double a2 = d.a * d.a;
    d.hess_n2 = t > 0.0 ? -2.0 * beta * a2 * d.sums.S2 - 4.0 * beta * a2 * d.sums.S1 * d.q_norm2 : 0.0;
    if (d.gate_ok) {
      d.series = hessian_series(d.a, d.B);
      d.mu_dot = d.hess_n2 - 2.0 * beta * d.q_norm2 * d.series;
      d.grad_sup = a2 * std::sqrt(beta) * d.sums.S_grad +
                   2.0 * std::sqrt(beta) * d.q_row * (a2 * d.sums.S1 + gradient_series(d.a, d.B));
    } else {
      d.series = std::numeric_limits<double>::infinity();
      d.mu_dot = -std::numeric_limits<double>::infinity();
      d.grad_sup = std::numeric_limits<double>::infinity();
    }
    return d;
  }

  /// φ-uniform μ̇_t; throws when the series gate fails.
  double mu_dot_sg(double t) const {
    const ScaleData d = scale(t);
    if (!d.gate_ok) {
      std::ostringstream msg;
      msg << "series convergence gate failed at t=" << t << ": e|a_t|B_t = " << d.gate_ratio;
      throw NoCertificate(msg.str());
    }
    return d.mu_dot;
  }

  std::vector<double> default_grid(int points, double horizon_factor = 40.0) const {
    if (points < 4) {
      throw std::invalid_argument("need at least 4 grid points");
    }
    const double horizon = horizon_factor / lambda();
    std::vector<double> g(static_cast<std::size_t>(points));
    const double top = std::log1p(horizon);
    for (int k = 0; k < points; ++k) {
      g[static_cast<std::size_t>(k)] = k == 0 ? 0.0 : std::expm1(top * k / (points - 1));
    }
    return g;
  }

  std::vector<ScaleData> scan(const std::vector<double>& grid) const {
    std::vector<ScaleData> out;
    out.reserve(grid.size());
    for (double t : grid) {
      out.push_back(scale(t));
    }
    return out;
  }

  /// μ̇ schedule on the grid when the gate holds everywhere, with an exponential tail
  /// envelope max |μ̇_t| e^{λt} over t ∈ {T, 2T, 4T, 8T}.
  std::optional<certify::MuSchedule> small_z_schedule(const std::vector<ScaleData>& data) const {
    certify::MuSchedule mu;
    for (const ScaleData& d : data) {
      if (!d.gate_ok) {
        return std::nullopt;
      }
      mu.t.push_back(d.t);
      mu.rate.push_back(d.mu_dot);
    }
    const double horizon = mu.t.back();
    const double lam = lambda();
    double amp = std::abs(data.back().mu_dot) * std::exp(lam * horizon);
    for (double f : {2.0, 4.0, 8.0}) {
      const ScaleData d = scale(f * horizon);
      if (!d.gate_ok) {
        return std::nullopt;
      }
      amp = std::max(amp, std::abs(d.mu_dot) * std::exp(lam * f * horizon));
    }
    mu.tail = certify::TailBound::exp_decay(horizon, amp, lam);
    return mu;
  }

  /// Small-z bound up to grid index j, then the Markov-semigroup bound
  /// μ̇_t ≥ (min(μ̇_{t0}, 0) - N sup|Q_{t0}∇V_{t0}|²) e^{-λ(t - t0)}.
  certify::MuSchedule large_z_split(const std::vector<ScaleData>& data, std::size_t j) const {
    if (j >= data.size()) {
      throw std::out_of_range("t0 index outside the grid");
    }
    for (std::size_t i = 0; i <= j; ++i) {
      if (!data[i].gate_ok) {
        throw NoCertificate("t0 is not admissible: the series gate fails before t0");
      }
    }
    const double lam = lambda();
    const double t0 = data[j].t;
    const double g2 = static_cast<double>(params_.sites()) * data[j].grad_sup * data[j].grad_sup;
    const double start = std::min(data[j].mu_dot, 0.0) - g2;
    certify::MuSchedule mu;
    for (std::size_t i = 0; i < data.size(); ++i) {
      mu.t.push_back(data[i].t);
      mu.rate.push_back(i <= j ? data[i].mu_dot : start * std::exp(-lam * (data[i].t - t0)));
    }
    mu.tail = certify::TailBound::exp_decay(mu.t.back(), std::abs(start) * std::exp(lam * t0), lam);
    return mu;
  }

 private:
  SineGordonParams params_;
  lattice::CovarianceSchedule schedule_;
  lattice::ScheduleMode mode_;
  std::optional<ThreeBodyConstant> three_body_;
};

struct CertifyOptions {
  int grid_points = 128;
  double horizon_factor = 40.0;
  bool allow_large_z = true;
};

struct SineGordonCertificate {
  certify::Certificate certificate;
  double log_gamma_unit = -std::numeric_limits<double>::infinity();
  double log_gamma_continuum = -std::numeric_limits<double>::infinity();
  std::optional<double> gamma_unit;
  std::optional<double> gamma_continuum;
  std::optional<double> t0;  // nullopt means ∞ (pure small-z)
  bool small_z = true;
  double zeta2_lattice = 0.0;
  double mu_star = 0.0;
  nlohmann::json report;
};

inline std::string params_fingerprint(const SineGordonParams& p, const char* dynamics, const CertifyOptions& o) {
  numerics::Digest d;
  d.update(dynamics);
  for (double v : {p.beta, p.z, p.mass, p.mesh, p.side, p.safety, static_cast<double>(o.grid_points),
                   o.horizon_factor}) {
    d.update(v);
  }
  return d.hex();
}

inline nlohmann::json params_json(const SineGordonParams& p) {
  return {{"beta", p.beta}, {"beta_over_pi", p.beta / kPi}, {"z", p.z},     {"mass", p.mass},
          {"mesh", p.mesh}, {"side", p.side},               {"z0", p.z0()}, {"sites_per_axis", p.sites_per_axis()},
          {"safety", p.safety}};
}

namespace detail {

inline double mu_integral(const certify::MuSchedule& mu) {
  double total = 0.0;
  for (std::size_t k = 1; k < mu.size(); ++k) {
    total += 0.5 * (std::abs(mu.rate[k - 1]) + std::abs(mu.rate[k])) * (mu.t[k] - mu.t[k - 1]);
  }
  if (mu.tail) {
    total += mu.tail->slack(mu.horizon());
  }
  return total;
}

inline SineGordonCertificate certify(const SineGordonParams& p, lattice::ScheduleMode mode, const CertifyOptions& o) {
  const char* dynamics = mode == lattice::ScheduleMode::heat ? "glauber" : "kawasaki";
  const SineGordonPipeline pipe(p, mode);
  const std::vector<double> grid = pipe.default_grid(o.grid_points, o.horizon_factor);
  const std::vector<ScaleData> data = pipe.scan(grid);
  const double lam = pipe.lambda();
  const std::string fingerprint = params_fingerprint(p, dynamics, o);

  SineGordonCertificate out;
  std::optional<certify::Certificate> best;
  auto consider = [&](const certify::MuSchedule& mu, std::optional<double> t0) {
    certify::Certificate c = certify::gamma_heat(lam, mu, fingerprint);
    if (!std::isfinite(c.log_gamma)) {
      return;
    }
    if (!best || c.log_gamma > best->log_gamma) {
      best = c;
      out.t0 = t0;
    }
  };
  if (auto mu = pipe.small_z_schedule(data)) {
    consider(*mu, std::nullopt);
  }
  if (o.allow_large_z) {
    for (std::size_t j = 0; j < data.size() && data[j].gate_ok; ++j) {
      consider(pipe.large_z_split(data, j), data[j].t);
    }
  }
  if (!best) {
    throw NoCertificate("no admissible split scale: the series gate fails on the whole grid");
  }
  out.small_z = !out.t0.has_value();
  out.certificate = *best;
  out.mu_star = mu_integral(best->mu);
  const double mesh2 = p.mesh * p.mesh;
  double log_scale = -std::log(mesh2);
  if (mode == lattice::ScheduleMode::conservative) {
    const double side_sites = p.sites_per_axis();
    out.zeta2_lattice = (2.0 - 2.0 * std::cos(2.0 * kPi / side_sites)) / mesh2;
    log_scale += std::log(out.zeta2_lattice);
  }
  out.log_gamma_unit = best->log_gamma;
  out.log_gamma_continuum = best->log_gamma + log_scale;
  if (best->gamma) {
    out.gamma_unit = *best->gamma;
  }
  const double cont = std::exp(out.log_gamma_continuum);
  if (cont > 0.0 && std::isfinite(cont)) {
    out.gamma_continuum = cont;
  }

  nlohmann::json rep;
  rep["params"] = params_json(p);
  rep["dynamics"] = dynamics;
  nlohmann::json flow = nlohmann::json::array();
  nlohmann::json s1 = nlohmann::json::array(), s2 = nlohmann::json::array(), s3 = nlohmann::json::array(),
                 sg = nlohmann::json::array();
  nlohmann::json n1 = nlohmann::json::array(), bb = nlohmann::json::array(), gate = nlohmann::json::array();
  double hess_const = 0.0;
  double max_gate = 0.0;
  bool all_gate = true;
  for (const ScaleData& d : data) {
    flow.push_back({{"t", d.t}, {"ell", d.ell}, {"theta", std::sqrt(d.q_norm2)}, {"z_t", d.z_t}});
    s1.push_back(d.sums.S1);
    s2.push_back(d.sums.S2);
    s3.push_back(d.sums.S3);
    sg.push_back(d.sums.S_grad);
    n1.push_back(std::abs(d.a));
    bb.push_back(d.B);
    gate.push_back(d.gate_ratio);
    max_gate = std::max(max_gate, d.gate_ratio);
    all_gate = all_gate && d.gate_ok;
    const double zz = d.ell * d.ell * d.z_t;
    if (zz != 0.0 && d.q_norm2 > 0.0) {
      hess_const = std::max(hess_const, std::abs(d.hess_n2) / (zz * zz * d.q_norm2));
    }
  }
  rep["flow"] = flow;
  rep["sums"] = {{"t", grid}, {"S1", s1}, {"S2", s2}, {"S3", s3}, {"S_grad", sg}};
  if (p.sites() <= 256 && p.z != 0.0) {
    rep["sums"]["S4_at_t1"] = lattice::lattice_sums(pipe.schedule(), p.beta, 1.0, true).S4;
  }
  rep["norms"] = {{"1", n1}, {"series_radius", bb}};
  if (pipe.three_body()) {
    rep["norms"]["three_body_constant"] = pipe.three_body()->value;
    rep["norms"]["three_body_calibration"] = {{"t", pipe.three_body()->t}, {"ratio", pipe.three_body()->ratio}};
    rep["norms"]["note"] = "orders >= 4 use the measured order-3 constant as a geometric anchor";
  }
  rep["mu_grid"] = certify::to_json(*best)["mu_grid"];
  rep["gamma_unit_lattice"] = out.gamma_unit ? nlohmann::json(*out.gamma_unit) : nlohmann::json(nullptr);
  rep["log_gamma_unit_lattice"] = out.log_gamma_unit;
  rep["gamma_continuum"] = out.gamma_continuum ? nlohmann::json(*out.gamma_continuum) : nlohmann::json(nullptr);
  rep["log_gamma_continuum"] = out.log_gamma_continuum;
  rep["lambda_min"] = lam;
  if (mode == lattice::ScheduleMode::conservative) {
    rep["zeta2_lattice"] = out.zeta2_lattice;
    rep["zeta2_limit"] = std::pow(2.0 * kPi / p.side, 2);
  }
  rep["gates"] = {{"convergence", all_gate},
                  {"max_ratio", max_gate},
                  {"t0", out.t0 ? nlohmann::json(*out.t0) : nlohmann::json("inf")},
                  {"large_z", !out.small_z}};
  const double naive = lam - p.beta * std::abs(p.z0());
  rep["bakry_emery"] = {{"unit_lattice", naive}, {"continuum", naive * std::exp(log_scale)}};
  rep["hess_n2_constant"] = hess_const;
  rep["mu_star"] = out.mu_star;
  rep["mu_star_ratio"] = p.reduced_coupling() > 0.0 ? nlohmann::json(out.mu_star / p.reduced_coupling())
                                                    : nlohmann::json(nullptr);
  rep["reduced_coupling"] = p.reduced_coupling();
  rep["certified"] = best->certified;
  out.report = rep;
  out.certificate.diagnostics["dynamics"] = dynamics;
  out.certificate.diagnostics["t0"] = rep["gates"]["t0"];
  out.certificate.diagnostics["gamma_continuum"] = rep["gamma_continuum"];
  out.certificate.diagnostics["log_gamma_continuum"] = out.log_gamma_continuum;
  return out;
}

}  // namespace detail

inline SineGordonCertificate certify_glauber(const SineGordonParams& p, const CertifyOptions& o = {}) {
  return detail::certify(p, lattice::ScheduleMode::heat, o);
}

inline SineGordonCertificate certify_kawasaki(const SineGordonParams& p, const CertifyOptions& o = {}) {
  return detail::certify(p, lattice::ScheduleMode::conservative, o);
}

}  // namespace lsi::sine_gordon
