#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsi/certify/mu_schedule.hpp"
#include "lsi/errors.hpp"
#include "lsi/lattice/schedule.hpp"
#include "lsi/numerics/digest.hpp"

namespace lsi::certify {

enum class Theorem { heat, mon, asy };

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::heat:
      return "heat";
    case Theorem::mon:
      return "mon";
    case Theorem::asy:
      return "asy";
  }
  return "unknown";
}

constexpr double kRefinementTolerance = 0.005;

struct Certificate {
  std::optional<double> gamma;
  double log_gamma = -std::numeric_limits<double>::infinity();
  Theorem theorem = Theorem::heat;
  double lambda_min = 0.0;
  MuSchedule mu;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::string config_fingerprint;
  bool certified = false;

  bool has_gamma() const { return gamma.has_value(); }
  std::string reason() const { return diagnostics.value("reason", std::string()); }
};

inline std::string schedule_fingerprint(const MuSchedule& mu, double lambda, Theorem theorem) {
  numerics::Digest d;
  d.update(to_string(theorem));
  d.update(lambda);
  for (std::size_t k = 0; k < mu.size(); ++k) {
    d.update(mu.t[k]);
    d.update(mu.rate[k]);
  }
  if (mu.tail) {
    d.update(to_string(mu.tail->form));
    d.update(mu.tail->start);
    d.update(mu.tail->floor);
    d.update(mu.tail->amplitude);
    d.update(mu.tail->rate);
  }
  return d.hex();
}

inline nlohmann::json to_json(const Certificate& c) {
  nlohmann::json j;
  j["gamma"] = c.gamma ? nlohmann::json(*c.gamma) : nlohmann::json(nullptr);
  j["log_gamma"] = std::isfinite(c.log_gamma) ? nlohmann::json(c.log_gamma) : nlohmann::json(nullptr);
  j["theorem"] = to_string(c.theorem);
  j["lambda_min"] = c.lambda_min;
  nlohmann::json grid = nlohmann::json::array();
  for (std::size_t k = 0; k < c.mu.size(); ++k) {
    grid.push_back({{"t", c.mu.t[k]}, {"mu_dot", c.mu.rate[k]}});
  }
  j["mu_grid"] = grid;
  if (c.mu.tail) {
    const TailBound& tb = *c.mu.tail;
    j["tail"] = {{"T", tb.start},
                 {"form", to_string(tb.form)},
                 {"params", {{"floor", tb.floor}, {"amplitude", tb.amplitude}, {"rate", tb.rate}}}};
  } else {
    j["tail"] = nullptr;
  }
  j["provenance"] = to_string(c.mu.provenance);
  j["certified"] = c.certified;
  j["diagnostics"] = c.diagnostics;
  j["config_fingerprint"] = c.config_fingerprint;
  return j;
}

struct ScaleIntegral {
  double log_value = std::numeric_limits<double>::infinity();
  double log_grid = -std::numeric_limits<double>::infinity();
  double log_tail = -std::numeric_limits<double>::infinity();
  bool finite = false;
  std::string reason;
};

namespace detail {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) {
    return b;
  }
  if (b == -std::numeric_limits<double>::infinity()) {
    return a;
  }
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// log ∫_0^Δ e^{a + (b-a)u/Δ} du.
inline double log_linear_exp(double a, double b, double width) {
  const double d = b - a;
  if (std::abs(d) < 1e-10) {
    return std::log(width) + a + std::log1p(0.5 * d);
  }
  if (d > 0.0) {
    return std::log(width) + b + std::log(-std::expm1(-d) / d);
  }
  return std::log(width) + a + std::log(std::expm1(d) / d);
}

}  // namespace detail

/// log ∫_0^∞ e^{-κt - 2m_t} dt, with m the trapezoid integral of the schedule,
/// the exponent interpolated linearly between grid points, and the tail bounded
/// analytically from the descriptor.
inline ScaleIntegral log_scale_integral(const MuSchedule& mu, double kappa) {
  mu.validate();
  ScaleIntegral out;
  const std::vector<double> m = mu.integrated();
  std::vector<double> expo(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) {
    expo[k] = -kappa * mu.t[k] - 2.0 * m[k];
  }
  for (std::size_t k = 0; k + 1 < mu.size(); ++k) {
    out.log_grid = detail::log_add(out.log_grid, detail::log_linear_exp(expo[k], expo[k + 1], mu.t[k + 1] - mu.t[k]));
  }
  if (!mu.tail) {
    out.reason = "missing tail descriptor";
    return out;
  }
  const TailBound& tb = *mu.tail;
  const double horizon = mu.horizon();
  const double decay = kappa + 2.0 * tb.floor;
  if (!(decay > 0.0)) {
    out.reason = "integral diverges: tail decay rate is not positive";
    return out;
  }
  out.log_tail = expo.back() + 2.0 * tb.slack(horizon) - std::log(decay);
  out.log_value = detail::log_add(out.log_grid, out.log_tail);
  out.finite = std::isfinite(out.log_value);
  if (!out.finite) {
    out.reason = "integral is not finite";
  }
  return out;
}

namespace detail {

inline void fill_gamma(Certificate& c, const ScaleIntegral& full, double log_factor) {
  c.diagnostics["grid_points"] = c.mu.size();
  if (!full.finite) {
    c.diagnostics["reason"] = full.reason;
    c.certified = false;
    return;
  }
  c.log_gamma = -(full.log_value + log_factor);
  const double g = std::exp(c.log_gamma);
  if (g > 0.0 && std::isfinite(g)) {
    c.gamma = g;
  } else {
    c.diagnostics["reason"] = "gamma outside double range; see log_gamma";
  }
  c.diagnostics["log_integral"] = full.log_value + log_factor;
  c.diagnostics["tail_fraction"] = std::exp(full.log_tail - full.log_value);
}

inline void refinement_report(Certificate& c, const ScaleIntegral& full, const ScaleIntegral& coarse) {
  double change = std::numeric_limits<double>::infinity();
  if (full.finite && coarse.finite) {
    change = std::abs(std::expm1(full.log_value - coarse.log_value));
  }
  c.diagnostics["halving_change"] = std::isfinite(change) ? nlohmann::json(change) : nlohmann::json(nullptr);
  c.diagnostics["refinement_converged"] = change < kRefinementTolerance;
  if (!(change < kRefinementTolerance)) {
    c.certified = false;
  }
}

inline void require_tail(const MuSchedule& mu) {
  if (!mu.tail && mu.rate.back() < 0.0) {
    std::ostringstream msg;
    msg << "no tail descriptor and negative rate " << mu.rate.back() << " at T_max = " << mu.horizon();
    throw NoCertificate(msg.str());
  }
}

}  // namespace detail

/// 1/γ = ∫_0^∞ e^{-λt - 2μ_t} dt.
inline Certificate gamma_heat(double lambda_min, const MuSchedule& mu, std::string fingerprint = {}) {
  if (!(lambda_min > 0.0)) {
    throw std::invalid_argument("lambda_min must be positive");
  }
  mu.validate();
  detail::require_tail(mu);
  Certificate c;
  c.theorem = Theorem::heat;
  c.lambda_min = lambda_min;
  c.mu = mu;
  c.certified = mu.provenance == Provenance::certified_pipeline;
  c.config_fingerprint = fingerprint.empty() ? schedule_fingerprint(mu, lambda_min, c.theorem) : fingerprint;
  const ScaleIntegral full = log_scale_integral(mu, lambda_min);
  detail::fill_gamma(c, full, 0.0);
  if (c.has_gamma() || std::isfinite(c.log_gamma)) {
    detail::refinement_report(c, full, log_scale_integral(mu.coarsened(), lambda_min));
  }
  return c;
}

/// 1/γ = |Ċ_0| ∫_0^∞ e^{-2λ_s} ds for a schedule of λ̇.
inline Certificate gamma_mon(const lattice::CovarianceSchedule& schedule, const MuSchedule& lambda_dots,
                             std::string fingerprint = {}) {
  if (schedule.mode() == lattice::ScheduleMode::piecewise) {
    throw std::invalid_argument("monotone certificate needs a differentiable (heat or conservative) schedule");
  }
  lambda_dots.validate();
  detail::require_tail(lambda_dots);
  Certificate c;
  c.theorem = Theorem::mon;
  c.lambda_min = schedule.lambda_min();
  c.mu = lambda_dots;
  c.certified = lambda_dots.provenance == Provenance::certified_pipeline;
  c.config_fingerprint = fingerprint.empty() ? schedule_fingerprint(lambda_dots, c.lambda_min, c.theorem) : fingerprint;
  const double cdot0 = schedule.Cdot_norm(0.0);
  c.diagnostics["cdot0_norm"] = cdot0;
  const ScaleIntegral full = log_scale_integral(lambda_dots, 0.0);
  detail::fill_gamma(c, full, std::log(cdot0));
  if (std::isfinite(c.log_gamma)) {
    detail::refinement_report(c, full, log_scale_integral(lambda_dots.coarsened(), 0.0));
  }
  return c;
}

/// 1/γ = Σ_j |Ċ_j| ∫_{block j} e^{-2λ_s} ds with λ̇ constant on each block; exact,
/// and truncated once C_t = C_∞.
inline Certificate gamma_asy(const lattice::CovarianceSchedule& schedule, const std::vector<double>& lambda_dots,
                             Provenance provenance = Provenance::certified_pipeline, std::string fingerprint = {}) {
  if (schedule.mode() != lattice::ScheduleMode::piecewise) {
    throw std::invalid_argument("asymptotic certificate needs a piecewise schedule");
  }
  const auto& blocks = schedule.blocks();
  if (lambda_dots.size() != blocks.size()) {
    throw std::invalid_argument("need one lambda_dot per block");
  }
  Certificate c;
  c.theorem = Theorem::asy;
  c.lambda_min = schedule.lambda_min();
  c.mu.provenance = provenance;
  c.certified = provenance == Provenance::certified_pipeline;
  double lam = 0.0;
  double log_total = -std::numeric_limits<double>::infinity();
  nlohmann::json per_block = nlohmann::json::array();
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const double d = blocks[j].duration;
    const double rate = lambda_dots[j];
    if (!std::isfinite(rate)) {
      throw std::invalid_argument("lambda_dot must be finite");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(blocks[j].rate, Eigen::EigenvaluesOnly);
    const double norm = eig.eigenvalues().maxCoeff();
    c.mu.t.push_back(schedule.block_starts()[j]);
    c.mu.rate.push_back(rate);
    if (norm > 0.0) {
      const double piece = std::log(norm) + detail::log_linear_exp(-2.0 * lam, -2.0 * (lam + rate * d), d);
      log_total = detail::log_add(log_total, piece);
    }
    per_block.push_back({{"start", schedule.block_starts()[j]}, {"duration", d}, {"cdot_norm", norm}});
    lam += rate * d;
  }
  c.mu.t.push_back(schedule.block_end());
  c.mu.rate.push_back(lambda_dots.back());
  c.mu.tail = TailBound::nonnegative(schedule.block_end());
  c.config_fingerprint = fingerprint.empty() ? schedule_fingerprint(c.mu, c.lambda_min, c.theorem) : fingerprint;
  c.diagnostics["blocks"] = per_block;
  c.diagnostics["projection"] = "vectors projected onto range(C_inf - C_t)";
  ScaleIntegral full;
  full.log_grid = log_total;
  full.log_value = log_total;
  full.finite = std::isfinite(log_total);
  full.reason = full.finite ? "" : "all block rates vanish";
  detail::fill_gamma(c, full, 0.0);
  c.diagnostics["tail_fraction"] = 0.0;
  c.diagnostics["halving_change"] = 0.0;
  c.diagnostics["refinement_converged"] = true;
  return c;
}

}  // namespace lsi::certify
