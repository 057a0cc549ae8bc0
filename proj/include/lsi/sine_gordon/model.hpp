#pragma once

#include <cmath>
#include <vector>

#include "lsi/flow/potential.hpp"
#include "lsi/lattice/schedule.hpp"
#include "lsi/lattice/sums.hpp"
#include "lsi/numerics/quadrature.hpp"
#include "lsi/sine_gordon/params.hpp"

namespace lsi::sine_gordon {

/// V_0(φ) = Σ_x z_0 cos(√β φ_x) on the lattice of the parameters.
inline flow::PotentialModel sg_model(const SineGordonParams& p) {
  p.validate();
  return flow::cosine_potential(p.sites(), p.beta, p.z0());
}

inline lattice::CovarianceSchedule sg_schedule(const SineGordonParams& p,
                                               lattice::ScheduleMode mode = lattice::ScheduleMode::heat) {
  p.validate();
  return lattice::CovarianceSchedule::on_torus(p.torus(), p.mass, mode);
}

struct CouplingRow {
  double t = 0.0;
  double ell = 1.0;
  double theta = 1.0;  // e^{-½ m²ε² t}
  double z_t = 0.0;    // e^{-(β/2) C_t(0,0)} z_0
  double zz_t = 0.0;   // ℓ_t² z_t
};

struct CouplingFlow {
  std::vector<CouplingRow> rows;
  double sup_ratio = 0.0;  // sup_t |ℓ_t² z_t| / (|z| m^{-2+β/4π})
};

inline CouplingRow coupling_at(const SineGordonParams& p, const lattice::CovarianceSchedule& s, double t) {
  CouplingRow r;
  r.t = t;
  r.ell = lattice::characteristic_length(t, p.mesh, p.mass);
  r.theta = std::exp(-0.5 * p.mass * p.mass * p.mesh * p.mesh * t);
  r.z_t = std::exp(-0.5 * p.beta * s.C_diag(t)) * p.z0();
  r.zz_t = r.ell * r.ell * r.z_t;
  return r;
}

inline CouplingFlow coupling_flow(const SineGordonParams& p, const lattice::CovarianceSchedule& s,
                                  const std::vector<double>& grid) {
  CouplingFlow out;
  const double reduced = p.reduced_coupling();
  for (double t : grid) {
    out.rows.push_back(coupling_at(p, s, t));
    if (reduced > 0.0) {
      out.sup_ratio = std::max(out.sup_ratio, std::abs(out.rows.back().zz_t) / reduced);
    }
  }
  return out;
}

/// sup_x Σ_y |Ċ_s(x,y)|.
inline double kernel_row_sum(const lattice::CovarianceSchedule& s, double t) { return s.Cdot_row_abs_sum(t); }

/// ‖u̇_s‖ = sup_{ξ1} Σ_{ξ2} |u̇_s(ξ1,ξ2)| = 2β Σ_y |Ċ_s(0,y)| (both charges of ξ2 counted).
inline double u_dot_norm(const lattice::CovarianceSchedule& s, double beta, double t) {
  return 2.0 * beta * kernel_row_sum(s, t);
}

/// M_t = ∫_0^t ‖u̇_s‖ e^{β(C_t - C_s)(0,0)} ds.
inline double mayer_M(const lattice::CovarianceSchedule& s, double beta, double t) {
  if (t < 0.0) {
    throw std::invalid_argument("t must be nonnegative");
  }
  if (t == 0.0) {
    return 0.0;
  }
  auto integrand = [&](double u) { return u_dot_norm(s, beta, u) * std::exp(beta * s.Cdiff_diag(u, t)); };
  double total = 0.0;
  double lo = 0.0;
  double hi = std::min(t, 0.5);
  while (lo < t) {
    total += numerics::integrate_adaptive(integrand, lo, hi, 1e-10, 1 << 14).value;
    lo = hi;
    hi = std::min(t, 2.0 * hi);
  }
  return total;
}

}  // namespace lsi::sine_gordon
