#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "lsi/lattice/schedule.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::lattice {

/// Exact finite-lattice values of the kernel sums at scale t.
struct AppendixSums {
  double t = 0.0;
  double beta = 0.0;
  double ell = 1.0;
  Eigen::VectorXd U;  // e^{βC_t} - 1 by displacement
  double S1 = 0.0;
  double S2 = 0.0;
  double S3 = 0.0;
  double S4 = 0.0;
  double S_grad = 0.0;
};

/// diff[x * n + y] = index of x - y.
inline std::vector<int> displacement_table(const Torus& torus) {
  const int n = torus.size();
  std::vector<int> out(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      out[static_cast<std::size_t>(x) * n + y] = torus.displacement(x, y);
    }
  }
  return out;
}

inline void require_torus(const CovarianceSchedule& schedule) {
  if (!schedule.on_torus() || schedule.mode() == ScheduleMode::piecewise) {
    throw std::invalid_argument("heat or conservative torus schedule required");
  }
}

inline Eigen::VectorXd interaction_table(const CovarianceSchedule& schedule, double beta, double t) {
  Eigen::VectorXd c = schedule.C_table(t);
  Eigen::VectorXd u(c.size());
  for (Eigen::Index d = 0; d < c.size(); ++d) {
    u(d) = std::expm1(beta * c(d));
    if (!std::isfinite(u(d))) {
      throw std::overflow_error("e^{beta C_t} is not finite");
    }
  }
  return u;
}

/// λ_max(Q_t (D - M) Q_t) for a nonnegative translation-invariant weight M.
/// Both factors are diagonal in the cosine basis.
inline double difference_form_top(const CovarianceSchedule& schedule, const Eigen::VectorXd& weights, double t) {
  const Eigen::VectorXd hat = schedule.spectrum().analyze(weights);
  double top = 0.0;
  for (Eigen::Index k = 0; k < hat.size(); ++k) {
    if (schedule.mask()(k) > 0.0) {
      top = std::max(top, std::exp(-t * schedule.eigenvalues()(k)) * (hat(0) - hat(k)));
    }
  }
  return top;
}

/// Dense Q_t (D - M) Q_t with M = |U_t| (reference form of S2).
inline Eigen::MatrixXd difference_form_matrix(const CovarianceSchedule& schedule, double beta, double t) {
  const Torus& torus = schedule.torus();
  Eigen::VectorXd m = interaction_table(schedule, beta, t).cwiseAbs();
  Eigen::MatrixXd mm = schedule.spectrum().circulant(m, torus);
  Eigen::MatrixXd d = Eigen::MatrixXd(mm.rowwise().sum().asDiagonal());
  Eigen::MatrixXd q = schedule.Q(t);
  return q * (d - mm) * q;
}

/// Σ_{x,y} |U(x-y)| |q(x) - q(y)| for q = Q_t δ_0 (worst case over |f|_1 = 1).
inline double gradient_sum(const Torus& torus, const Eigen::VectorXd& u, const Eigen::VectorXd& q) {
  const int n = torus.size();
  const std::vector<int> diff = displacement_table(torus);
  double total = 0.0;
  for (int d = 0; d < n; ++d) {
    const double w = std::abs(u(d));
    if (w == 0.0) {
      continue;
    }
    double inner = 0.0;
    for (int x = 0; x < n; ++x) {
      inner += std::abs(q(x) - q(diff[static_cast<std::size_t>(x) * n + d]));
    }
    total += w * inner;
  }
  return total;
}

inline AppendixSums lattice_sums(const CovarianceSchedule& schedule, double beta, double t,
                                 bool with_fourfold = true) {
  require_torus(schedule);
  if (!(beta > 0.0)) {
    throw std::invalid_argument("beta must be positive");
  }
  const Torus& torus = schedule.torus();
  const int n = torus.size();
  AppendixSums out;
  out.t = t;
  out.beta = beta;
  out.ell = characteristic_length(t, torus.mesh(), schedule.mass());
  const double ell2 = out.ell * out.ell;
  const Eigen::VectorXd c = schedule.C_table(t);
  out.U = interaction_table(schedule, beta, t);
  for (int d = 0; d < n; ++d) {
    out.S1 += std::abs(std::expm1(-beta * c(d)));
  }
  const Eigen::VectorXd m = out.U.cwiseAbs();
  out.S2 = difference_form_top(schedule, m, t);

  const Eigen::VectorXd cdot = schedule.Cdot_table(t);
  const std::vector<int> diff = displacement_table(torus);
  // h_{x2}(y) = ċ(y) - ċ(y - x2), the δ12 difference with x1 pinned at 0.
  std::vector<double> h(static_cast<std::size_t>(n));
  for (int x2 = 0; x2 < n; ++x2) {
    const double w = m(x2);
    if (w == 0.0) {
      continue;
    }
    for (int y = 0; y < n; ++y) {
      h[static_cast<std::size_t>(y)] = cdot(y) - cdot(diff[static_cast<std::size_t>(y) * n + x2]);
    }
    double three = 0.0;
    for (int y = 0; y < n; ++y) {
      three += std::abs(h[static_cast<std::size_t>(y)]);
    }
    out.S3 += w * three;
    if (with_fourfold) {
      double four = 0.0;
      for (int x3 = 0; x3 < n; ++x3) {
        const double h3 = h[static_cast<std::size_t>(x3)];
        const int* row = diff.data() + static_cast<std::size_t>(x3) * n;
        for (int x4 = 0; x4 < n; ++x4) {
          four += m(row[x4]) * std::abs(h3 - h[static_cast<std::size_t>(x4)]);
        }
      }
      out.S4 += w * four;
    }
  }
  out.S3 *= ell2;
  out.S4 *= ell2;
  out.S_grad = gradient_sum(torus, out.U, schedule.Q_table(t));
  for (double v : {out.S1, out.S2, out.S3, out.S4, out.S_grad}) {
    if (!std::isfinite(v)) {
      throw std::overflow_error("non-finite lattice sum");
    }
  }
  return out;
}

/// Admissible scale: Lm ≥ 1, or t ≤ ε⁻²(m⁻² ∧ L²).
inline bool scale_assumption_holds(double t, double mesh, double mass, double physical_side) {
  if (physical_side * mass >= 1.0) {
    return true;
  }
  return t <= std::min(1.0 / (mass * mass), physical_side * physical_side) / (mesh * mesh);
}

struct LogCovarianceRow {
  double t = 0.0;
  double ell = 1.0;
  double C00 = 0.0;
  double deviation = 0.0;
  bool admissible = true;
};

struct LogCovarianceReport {
  std::vector<LogCovarianceRow> rows;
  double min_deviation = 0.0;
  double max_deviation = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  bool flagged = false;
  int excluded = 0;
};

/// Band for C_t(0,0) - (1/2π) log ℓ_t. Calibrated on 64x64, ε=1, m=0.25, where the
/// deviation spans [0, 0.3054]; frozen with a margin.
constexpr double kLogCovarianceBandLo = -0.05;
constexpr double kLogCovarianceBandHi = 0.40;

inline LogCovarianceReport log_covariance_check(const CovarianceSchedule& schedule, double /*beta*/,
                                                const std::vector<double>& t_grid,
                                                double band_lo = kLogCovarianceBandLo,
                                                double band_hi = kLogCovarianceBandHi) {
  require_torus(schedule);
  if (schedule.mode() != ScheduleMode::heat) {
    throw std::invalid_argument("log covariance check expects a heat schedule");
  }
  const Torus& torus = schedule.torus();
  LogCovarianceReport out;
  out.band_lo = band_lo;
  out.band_hi = band_hi;
  out.min_deviation = std::numeric_limits<double>::infinity();
  out.max_deviation = -std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    LogCovarianceRow row;
    row.t = t;
    row.ell = characteristic_length(t, torus.mesh(), schedule.mass());
    row.C00 = schedule.C_diag(t);
    row.deviation = row.C00 - std::log(row.ell) / (2.0 * std::numbers::pi);
    row.admissible = scale_assumption_holds(t, torus.mesh(), schedule.mass(), torus.physical_side());
    if (row.admissible) {
      out.min_deviation = std::min(out.min_deviation, row.deviation);
      out.max_deviation = std::max(out.max_deviation, row.deviation);
    } else {
      ++out.excluded;
    }
    out.rows.push_back(row);
  }
  if (out.excluded > 0 || out.min_deviation < band_lo || out.max_deviation > band_hi) {
    out.flagged = true;
  }
  return out;
}

struct FourPointMinimum {
  double value = 0.0;
  int x = 0;
  int y = 0;
  bool exhaustive = true;
};

/// min over (x, y, z) of D(0,0) - D(x,y) + D(x,z) - D(y,z) with D = C_t - C_s;
/// z is pinned at the origin by translation invariance.
inline FourPointMinimum ctsdiff_fourpoint_min(const CovarianceSchedule& schedule, double s, double t,
                                              int sample_count = 0, std::uint64_t seed = 1) {
  require_torus(schedule);
  if (!(s >= 0.0 && s <= t)) {
    throw std::invalid_argument("need 0 <= s <= t");
  }
  const Torus& torus = schedule.torus();
  const int n = torus.size();
  const Eigen::VectorXd d = schedule.Cdiff_table(s, t);
  FourPointMinimum best;
  best.value = std::numeric_limits<double>::infinity();
  auto visit = [&](int x, int y) {
    const double v = d(0) - d(torus.displacement(x, y)) + d(x) - d(y);
    if (v < best.value) {
      best.value = v;
      best.x = x;
      best.y = y;
    }
  };
  if (torus.side() <= 16 || sample_count <= 0) {
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        visit(x, y);
      }
    }
  } else {
    best.exhaustive = false;
    numerics::CounterRng rng(seed, 0);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < sample_count; ++k) {
      visit(pick(rng), pick(rng));
    }
  }
  return best;
}

}  // namespace lsi::lattice
