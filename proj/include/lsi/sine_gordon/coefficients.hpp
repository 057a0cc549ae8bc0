#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "lsi/lattice/schedule.hpp"
#include "lsi/lattice/sums.hpp"
#include "lsi/numerics/quadrature.hpp"
#include "lsi/numerics/rng.hpp"

namespace lsi::sine_gordon {

struct Charge {
  int site = 0;
  int sigma = 1;
};

struct ChargeConfig {
  std::vector<Charge> charges;

  int order() const { return static_cast<int>(charges.size()); }
  int total_charge() const {
    int s = 0;
    for (const Charge& c : charges) {
      s += c.sigma;
    }
    return s;
  }
  bool neutral() const { return total_charge() == 0; }

  void validate(int sites) const {
    for (const Charge& c : charges) {
      if (c.site < 0 || c.site >= sites || (c.sigma != 1 && c.sigma != -1)) {
        throw std::invalid_argument("charge configuration has an invalid site or charge");
      }
    }
  }
};

/// Fourier coefficients Ṽ_t(ξ_1, ..., ξ_n) of the renormalised cosine potential,
/// with V_t(φ) = Σ_n (1/n!) Σ_ξ Ṽ_t(ξ) e^{i√β Σ_k σ_k φ(x_k)} and Ṽ_0 = amplitude0 at n = 1.
class CoefficientEngine {
 public:
  CoefficientEngine(const lattice::CovarianceSchedule& schedule, double beta, double amplitude0)
      : schedule_(schedule), beta_(beta), a0_(amplitude0) {
    lattice::require_torus(schedule_);
    if (!(beta > 0.0)) {
      throw std::invalid_argument("beta must be positive");
    }
    const lattice::Torus& torus = schedule_.torus();
    n_ = torus.size();
    diff_ = lattice::displacement_table(torus);
  }

  const lattice::CovarianceSchedule& schedule() const { return schedule_; }
  double beta() const { return beta_; }
  double amplitude0() const { return a0_; }
  int sites() const { return n_; }

  /// Ṽ_t at order one: e^{-(β/2)C_t(0,0)} times the bare amplitude.
  double amplitude(double t) const { return a0_ * std::exp(-0.5 * beta_ * schedule_.C_diag(t)); }

  double coeff_n1(const Charge& xi, double t) const {
    check(xi);
    return amplitude(t);
  }

  /// a_t² (1 - e^{-βσ1σ2 C_t(x1,x2)}).
  double coeff_n2(const Charge& x1, const Charge& x2, double t) const {
    check(x1);
    check(x2);
    const Eigen::VectorXd c = schedule_.C_table(t);
    const double a = amplitude(t);
    return pair_value(a, x1.sigma * x2.sigma, c(disp(x1.site, x2.site)));
  }

  /// Integral form of the flow, evaluated recursively with adaptive quadrature in s.
  double coeff_duhamel(const ChargeConfig& xi, double t, double rel_tol = 1e-7) const {
    const int n = xi.order();
    if (n < 1 || n > 4) {
      throw std::invalid_argument("Duhamel evaluation supports orders 1..4");
    }
    if (n >= 3 && schedule_.torus().side() > 16) {
      throw std::invalid_argument("orders 3 and 4 are limited to tori of side <= 16");
    }
    xi.validate(n_);
    if (t == 0.0) {
      return n == 1 ? a0_ : 0.0;
    }
    if (n == 1) {
      const Eigen::VectorXd c = schedule_.C_table(t);
      return std::exp(-0.5 * beta_ * c(0)) * a0_;
    }
    auto integrand = [&](double s) { return duhamel_integrand(xi, s, t, rel_tol); };
    const double floor = 1e-16 * std::pow(std::abs(a0_), n);
    return numerics::integrate_adaptive(integrand, 0.0, t, rel_tol, 1 << 14, 8, floor).value;
  }

  /// |||Ṽ_t|||_n = sup_{ξ1} Σ_{ξ2..ξn} |Ṽ_t(ξ)|, exact for n ≤ 3.
  double coeff_norm(int n, double t, int nodes_per_panel = 12) const {
    switch (n) {
      case 1:
        return std::abs(amplitude(t));
      case 2: {
        const Eigen::VectorXd c = schedule_.C_table(t);
        const double a = amplitude(t);
        double sum = 0.0;
        for (Eigen::Index d = 0; d < c.size(); ++d) {
          sum += std::abs(std::expm1(-beta_ * c(d))) + std::abs(std::expm1(beta_ * c(d)));
        }
        return a * a * sum;
      }
      case 3:
        return norm3(t, nodes_per_panel);
      default:
        throw std::invalid_argument("exact norms are available for n <= 3; use sampled_norm4");
    }
  }

  /// Lower bound on |||Ṽ_t|||_4 from a random subset of configurations with ξ1 pinned.
  double sampled_norm4(double t, int samples, std::uint64_t seed = 1) const {
    numerics::CounterRng rng(seed, 0);
    std::uniform_int_distribution<int> site(0, n_ - 1);
    std::uniform_int_distribution<int> sign(0, 1);
    std::vector<std::uint64_t> seen;
    double total = 0.0;
    for (int k = 0; k < samples; ++k) {
      ChargeConfig xi{{{0, 1}}};
      std::uint64_t key = 0;
      for (int j = 0; j < 3; ++j) {
        const Charge c{site(rng), sign(rng) ? 1 : -1};
        xi.charges.push_back(c);
        key = key * static_cast<std::uint64_t>(2 * n_) + static_cast<std::uint64_t>(2 * c.site + (c.sigma > 0));
      }
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
        continue;
      }
      seen.push_back(key);
      total += std::abs(coeff_duhamel(xi, t, 1e-6));
    }
    return total;
  }

  /// Ṽ_t at order three for ξ1 = (0, +), ξ2 = (x, σ2), ξ3 = (y, σ3) via a fixed
  /// composite rule; the same kernel as the norm enumeration.
  double coeff_n3_fixed(const Charge& x2, const Charge& x3, double t, int nodes_per_panel = 12) const {
    check(x2);
    check(x3);
    if (t == 0.0) {
      return 0.0;
    }
    const Tables tb = tables(t, nodes_per_panel);
    return amplitude(t) * amplitude(t) * amplitude(t) * beta_ * triple(tb, x2.site, x2.sigma, x3.site, x3.sigma);
  }

 private:
  struct Tables {
    int nodes = 0;
    std::vector<double> weights;
    // [displacement * nodes + k]
    std::vector<double> cdot;
    std::vector<double> decay_plus;   // e^{-β (C_t - C_s)(d)}
    std::vector<double> decay_minus;  // e^{+β (C_t - C_s)(d)}
    std::vector<double> pair_plus;    // 1 - e^{-β C_s(d)}
    std::vector<double> pair_minus;   // 1 - e^{+β C_s(d)}
  };

  void check(const Charge& c) const {
    if (c.site < 0 || c.site >= n_ || (c.sigma != 1 && c.sigma != -1)) {
      throw std::invalid_argument("invalid charge");
    }
  }
  int disp(int x, int y) const { return diff_[static_cast<std::size_t>(x) * n_ + y]; }

  double pair_value(double a, int sign, double c) const { return -a * a * std::expm1(-sign * beta_ * c); }

  double duhamel_integrand(const ChargeConfig& xi, double s, double t, double rel_tol) const {
    const int n = xi.order();
    const Eigen::VectorXd cdot = schedule_.Cdot_table(s);
    const Eigen::VectorXd cd = schedule_.Cdiff_table(s, t);
    double w = 0.0;
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        w += xi.charges[k].sigma * xi.charges[l].sigma * cd(disp(xi.charges[k].site, xi.charges[l].site));
      }
    }
    w *= 0.5 * beta_;
    double total = 0.0;
    // Ordered splits (I, J) of [n]; masks with bit 0 in I halve the work.
    const unsigned full = (1u << n) - 1u;
    for (unsigned mask = 1; mask < full; ++mask) {
      if (!(mask & 1u)) {
        continue;
      }
      ChargeConfig left;
      ChargeConfig right;
      for (int k = 0; k < n; ++k) {
        (mask & (1u << k) ? left : right).charges.push_back(xi.charges[k]);
      }
      double cross = 0.0;
      for (const Charge& p : left.charges) {
        for (const Charge& q : right.charges) {
          cross += p.sigma * q.sigma * cdot(disp(p.site, q.site));
        }
      }
      cross *= beta_;
      if (cross == 0.0) {
        continue;
      }
      total += cross * inner(left, s, rel_tol) * inner(right, s, rel_tol);
    }
    return std::exp(-w) * total;
  }

  double inner(const ChargeConfig& xi, double s, double rel_tol) const {
    switch (xi.order()) {
      case 1:
        return amplitude(s);
      case 2:
        return coeff_n2(xi.charges[0], xi.charges[1], s);
      default:
        return coeff_duhamel(xi, s, rel_tol);
    }
  }

  /// Composite Gauss–Legendre on [0, t] with panels [0, ½], [½, 1], [1, 2], ...
  std::vector<std::pair<double, double>> panel_rule(double t, int order) const {
    std::vector<std::pair<double, double>> out;
    const numerics::Rule& rule = numerics::gauss_legendre(order);
    double lo = 0.0;
    double hi = std::min(t, 0.5);
    while (lo < t) {
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * (hi - lo);
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        out.emplace_back(mid + half * rule.nodes[k], half * rule.weights[k]);
      }
      lo = hi;
      hi = std::min(t, 2.0 * hi);
    }
    return out;
  }

  Tables tables(double t, int order) const {
    const auto rule = panel_rule(t, order);
    Tables tb;
    tb.nodes = static_cast<int>(rule.size());
    const std::size_t total = static_cast<std::size_t>(n_) * tb.nodes;
    tb.cdot.resize(total);
    tb.decay_plus.resize(total);
    tb.decay_minus.resize(total);
    tb.pair_plus.resize(total);
    tb.pair_minus.resize(total);
    for (int k = 0; k < tb.nodes; ++k) {
      const double s = rule[static_cast<std::size_t>(k)].first;
      tb.weights.push_back(rule[static_cast<std::size_t>(k)].second);
      const Eigen::VectorXd cdot = schedule_.Cdot_table(s);
      const Eigen::VectorXd cd = schedule_.Cdiff_table(s, t);
      const Eigen::VectorXd c = schedule_.C_table(s);
      for (int d = 0; d < n_; ++d) {
        const std::size_t i = static_cast<std::size_t>(d) * tb.nodes + k;
        tb.cdot[i] = cdot(d);
        tb.decay_plus[i] = std::exp(-beta_ * cd(d));
        tb.decay_minus[i] = std::exp(beta_ * cd(d));
        tb.pair_plus[i] = -std::expm1(-beta_ * c(d));
        tb.pair_minus[i] = -std::expm1(beta_ * c(d));
      }
    }
    return tb;
  }

  /// Ṽ_t(ξ1, ξ2, ξ3) / (β a_t³) with ξ1 = (0, +).
  double triple(const Tables& tb, int x, int s2, int y, int s3) const {
    const int K = tb.nodes;
    const int dyx = disp(y, x);
    const double* cx = &tb.cdot[static_cast<std::size_t>(x) * K];
    const double* cy = &tb.cdot[static_cast<std::size_t>(y) * K];
    const double* cyx = &tb.cdot[static_cast<std::size_t>(dyx) * K];
    const double* ex = &(s2 > 0 ? tb.decay_plus : tb.decay_minus)[static_cast<std::size_t>(x) * K];
    const double* ey = &(s3 > 0 ? tb.decay_plus : tb.decay_minus)[static_cast<std::size_t>(y) * K];
    const double* eyx = &(s2 * s3 > 0 ? tb.decay_plus : tb.decay_minus)[static_cast<std::size_t>(dyx) * K];
    const double* p23 = &(s2 * s3 > 0 ? tb.pair_plus : tb.pair_minus)[static_cast<std::size_t>(dyx) * K];
    const double* p13 = &(s3 > 0 ? tb.pair_plus : tb.pair_minus)[static_cast<std::size_t>(y) * K];
    const double* p12 = &(s2 > 0 ? tb.pair_plus : tb.pair_minus)[static_cast<std::size_t>(x) * K];
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      const double split1 = (s2 * cx[k] + s3 * cy[k]) * p23[k];
      const double split2 = s2 * (cx[k] + s3 * cyx[k]) * p13[k];
      const double split3 = s3 * (cy[k] + s2 * cyx[k]) * p12[k];
      sum += tb.weights[static_cast<std::size_t>(k)] * ex[k] * ey[k] * eyx[k] * (split1 + split2 + split3);
    }
    return sum;
  }

  double norm3(double t, int order) const {
    if (t == 0.0) {
      return 0.0;
    }
    const Tables tb = tables(t, order);
    double total = 0.0;
    for (int x = 0; x < n_; ++x) {
      for (int s2 : {1, -1}) {
        const int a = 2 * x + (s2 > 0);
        for (int y = x; y < n_; ++y) {
          for (int s3 : {1, -1}) {
            const int b = 2 * y + (s3 > 0);
            if (b < a) {
              continue;
            }
            const double v = std::abs(triple(tb, x, s2, y, s3));
            total += (a == b ? 1.0 : 2.0) * v;
          }
        }
      }
    }
    const double at = amplitude(t);
    return std::abs(at * at * at) * beta_ * total;
  }

  lattice::CovarianceSchedule schedule_;
  double beta_;
  double a0_;
  int n_ = 0;
  std::vector<int> diff_;
};

}  // namespace lsi::sine_gordon
