#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lsi/lattice/operators.hpp"
#include "lsi/lattice/spectrum.hpp"
#include "lsi/lattice/torus.hpp"

namespace lsi::lattice {

enum class ScheduleMode { heat, conservative, piecewise };

inline const char* to_string(ScheduleMode mode) {
  switch (mode) {
    case ScheduleMode::heat:
      return "heat";
    case ScheduleMode::conservative:
      return "conservative_heat";
    case ScheduleMode::piecewise:
      return "piecewise_discrete";
  }
  return "unknown";
}

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// One block of a discrete decomposition: Ċ_s equals `rate` for a time `duration`.
struct ScheduleBlock {
  double duration = 1.0;
  Eigen::MatrixXd rate;
};

/// Covariance decomposition t -> (Q_t, Ċ_t, C_t) of C_∞.
///
/// Heat and conservative schedules are spectral functions of A. On a torus
/// they are evaluated in the cosine basis (displacement tables); otherwise
/// through a dense eigendecomposition. Piecewise schedules hold explicit blocks.
class CovarianceSchedule {
 public:
  static CovarianceSchedule heat(const LatticeOperator& a, std::vector<double> grid = {}) {
    return spectral(a, ScheduleMode::heat, std::move(grid));
  }
  static CovarianceSchedule conservative(const LatticeOperator& a, std::vector<double> grid = {}) {
    return spectral(a, ScheduleMode::conservative, std::move(grid));
  }
  static CovarianceSchedule heat(const Eigen::MatrixXd& a, std::vector<double> grid = {}) {
    return heat(LatticeOperator{a, OperatorKind::A, std::nullopt, 0.0, 0.0}, std::move(grid));
  }
  static CovarianceSchedule conservative(const Eigen::MatrixXd& a, std::vector<double> grid = {}) {
    return conservative(LatticeOperator{a, OperatorKind::A, std::nullopt, 0.0, 0.0}, std::move(grid));
  }

  /// Torus schedule without ever forming the dense operator.
  static CovarianceSchedule on_torus(const Torus& torus, double mass, ScheduleMode mode,
                                     std::vector<double> grid = {}) {
    if (!(mass > 0.0)) {
      throw std::invalid_argument("mass must be positive (massless case unsupported)");
    }
    if (mode == ScheduleMode::piecewise) {
      throw std::invalid_argument("on_torus builds heat or conservative schedules only");
    }
    check_grid(grid);
    CovarianceSchedule s;
    s.mode_ = mode;
    s.grid_ = std::move(grid);
    s.torus_ = torus;
    s.spectrum_ = std::make_shared<TorusSpectrum>(torus);
    s.mass_ = mass;
    s.mass_term_ = torus.mesh() * torus.mesh() * mass * mass;
    s.dimension_ = torus.size();
    s.eigenvalues_ = s.spectrum_->laplacian_eigenvalues().array() + s.mass_term_;
    s.mask_ = Eigen::VectorXd::Ones(s.dimension_);
    if (mode == ScheduleMode::conservative) {
      s.mask_(0) = 0.0;
    }
    s.finish_spectral();
    return s;
  }

  static CovarianceSchedule piecewise(std::vector<ScheduleBlock> blocks) {
    if (blocks.empty()) {
      throw std::invalid_argument("piecewise schedule needs at least one block");
    }
    CovarianceSchedule s;
    s.mode_ = ScheduleMode::piecewise;
    s.dimension_ = static_cast<int>(blocks.front().rate.rows());
    double clock = 0.0;
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(s.dimension_, s.dimension_);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const auto& b = blocks[j];
      if (!(b.duration > 0.0)) {
        throw std::invalid_argument("block duration must be positive");
      }
      if (b.rate.rows() != s.dimension_ || b.rate.cols() != s.dimension_) {
        throw std::invalid_argument("block dimensions differ");
      }
      Eigen::MatrixXd sym = 0.5 * (b.rate + b.rate.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
      const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
      if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
        std::ostringstream msg;
        msg << "block " << j << " is not positive semidefinite: eigenvalue " << eig.eigenvalues().minCoeff();
        throw std::invalid_argument(msg.str());
      }
      Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      s.block_roots_.push_back(eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose());
      s.block_starts_.push_back(clock);
      clock += b.duration;
      total += b.duration * sym;
      s.blocks_.push_back(ScheduleBlock{b.duration, sym});
    }
    s.block_end_ = clock;
    s.cinf_ = total;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total);
    s.eigenvalues_ = eig.eigenvalues();
    s.lambda_min_ = 1.0 / eig.eigenvalues().maxCoeff();
    s.lambda_max_ = eig.eigenvalues().minCoeff() > 0.0 ? 1.0 / eig.eigenvalues().minCoeff() : kInfinity;
    return s;
  }

  ScheduleMode mode() const { return mode_; }
  int dimension() const { return dimension_; }
  bool on_torus() const { return torus_.has_value(); }
  const Torus& torus() const {
    if (!torus_) {
      throw std::logic_error("schedule is not attached to a torus");
    }
    return *torus_;
  }
  const TorusSpectrum& spectrum() const {
    if (!spectrum_) {
      throw std::logic_error("schedule is not attached to a torus");
    }
    return *spectrum_;
  }
  double mass() const { return mass_; }
  double mass_term() const { return mass_term_; }
  const std::vector<double>& time_grid() const { return grid_; }

  /// Eigenvalues of A (torus: indexed by Fourier mode; dense: ascending).
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  /// 1 on modes inside the range of the projector, 0 outside.
  const Eigen::VectorXd& mask() const { return mask_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

  /// Smallest eigenvalue of A on the range of the schedule.
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

  /// Finite stand-in for t = ∞: e^{-λ_min t} < 1e-14.
  double infinity_time() const { return std::log(1e14) / lambda_min_ * 1.0001; }

  // Dense matrices.
  Eigen::MatrixXd Q(double t) const {
    if (mode_ == ScheduleMode::piecewise) {
      const int j = block_at(t);
      return j < 0 ? zero() : block_roots_[static_cast<std::size_t>(j)];
    }
    return apply([t](double lam) { return std::exp(-0.5 * t * lam); });
  }
  Eigen::MatrixXd Cdot(double t) const {
    if (mode_ == ScheduleMode::piecewise) {
      const int j = block_at(t);
      return j < 0 ? zero() : blocks_[static_cast<std::size_t>(j)].rate;
    }
    return apply([t](double lam) { return std::exp(-t * lam); });
  }
  Eigen::MatrixXd C(double t) const {
    if (mode_ == ScheduleMode::piecewise) {
      return piecewise_C(t);
    }
    return apply([t](double lam) { return c_fn(t, lam); });
  }
  /// C_t - C_s, computed without cancellation.
  Eigen::MatrixXd Cdiff(double s, double t) const {
    if (mode_ == ScheduleMode::piecewise) {
      return piecewise_C(t) - piecewise_C(s);
    }
    return apply([s, t](double lam) { return cdiff_fn(s, t, lam); });
  }
  Eigen::MatrixXd Cddot(double t) const {
    if (mode_ == ScheduleMode::piecewise) {
      return zero();
    }
    return apply([t](double lam) { return -lam * std::exp(-t * lam); });
  }
  Eigen::MatrixXd Cinf() const {
    if (mode_ == ScheduleMode::piecewise) {
      return cinf_;
    }
    return apply([](double lam) { return 1.0 / lam; });
  }
  /// Projector onto the range (identity unless conservative).
  Eigen::MatrixXd projector() const {
    if (mode_ == ScheduleMode::piecewise) {
      return Eigen::MatrixXd::Identity(dimension_, dimension_);
    }
    return apply([](double) { return 1.0; });
  }

  // Displacement tables (torus schedules only).
  Eigen::VectorXd Q_table(double t) const {
    return table([t](double lam) { return std::exp(-0.5 * t * lam); });
  }
  Eigen::VectorXd Cdot_table(double t) const {
    return table([t](double lam) { return std::exp(-t * lam); });
  }
  Eigen::VectorXd C_table(double t) const {
    return table([t](double lam) { return c_fn(t, lam); });
  }
  Eigen::VectorXd Cdiff_table(double s, double t) const {
    return table([s, t](double lam) { return cdiff_fn(s, t, lam); });
  }
  Eigen::VectorXd Cinf_table() const {
    return table([](double lam) { return 1.0 / lam; });
  }

  /// C_t(0,0) (any mode; translation invariance is not assumed for dense schedules).
  double C_diag(double t) const {
    if (on_torus()) {
      return mode_sum([t](double lam) { return c_fn(t, lam); });
    }
    return C(t)(0, 0);
  }
  double Cdiff_diag(double s, double t) const {
    if (on_torus()) {
      return mode_sum([s, t](double lam) { return cdiff_fn(s, t, lam); });
    }
    return Cdiff(s, t)(0, 0);
  }

  /// ‖Ċ_t‖ and ‖Q_t‖ (operator norms).
  double Cdot_norm(double t) const {
    if (mode_ == ScheduleMode::piecewise) {
      const int j = block_at(t);
      if (j < 0) {
        return 0.0;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(blocks_[static_cast<std::size_t>(j)].rate,
                                                         Eigen::EigenvaluesOnly);
      return eig.eigenvalues().maxCoeff();
    }
    return std::exp(-t * lambda_min_);
  }
  double Q_norm(double t) const { return std::sqrt(Cdot_norm(t)); }

  /// sup_x Σ_y |Ċ_t(x,y)|.
  double Cdot_row_abs_sum(double t) const {
    if (on_torus()) {
      return Cdot_table(t).cwiseAbs().sum();
    }
    return Cdot(t).cwiseAbs().rowwise().sum().maxCoeff();
  }
  double Q_row_abs_sum(double t) const {
    if (on_torus()) {
      return Q_table(t).cwiseAbs().sum();
    }
    return Q(t).cwiseAbs().rowwise().sum().maxCoeff();
  }

  /// Block layout of a piecewise schedule.
  const std::vector<ScheduleBlock>& blocks() const { return blocks_; }
  const std::vector<double>& block_starts() const { return block_starts_; }
  double block_end() const { return block_end_; }

 private:
  CovarianceSchedule() = default;

  static void check_grid(const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
        throw std::invalid_argument("time grid must be strictly increasing and positive");
      }
    }
  }

  static double c_fn(double t, double lam) {
    if (t == 0.0) {
      return 0.0;
    }
    return -std::expm1(-t * lam) / lam;
  }
  static double cdiff_fn(double s, double t, double lam) {
    if (s == t) {
      return 0.0;
    }
    return std::exp(-s * lam) * (-std::expm1(-(t - s) * lam)) / lam;
  }

  static CovarianceSchedule spectral(const LatticeOperator& a, ScheduleMode mode, std::vector<double> grid) {
    if (a.torus && a.kind == OperatorKind::A && a.mass > 0.0) {
      CovarianceSchedule s = on_torus(*a.torus, a.mass, mode, std::move(grid));
      s.dense_a_ = a.matrix;
      return s;
    }
    check_grid(grid);
    const Eigen::MatrixXd& m = a.matrix;
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw std::invalid_argument("generator must be a nonempty square matrix");
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::invalid_argument("generator must be symmetric");
    }
    CovarianceSchedule s;
    s.mode_ = mode;
    s.grid_ = std::move(grid);
    s.dimension_ = static_cast<int>(m.rows());
    s.dense_a_ = m;
    const int n = s.dimension_;
    if (mode == ScheduleMode::heat) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
      s.eigenvalues_ = eig.eigenvalues();
      s.eigenvectors_ = eig.eigenvectors();
      s.mask_ = Eigen::VectorXd::Ones(n);
    } else {
      Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
      Eigen::VectorXd image = m * ones;
      const double c = image(0);
      if ((image - c * ones).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::invalid_argument("conservative schedule needs constants to be an eigenvector of A");
      }
      // Move the constant mode far away so that it is isolated, then restore it.
      const Eigen::MatrixXd p = mean_zero_projector(n);
      const double shift = 1.0 + 2.0 * m.cwiseAbs().rowwise().sum().maxCoeff();
      Eigen::MatrixXd shifted = p * m * p + shift * (Eigen::MatrixXd::Identity(n, n) - p);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shifted);
      s.eigenvalues_ = eig.eigenvalues();
      s.eigenvectors_ = eig.eigenvectors();
      s.mask_ = Eigen::VectorXd::Ones(n);
      s.eigenvalues_(n - 1) = c;
      s.mask_(n - 1) = 0.0;
    }
    s.finish_spectral();
    return s;
  }

  void finish_spectral() {
    double lo = kInfinity;
    double hi = 0.0;
    for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
      if (mask_(k) > 0.0) {
        lo = std::min(lo, eigenvalues_(k));
        hi = std::max(hi, eigenvalues_(k));
      }
    }
    if (!(lo > 0.0)) {
      throw std::invalid_argument("generator must be positive definite on the range");
    }
    lambda_min_ = lo;
    lambda_max_ = hi;
  }

  template <class G>
  Eigen::VectorXd mode_values(G&& g) const {
    Eigen::VectorXd out(eigenvalues_.size());
    for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
      out(k) = mask_(k) > 0.0 ? g(eigenvalues_(k)) : 0.0;
    }
    return out;
  }

  template <class G>
  double mode_sum(G&& g) const {
    return mode_values(g).sum() / dimension_;
  }

  template <class G>
  Eigen::VectorXd table(G&& g) const {
    return spectrum().synthesize(mode_values(g));
  }

  template <class G>
  Eigen::MatrixXd apply(G&& g) const {
    if (on_torus()) {
      return spectrum_->circulant(table(g), *torus_);
    }
    Eigen::VectorXd d = mode_values(g);
    return eigenvectors_ * d.asDiagonal() * eigenvectors_.transpose();
  }

  Eigen::MatrixXd zero() const { return Eigen::MatrixXd::Zero(dimension_, dimension_); }

  int block_at(double t) const {
    if (t <= 0.0) {
      return 0;
    }
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      if (t <= block_starts_[j] + blocks_[j].duration) {
        return static_cast<int>(j);
      }
    }
    return -1;
  }

  Eigen::MatrixXd piecewise_C(double t) const {
    Eigen::MatrixXd out = zero();
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const double start = block_starts_[j];
      if (t <= start) {
        break;
      }
      out += std::min(t - start, blocks_[j].duration) * blocks_[j].rate;
    }
    return out;
  }

  ScheduleMode mode_ = ScheduleMode::heat;
  int dimension_ = 0;
  std::vector<double> grid_;
  std::optional<Torus> torus_;
  std::shared_ptr<const TorusSpectrum> spectrum_;
  double mass_ = 0.0;
  double mass_term_ = 0.0;
  Eigen::MatrixXd dense_a_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd mask_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
  std::vector<ScheduleBlock> blocks_;
  std::vector<Eigen::MatrixXd> block_roots_;
  std::vector<double> block_starts_;
  double block_end_ = 0.0;
  Eigen::MatrixXd cinf_;
};

inline CovarianceSchedule schedule_heat(const LatticeOperator& a, std::vector<double> grid = {}) {
  return CovarianceSchedule::heat(a, std::move(grid));
}
inline CovarianceSchedule schedule_conservative(const LatticeOperator& a, std::vector<double> grid = {}) {
  return CovarianceSchedule::conservative(a, std::move(grid));
}
inline CovarianceSchedule schedule_piecewise(std::vector<ScheduleBlock> blocks) {
  return CovarianceSchedule::piecewise(std::move(blocks));
}

/// Characteristic length (1 ∨ √t) ∧ 1/(εm).
inline double characteristic_length(double t, double mesh, double mass) {
  return std::min(std::max(1.0, std::sqrt(t)), 1.0 / (mesh * mass));
}

}  // namespace lsi::lattice
