#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsi::certify {

enum class Provenance { certified_pipeline, sampled_scan };

inline const char* to_string(Provenance p) {
  return p == Provenance::certified_pipeline ? "certified_pipeline" : "sampled_scan";
}

enum class TailForm { nonnegative, lower_bound, exp_decay };

inline const char* to_string(TailForm f) {
  switch (f) {
    case TailForm::nonnegative:
      return "nonnegative";
    case TailForm::lower_bound:
      return "lower_bound";
    case TailForm::exp_decay:
      return "exp_decay";
  }
  return "unknown";
}

/// Beyond `start`, the rate obeys  ṁ_t ≥ floor - amplitude·e^{-rate·t}.
/// nonnegative: floor = amplitude = 0; lower_bound: amplitude = 0;
/// exp_decay: |ṁ_t| ≤ amplitude·e^{-rate·t}, floor = 0.
struct TailBound {
  double start = 0.0;
  TailForm form = TailForm::nonnegative;
  double floor = 0.0;
  double amplitude = 0.0;
  double rate = 0.0;

  static TailBound nonnegative(double start) { return TailBound{start, TailForm::nonnegative, 0.0, 0.0, 0.0}; }
  static TailBound lower_bound(double start, double floor) {
    return TailBound{start, TailForm::lower_bound, floor, 0.0, 0.0};
  }
  static TailBound exp_decay(double start, double amplitude, double rate) {
    if (!(rate > 0.0) || amplitude < 0.0) {
      throw std::invalid_argument("exponential tail needs a positive rate and nonnegative amplitude");
    }
    return TailBound{start, TailForm::exp_decay, 0.0, amplitude, rate};
  }

  /// Lower bound on ṁ_t for t ≥ start.
  double lower(double t) const { return floor - (amplitude > 0.0 ? amplitude * std::exp(-rate * t) : 0.0); }
  /// Upper bound on m_T - m_t over t ≥ T ≥ start (the slack of the tail).
  double slack(double from) const { return amplitude > 0.0 ? amplitude * std::exp(-rate * from) / rate : 0.0; }
};

/// Grid of (t, ṁ_t) lower bounds starting at t = 0, with an optional tail descriptor.
struct MuSchedule {
  std::vector<double> t;
  std::vector<double> rate;
  Provenance provenance = Provenance::certified_pipeline;
  std::optional<TailBound> tail;

  std::size_t size() const { return t.size(); }
  double horizon() const { return t.back(); }

  void validate() const {
    if (t.size() < 2 || t.size() != rate.size()) {
      throw std::invalid_argument("schedule needs matching grid and rates with at least two points");
    }
    if (t.front() != 0.0) {
      throw std::invalid_argument("schedule grid must start at t = 0");
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!std::isfinite(rate[k]) || !std::isfinite(t[k]) || (k > 0 && !(t[k] > t[k - 1]))) {
        throw std::invalid_argument("schedule grid must be strictly increasing with finite rates");
      }
    }
    if (tail && tail->start > t.back()) {
      throw std::invalid_argument("tail descriptor must start within the grid");
    }
  }

  /// m_t on the grid by the trapezoid rule.
  std::vector<double> integrated() const {
    std::vector<double> m(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
      m[k] = m[k - 1] + 0.5 * (rate[k - 1] + rate[k]) * (t[k] - t[k - 1]);
    }
    return m;
  }

  /// Same schedule with ṁ shifted by a constant (and the tail floor with it).
  MuSchedule shifted(double delta) const {
    MuSchedule out = *this;
    for (double& r : out.rate) {
      r += delta;
    }
    if (out.tail) {
      out.tail->floor += delta;
      if (out.tail->form == TailForm::nonnegative && delta != 0.0) {
        out.tail->form = TailForm::lower_bound;
      }
    }
    return out;
  }

  /// Every other grid point, endpoints kept.
  MuSchedule coarsened() const {
    MuSchedule out = *this;
    out.t.clear();
    out.rate.clear();
    for (std::size_t k = 0; k < t.size(); k += 2) {
      out.t.push_back(t[k]);
      out.rate.push_back(rate[k]);
    }
    if (out.t.back() != t.back()) {
      out.t.push_back(t.back());
      out.rate.push_back(rate.back());
    }
    return out;
  }
};

inline MuSchedule constant_schedule(const std::vector<double>& grid, double value,
                                    Provenance provenance = Provenance::certified_pipeline) {
  MuSchedule s;
  s.t = grid;
  s.rate.assign(grid.size(), value);
  s.provenance = provenance;
  s.tail = value >= 0.0 ? TailBound::nonnegative(grid.back()) : TailBound::lower_bound(grid.back(), value);
  if (value > 0.0) {
    s.tail = TailBound::lower_bound(grid.back(), value);
  }
  return s;
}

}  // namespace lsi::certify
