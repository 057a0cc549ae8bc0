#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lsi::lattice {

/// Two-dimensional discrete torus with side_sites^2 sites, mesh ε and
/// physical side L = ε * side_sites. Sites are indexed x1 + side * x2.
class Torus {
 public:
  Torus(int side_sites, double mesh, double physical_side)
      : side_(side_sites), mesh_(mesh), physical_side_(physical_side) {
    if (side_sites < 2) {
      throw std::invalid_argument("torus needs at least 2 sites per axis");
    }
    if (!(mesh > 0.0)) {
      throw std::invalid_argument("mesh must be positive");
    }
    if (std::abs(mesh * side_sites - physical_side) > 1e-12 * std::max(1.0, physical_side)) {
      std::ostringstream msg;
      msg << "inconsistent torus: L=" << physical_side << " but eps*side_sites=" << mesh * side_sites;
      throw std::invalid_argument(msg.str());
    }
  }

  int side() const { return side_; }
  int size() const { return side_ * side_; }
  static constexpr int dimension() { return 2; }
  double mesh() const { return mesh_; }
  double physical_side() const { return physical_side_; }

  int wrap(int a) const {
    const int r = a % side_;
    return r < 0 ? r + side_ : r;
  }
  int index(int x1, int x2) const { return wrap(x1) + side_ * wrap(x2); }
  std::array<int, 2> coords(int i) const { return {i % side_, i / side_}; }

  /// Index of the displacement x_i - x_j.
  int displacement(int i, int j) const {
    const auto a = coords(i);
    const auto b = coords(j);
    return index(a[0] - b[0], a[1] - b[1]);
  }
  int negate(int d) const {
    const auto a = coords(d);
    return index(-a[0], -a[1]);
  }

  /// Neighbours in directions +e1, -e1, +e2, -e2 (repeated when side is 2).
  std::array<int, 4> neighbours(int i) const {
    const auto a = coords(i);
    return {index(a[0] + 1, a[1]), index(a[0] - 1, a[1]), index(a[0], a[1] + 1), index(a[0], a[1] - 1)};
  }

  /// Minimal representative of a coordinate difference, in (-side/2, side/2].
  int minimal(int a) const {
    int r = wrap(a);
    if (2 * r > side_) {
      r -= side_;
    }
    return r;
  }

  /// Euclidean distance of minimal representatives, in lattice units.
  double site_distance(int i, int j) const {
    const auto d = coords(displacement(i, j));
    const double a = minimal(d[0]);
    const double b = minimal(d[1]);
    return std::sqrt(a * a + b * b);
  }
  /// Same distance in physical length units.
  double distance(int i, int j) const { return mesh_ * site_distance(i, j); }

  std::vector<double> distance_table() const {
    std::vector<double> out(static_cast<std::size_t>(size()));
    for (int d = 0; d < size(); ++d) {
      out[static_cast<std::size_t>(d)] = site_distance(d, 0);
    }
    return out;
  }

  /// Edges (x, x+e_k) for k = 1, 2; parallel edges appear when side is 2.
  std::vector<std::array<int, 2>> edges() const {
    std::vector<std::array<int, 2>> out;
    out.reserve(static_cast<std::size_t>(2 * size()));
    for (int i = 0; i < size(); ++i) {
      const auto a = coords(i);
      out.push_back({i, index(a[0] + 1, a[1])});
      out.push_back({i, index(a[0], a[1] + 1)});
    }
    return out;
  }

  bool operator==(const Torus& other) const {
    return side_ == other.side_ && mesh_ == other.mesh_ && physical_side_ == other.physical_side_;
  }

 private:
  int side_;
  double mesh_;
  double physical_side_;
};

inline Torus build_torus(int side_sites, double mesh, double physical_side) {
  return Torus(side_sites, mesh, physical_side);
}

}  // namespace lsi::lattice
