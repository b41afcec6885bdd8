#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vkh/microstructure.hpp"

namespace vkh {

/// Occupancy bitmap of square cells over a bounding rectangle.
///
/// Nodes are the corners of occupied cells. A node is a lateral-boundary node
/// when among its (up to four) adjacent cells at least one is occupied and at
/// least one is not (cells outside the bounding box count as unoccupied).
class RasterDomain {
 public:
  RasterDomain(Point2 origin, double spacing, int nx, int ny, std::vector<std::uint8_t> occupied);

  /// Axis-aligned rectangle; its sides must be integer multiples of `spacing`.
  static RasterDomain rectangle(const Rect& r, double spacing);
  /// Cells whose centers lie in the closed Euclidean ball; the lattice is
  /// centered on `center`. Requires r >= 2*spacing.
  static RasterDomain ball(Point2 center, double r, double spacing);
  /// Union of rectangles on a common lattice anchored at `origin`.
  static RasterDomain from_rects(Point2 origin, double spacing, int nx, int ny, const std::vector<Rect>& rects);

  const Point2& origin() const { return origin_; }
  double spacing() const { return spacing_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  bool occupied(int i, int j) const {
    return i >= 0 && j >= 0 && i < nx_ && j < ny_ && occ_[static_cast<std::size_t>(i) * ny_ + j];
  }
  int cell_count() const { return cell_count_; }
  double area() const { return cell_count_ * spacing_ * spacing_; }
  Point2 cell_center(int i, int j) const {
    return {origin_.x1 + (i + 0.5) * spacing_, origin_.x2 + (j + 0.5) * spacing_};
  }

  int node_count() const { return static_cast<int>(node_ij_.size()); }
  /// Node id of lattice point (i, j), i in [0, nx], j in [0, ny]; -1 if unused.
  int node_id(int i, int j) const {
    if (i < 0 || j < 0 || i > nx_ || j > ny_) return -1;
    return node_index_[static_cast<std::size_t>(i) * (ny_ + 1) + j];
  }
  std::pair<int, int> node_ij(int id) const { return node_ij_[id]; }
  Point2 node_pos(int id) const {
    return {origin_.x1 + node_ij_[id].first * spacing_, origin_.x2 + node_ij_[id].second * spacing_};
  }
  bool is_lateral_boundary(int id) const { return boundary_[id] != 0; }
  int boundary_node_count() const;

  /// Each cell split into factor x factor cells; same covered set.
  RasterDomain refined(int factor) const;
  /// Connected-component label per node (nodes linked through shared cells).
  std::vector<int> node_components(int* count = nullptr) const;
  /// True when no cell is occupied in both (requires identical lattices).
  bool disjoint_from(const RasterDomain& other) const;
  bool same_lattice(const RasterDomain& other) const;
  RasterDomain united_with(const RasterDomain& other) const;

 private:
  void build_nodes();

  Point2 origin_;
  double spacing_;
  int nx_, ny_;
  std::vector<std::uint8_t> occ_;
  int cell_count_ = 0;
  std::vector<int> node_index_;
  std::vector<std::pair<int, int>> node_ij_;
  std::vector<std::uint8_t> boundary_;
};

/// Raster base extruded through nz uniform layers across I = (-1/2, 1/2).
///
/// Node numbering is column-major: node = base_node * (nz + 1) + layer.
class ExtrudedGrid {
 public:
  ExtrudedGrid(RasterDomain base, int nz);

  const RasterDomain& base() const { return base_; }
  int nz() const { return nz_; }
  double dz() const { return 1.0 / nz_; }
  int node_count() const { return base_.node_count() * (nz_ + 1); }
  int dof_count() const { return 3 * node_count(); }
  int node(int base_id, int layer) const { return base_id * (nz_ + 1) + layer; }
  int base_of(int node) const { return node / (nz_ + 1); }
  int layer_of(int node) const { return node % (nz_ + 1); }
  double z(int layer) const { return -0.5 + layer * dz(); }
  Point3 node_pos(int node) const {
    const Point2 p = base_.node_pos(base_of(node));
    return {p.x1, p.x2, z(layer_of(node))};
  }
  double volume() const { return base_.area(); }
  /// Element count: occupied cells times layers.
  int element_count() const { return base_.cell_count() * nz_; }

  ExtrudedGrid refined(int factor_xy, int factor_z) const {
    return ExtrudedGrid(base_.refined(factor_xy), nz_ * factor_z);
  }

 private:
  RasterDomain base_;
  int nz_;
};

/// One 3-vector per grid node, stored interleaved.
class DisplacementField {
 public:
  DisplacementField() = default;
  explicit DisplacementField(int nodes) : v_(3 * static_cast<std::size_t>(nodes), 0.0) {}
  explicit DisplacementField(std::vector<double> v) : v_(std::move(v)) {}

  int node_count() const { return static_cast<int>(v_.size() / 3); }
  double& operator()(int node, int comp) { return v_[3 * static_cast<std::size_t>(node) + comp]; }
  double operator()(int node, int comp) const { return v_[3 * static_cast<std::size_t>(node) + comp]; }
  std::span<double> data() { return v_; }
  std::span<const double> data() const { return v_; }
  std::vector<double>& vec() { return v_; }
  const std::vector<double>& vec() const { return v_; }

  /// Samples f(x) -> (psi1, psi2, psi3) at every node.
  template <class F>
  static DisplacementField sample(const ExtrudedGrid& g, F&& f) {
    DisplacementField d(g.node_count());
    for (int n = 0; n < g.node_count(); ++n) {
      const auto v = f(g.node_pos(n));
      for (int c = 0; c < 3; ++c) d(n, c) = v[c];
    }
    return d;
  }

 private:
  std::vector<double> v_;
};

}  // namespace vkh
