#include "vkh/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vkh/error.hpp"

namespace vkh {

RasterDomain::RasterDomain(Point2 origin, double spacing, int nx, int ny, std::vector<std::uint8_t> occupied)
    : origin_(origin), spacing_(spacing), nx_(nx), ny_(ny), occ_(std::move(occupied)) {
  if (!(spacing > 0.0)) throw PreconditionError("RasterDomain: spacing must be positive");
  if (nx < 1 || ny < 1 || occ_.size() != static_cast<std::size_t>(nx) * ny)
    throw PreconditionError("RasterDomain: bitmap size mismatch");
  for (auto o : occ_) cell_count_ += o ? 1 : 0;
  if (cell_count_ < 1) throw PreconditionError("RasterDomain: no occupied cell");
  build_nodes();
}

RasterDomain RasterDomain::rectangle(const Rect& r, double spacing) {
  const double fx = r.width() / spacing, fy = r.height() / spacing;
  const int nx = static_cast<int>(std::lround(fx)), ny = static_cast<int>(std::lround(fy));
  if (nx < 1 || ny < 1 || std::abs(fx - nx) > 1e-9 * fx || std::abs(fy - ny) > 1e-9 * fy)
    throw PreconditionError("RasterDomain::rectangle: sides must be positive multiples of the spacing");
  return RasterDomain({r.x0, r.y0}, spacing, nx, ny, std::vector<std::uint8_t>(static_cast<std::size_t>(nx) * ny, 1));
}

RasterDomain RasterDomain::ball(Point2 center, double r, double spacing) {
  if (!(spacing > 0.0)) throw PreconditionError("rasterize_ball: spacing must be positive");
  if (r < 2.0 * spacing) throw PreconditionError("rasterize_ball: radius under-resolved (r < 2*delta)");
  const int half = static_cast<int>(std::ceil(r / spacing));
  const int n = 2 * half;
  const Point2 origin{center.x1 - half * spacing, center.x2 - half * spacing};
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dx = (i + 0.5 - half) * spacing, dy = (j + 0.5 - half) * spacing;
      occ[static_cast<std::size_t>(i) * n + j] = dx * dx + dy * dy <= r * r ? 1 : 0;
    }
  return RasterDomain(origin, spacing, n, n, std::move(occ));
}

RasterDomain RasterDomain::from_rects(Point2 origin, double spacing, int nx, int ny, const std::vector<Rect>& rects) {
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(nx) * ny, 0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const Point2 c{origin.x1 + (i + 0.5) * spacing, origin.x2 + (j + 0.5) * spacing};
      for (const auto& r : rects)
        if (r.contains(c)) occ[static_cast<std::size_t>(i) * ny + j] = 1;
    }
  return RasterDomain(origin, spacing, nx, ny, std::move(occ));
}

void RasterDomain::build_nodes() {
  node_index_.assign(static_cast<std::size_t>(nx_ + 1) * (ny_ + 1), -1);
  node_ij_.clear();
  boundary_.clear();
  for (int i = 0; i <= nx_; ++i)
    for (int j = 0; j <= ny_; ++j) {
      int occ = 0;
      for (int di = -1; di <= 0; ++di)
        for (int dj = -1; dj <= 0; ++dj) occ += occupied(i + di, j + dj) ? 1 : 0;
      if (occ == 0) continue;
      node_index_[static_cast<std::size_t>(i) * (ny_ + 1) + j] = static_cast<int>(node_ij_.size());
      node_ij_.emplace_back(i, j);
      boundary_.push_back(occ < 4 ? 1 : 0);
    }
}

int RasterDomain::boundary_node_count() const {
  return static_cast<int>(std::count(boundary_.begin(), boundary_.end(), std::uint8_t{1}));
}

RasterDomain RasterDomain::refined(int factor) const {
  if (factor < 1) throw PreconditionError("refined: factor must be >= 1");
  const int nx = nx_ * factor, ny = ny_ * factor;
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(nx) * ny, 0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) occ[static_cast<std::size_t>(i) * ny + j] = occupied(i / factor, j / factor);
  return RasterDomain(origin_, spacing_ / factor, nx, ny, std::move(occ));
}

std::vector<int> RasterDomain::node_components(int* count) const {
  std::vector<int> parent(node_count());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int i = 0; i < nx_; ++i)
    for (int j = 0; j < ny_; ++j) {
      if (!occupied(i, j)) continue;
      const int a = find(node_id(i, j));
      for (auto [di, dj] : {std::pair{1, 0}, {0, 1}, {1, 1}}) parent[find(node_id(i + di, j + dj))] = a;
    }
  std::vector<int> label(node_count(), -1), root_label(node_count(), -1);
  int n = 0;
  for (int v = 0; v < node_count(); ++v) {
    const int r = find(v);
    if (root_label[r] < 0) root_label[r] = n++;
    label[v] = root_label[r];
  }
  if (count) *count = n;
  return label;
}

bool RasterDomain::same_lattice(const RasterDomain& o) const {
  const double tol = 1e-12 * (1.0 + std::abs(origin_.x1) + std::abs(origin_.x2));
  return nx_ == o.nx_ && ny_ == o.ny_ && std::abs(spacing_ - o.spacing_) <= 1e-14 * spacing_ &&
         std::abs(origin_.x1 - o.origin_.x1) <= tol && std::abs(origin_.x2 - o.origin_.x2) <= tol;
}

bool RasterDomain::disjoint_from(const RasterDomain& o) const {
  if (!same_lattice(o)) throw PreconditionError("disjoint_from: rasters must share a lattice");
  for (std::size_t k = 0; k < occ_.size(); ++k)
    if (occ_[k] && o.occ_[k]) return false;
  return true;
}

RasterDomain RasterDomain::united_with(const RasterDomain& o) const {
  if (!same_lattice(o)) throw PreconditionError("united_with: rasters must share a lattice");
  std::vector<std::uint8_t> occ(occ_.size());
  for (std::size_t k = 0; k < occ_.size(); ++k) occ[k] = (occ_[k] || o.occ_[k]) ? 1 : 0;
  return RasterDomain(origin_, spacing_, nx_, ny_, std::move(occ));
}

ExtrudedGrid::ExtrudedGrid(RasterDomain base, int nz) : base_(std::move(base)), nz_(nz) {
  if (nz < 2) throw PreconditionError("ExtrudedGrid: nz must be >= 2");
}

}  // namespace vkh
