#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "vbsim/geom.hpp"

// Uniform-grid index over 3D points for exact k-nearest-neighbor queries.
// Cells are hashed; a query expands shells of cells outward until the k-th
// best distance is closed off, so results are exact, not approximate.

namespace vbsim::detail {

class PointGrid {
 public:
  PointGrid(const std::vector<geom::Vec3>& points, double cell_size)
      : points_(points), cell_(cell_size > 0 ? cell_size : 1.0) {
    cells_.reserve(points.size());
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      cells_[key(p)].push_back(static_cast<int>(i));
      if (i == 0) {
        lo = std::min({p.x, p.y, p.z});
        hi = std::max({p.x, p.y, p.z});
      } else {
        lo = std::min({lo, p.x, p.y, p.z});
        hi = std::max({hi, p.x, p.y, p.z});
      }
    }
    max_ring_ = points.empty() ? 0 : static_cast<std::int64_t>((hi - lo) / cell_) + 2;
  }

  /// Indices and squared distances of the k nearest points to `q`, excluding
  /// `exclude_index` (pass -1 to keep all). Sorted by distance ascending,
  /// ties by index.
  void knn(const geom::Vec3& q, int k, int exclude_index, std::vector<int>& idx_out,
           std::vector<double>& d2_out) const {
    idx_out.clear();
    d2_out.clear();
    if (k <= 0 || points_.empty()) return;

    // (d2, index) max-heap of the current best k.
    std::vector<std::pair<double, int>> best;
    best.reserve(static_cast<std::size_t>(k) + 1);
    auto cmp = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      return a < b;
    };

    const std::int64_t cx = coord(q.x), cy = coord(q.y), cz = coord(q.z);
    for (std::int64_t ring = 0; ring <= max_ring_; ++ring) {
      // Any point in ring R is at least (R-1)*cell away; once the heap is
      // full and that bound exceeds the k-th best, the answer is closed.
      if (static_cast<int>(best.size()) == k) {
        const double shell_min = ring >= 1 ? (static_cast<double>(ring - 1) * cell_) : 0.0;
        if (shell_min * shell_min > best.front().first) break;
      }
      for (std::int64_t dx = -ring; dx <= ring; ++dx)
        for (std::int64_t dy = -ring; dy <= ring; ++dy)
          for (std::int64_t dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
            if (it == cells_.end()) continue;
            for (int i : it->second) {
              if (i == exclude_index) continue;
              const double d2 = geom::norm_sq(points_[static_cast<std::size_t>(i)] - q);
              if (static_cast<int>(best.size()) < k) {
                best.emplace_back(d2, i);
                std::push_heap(best.begin(), best.end(), cmp);
              } else if (std::make_pair(d2, i) < best.front()) {
                std::pop_heap(best.begin(), best.end(), cmp);
                best.back() = {d2, i};
                std::push_heap(best.begin(), best.end(), cmp);
              }
            }
          }
    }
    std::sort_heap(best.begin(), best.end(), cmp);
    for (const auto& [d2, i] : best) {
      idx_out.push_back(i);
      d2_out.push_back(d2);
    }
  }

 private:
  std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    auto m = [](std::int64_t v) {
      return static_cast<std::uint64_t>(v + (1LL << 20)) & ((1ULL << 21) - 1);
    };
    return (m(x) << 42) | (m(y) << 21) | m(z);
  }

  std::uint64_t key(const geom::Vec3& p) const { return pack(coord(p.x), coord(p.y), coord(p.z)); }

  const std::vector<geom::Vec3>& points_;
  double cell_;
  std::int64_t max_ring_ = 0;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

/// Cell size targeting a few points per cell. Degenerate (flat or linear)
/// extents fall back to the dominant dimensions so surface scans do not get
/// pathological cells.
inline double knn_cell_heuristic(const std::vector<geom::Vec3>& points) {
  if (points.empty()) return 1.0;
  geom::Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo.x = std::min(lo.x, p.x);
    hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z);
    hi.z = std::max(hi.z, p.z);
  }
  double e[3] = {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
  std::sort(e, e + 3);  // e[2] largest
  const double n = static_cast<double>(points.size());
  double cell;
  if (e[0] < 0.05 * e[2] || e[0] <= 0.0) {
    if (e[1] < 0.05 * e[2] || e[1] <= 0.0)
      cell = e[2] / n * 4.0;  // ~linear
    else
      cell = std::sqrt(e[1] * e[2] / n) * 2.0;  // ~planar
  } else {
    cell = std::cbrt(e[0] * e[1] * e[2] / n) * 2.0;
  }
  if (!(cell > 1e-9) || !std::isfinite(cell)) cell = 1.0;
  return cell;
}

/// Exact k nearest neighbors for every point (self excluded). Returns
/// per-point index and squared distance arrays, each of size k (fewer when
/// the cloud is small).
inline void all_knn(const std::vector<geom::Vec3>& points, int k,
                    std::vector<std::vector<int>>& idx, std::vector<std::vector<double>>& d2) {
  idx.assign(points.size(), {});
  d2.assign(points.size(), {});
  if (points.empty() || k <= 0) return;
  const PointGrid grid(points, knn_cell_heuristic(points));
  for (std::size_t i = 0; i < points.size(); ++i)
    grid.knn(points[i], k, static_cast<int>(i), idx[i], d2[i]);
}

}  // namespace vbsim::detail
