#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

// 2D Delaunay triangulation (Bowyer-Watson) and the alpha complex derived
// from it: the triangles whose circumradius is at most alpha. For a dense
// sample of a planar region the alpha complex triangulates the alpha shape
// of the sample, concave outline included.

namespace vbsim::detail {

struct P2 {
  double x = 0.0, y = 0.0;
};

struct DelaunayTri {
  int a = 0, b = 0, c = 0;
  double ccx = 0.0, ccy = 0.0, ccr2 = 0.0;
  bool alive = false;
};

inline double orient2d(const P2& p, const P2& q, const P2& r) {
  return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
}

inline void circumcircle(const P2& p, const P2& q, const P2& r, double& cx, double& cy,
                         double& r2) {
  const double d = 2.0 * orient2d(p, q, r);
  if (std::abs(d) < 1e-300) {
    cx = cy = 0.0;
    r2 = std::numeric_limits<double>::infinity();
    return;
  }
  const double p2 = p.x * p.x + p.y * p.y;
  const double q2 = q.x * q.x + q.y * q.y;
  const double s2 = r.x * r.x + r.y * r.y;
  cx = (p2 * (q.y - r.y) + q2 * (r.y - p.y) + s2 * (p.y - q.y)) / d;
  cy = (p2 * (r.x - q.x) + q2 * (p.x - r.x) + s2 * (q.x - p.x)) / d;
  const double dx = p.x - cx, dy = p.y - cy;
  r2 = dx * dx + dy * dy;
}

/// Delaunay triangulation of unique 2D points; returns index triples (CCW).
/// Points should be pre-shuffled by the caller for robustness; exact
/// duplicates must have been removed.
inline std::vector<std::array<int, 3>> delaunay(const std::vector<P2>& pts) {
  std::vector<std::array<int, 3>> result;
  const int n = static_cast<int>(pts.size());
  if (n < 3) return result;

  double lo_x = pts[0].x, hi_x = pts[0].x, lo_y = pts[0].y, hi_y = pts[0].y;
  for (const P2& p : pts) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-6});

  std::vector<P2> v(pts);
  v.push_back({cx - 40.0 * span, cy - 20.0 * span});
  v.push_back({cx + 40.0 * span, cy - 20.0 * span});
  v.push_back({cx, cy + 40.0 * span});

  std::vector<DelaunayTri> tris;
  auto add_tri = [&tris, &v](int a, int b, int c) {
    if (orient2d(v[static_cast<std::size_t>(a)], v[static_cast<std::size_t>(b)],
                 v[static_cast<std::size_t>(c)]) < 0.0)
      std::swap(b, c);
    DelaunayTri t;
    t.a = a;
    t.b = b;
    t.c = c;
    t.alive = true;
    circumcircle(v[static_cast<std::size_t>(a)], v[static_cast<std::size_t>(b)],
                 v[static_cast<std::size_t>(c)], t.ccx, t.ccy, t.ccr2);
    tris.push_back(t);
  };
  add_tri(n, n + 1, n + 2);

  std::vector<int> bad;
  std::map<std::pair<int, int>, std::pair<int, int>> edge_count;  // undirected -> (count, oriented-first)
  for (int ip = 0; ip < n; ++ip) {
    const P2& p = v[static_cast<std::size_t>(ip)];
    bad.clear();
    for (int ti = 0; ti < static_cast<int>(tris.size()); ++ti) {
      const DelaunayTri& t = tris[static_cast<std::size_t>(ti)];
      if (!t.alive) continue;
      const double dx = p.x - t.ccx, dy = p.y - t.ccy;
      if (dx * dx + dy * dy <= t.ccr2 * (1.0 + 1e-12)) bad.push_back(ti);
    }
    edge_count.clear();
    for (int ti : bad) {
      DelaunayTri& t = tris[static_cast<std::size_t>(ti)];
      t.alive = false;
      const int e[3][2] = {{t.a, t.b}, {t.b, t.c}, {t.c, t.a}};
      for (const auto& ed : e) {
        const auto key = std::minmax(ed[0], ed[1]);
        auto it = edge_count.find(key);
        if (it == edge_count.end())
          edge_count.emplace(key, std::make_pair(1, ed[0]));
        else
          ++it->second.first;
      }
    }
    for (const auto& [key, val] : edge_count) {
      if (val.first != 1) continue;  // interior cavity edge
      const int u = val.second;
      const int w = u == key.first ? key.second : key.first;
      add_tri(u, w, ip);
    }
  }

  for (const DelaunayTri& t : tris) {
    if (!t.alive) continue;
    if (t.a >= n || t.b >= n || t.c >= n) continue;  // touches the super-triangle
    result.push_back({t.a, t.b, t.c});
  }
  return result;
}

/// Triangles of the alpha complex: Delaunay triangles with circumradius at
/// most alpha.
inline std::vector<std::array<int, 3>> alpha_complex(const std::vector<P2>& pts, double alpha) {
  std::vector<std::array<int, 3>> out;
  const auto tris = delaunay(pts);
  const double a2 = alpha * alpha;
  for (const auto& t : tris) {
    double cx, cy, r2;
    circumcircle(pts[static_cast<std::size_t>(t[0])], pts[static_cast<std::size_t>(t[1])],
                 pts[static_cast<std::size_t>(t[2])], cx, cy, r2);
    if (r2 <= a2) out.push_back(t);
  }
  return out;
}

}  // namespace vbsim::detail
