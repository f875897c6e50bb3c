#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "vbsim/mesh.hpp"

// Quadric-error-metrics decimation: iterative edge contraction picking the
// cheapest edge under accumulated plane quadrics, with boundary-preserving
// constraint quadrics and a normal-flip guard.

namespace vbsim::mesh {

namespace detail_qem {

inline Eigen::Matrix4d plane_quadric(const geom::Vec3& n, double d) {
  const Eigen::Vector4d p(n.x, n.y, n.z, d);
  return p * p.transpose();
}

inline double quadric_cost(const Eigen::Matrix4d& q, const geom::Vec3& v) {
  const Eigen::Vector4d x(v.x, v.y, v.z, 1.0);
  return x.dot(q * x);
}

struct Candidate {
  double cost;
  int u, w;          // contract w into u
  geom::Vec3 pos;    // placement of the merged vertex
  std::uint64_t stamp_u, stamp_w;
};

struct CandidateOrder {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.cost != b.cost) return a.cost > b.cost;  // min-heap
    if (a.u != b.u) return a.u > b.u;
    return a.w > b.w;
  }
};

}  // namespace detail_qem

/// Contracts edges in order of minimal quadric error until at most
/// target_faces remain or no contraction passes the validity checks (no
/// degenerate faces, no face normal rotating by 90 degrees or more).
/// Boundary edges carry a heavy penalty quadric so open outlines survive.
inline TriMesh simplify_qem(const TriMesh& in, int target_faces, double boundary_weight = 1e3) {
  if (target_faces < 1) throw std::invalid_argument("simplify_qem: target_faces must be >= 1");
  if (static_cast<int>(in.faces.size()) <= target_faces) return in;

  using detail_qem::Candidate;
  using geom::Vec3;

  std::vector<Vec3> pos = in.vertices;
  std::vector<std::array<int, 3>> faces = in.faces;
  std::vector<char> face_alive(faces.size(), 1);
  int alive_faces = static_cast<int>(faces.size());

  const int nv = static_cast<int>(pos.size());
  std::vector<Eigen::Matrix4d> quadric(static_cast<std::size_t>(nv), Eigen::Matrix4d::Zero());
  std::vector<std::vector<int>> vertex_faces(static_cast<std::size_t>(nv));
  std::vector<int> alias(static_cast<std::size_t>(nv));
  std::vector<std::uint64_t> stamp(static_cast<std::size_t>(nv), 0);
  for (int i = 0; i < nv; ++i) alias[static_cast<std::size_t>(i)] = i;

  std::map<std::pair<int, int>, int> edge_faces;
  for (int fi = 0; fi < static_cast<int>(faces.size()); ++fi) {
    const auto& f = faces[static_cast<std::size_t>(fi)];
    const Vec3 n2 = geom::cross(pos[static_cast<std::size_t>(f[1])] - pos[static_cast<std::size_t>(f[0])],
                                pos[static_cast<std::size_t>(f[2])] - pos[static_cast<std::size_t>(f[0])]);
    const double nn = geom::norm(n2);
    if (nn < 2.0 * geom::kMinTriangleArea) {
      face_alive[static_cast<std::size_t>(fi)] = 0;
      --alive_faces;
      continue;
    }
    const Vec3 n = n2 / nn;
    const double d = -geom::dot(n, pos[static_cast<std::size_t>(f[0])]);
    const Eigen::Matrix4d k = detail_qem::plane_quadric(n, d);
    for (int v : f) {
      quadric[static_cast<std::size_t>(v)] += k;
      vertex_faces[static_cast<std::size_t>(v)].push_back(fi);
    }
    for (int e = 0; e < 3; ++e) {
      const auto key = std::minmax(f[e], f[(e + 1) % 3]);
      ++edge_faces[key];
    }
  }

  // Boundary constraint: a plane through the edge, perpendicular to the
  // adjacent face, heavily weighted.
  for (const auto& [edge, count] : edge_faces) {
    if (count != 1) continue;
    for (int fi : vertex_faces[static_cast<std::size_t>(edge.first)]) {
      const auto& f = faces[static_cast<std::size_t>(fi)];
      const bool has_a = f[0] == edge.first || f[1] == edge.first || f[2] == edge.first;
      const bool has_b = f[0] == edge.second || f[1] == edge.second || f[2] == edge.second;
      if (!has_a || !has_b || !face_alive[static_cast<std::size_t>(fi)]) continue;
      const Vec3 fe = pos[static_cast<std::size_t>(edge.second)] - pos[static_cast<std::size_t>(edge.first)];
      const Vec3 fn = geom::cross(pos[static_cast<std::size_t>(f[1])] - pos[static_cast<std::size_t>(f[0])],
                                  pos[static_cast<std::size_t>(f[2])] - pos[static_cast<std::size_t>(f[0])]);
      const Vec3 cn = geom::cross(fe, fn);
      const double cnn = geom::norm(cn);
      if (cnn < 1e-15) continue;
      const Vec3 n = cn / cnn;
      const Eigen::Matrix4d k =
          detail_qem::plane_quadric(n, -geom::dot(n, pos[static_cast<std::size_t>(edge.first)])) *
          boundary_weight;
      quadric[static_cast<std::size_t>(edge.first)] += k;
      quadric[static_cast<std::size_t>(edge.second)] += k;
      break;
    }
  }

  auto find = [&alias](int x) {
    while (alias[static_cast<std::size_t>(x)] != x) {
      alias[static_cast<std::size_t>(x)] =
          alias[static_cast<std::size_t>(alias[static_cast<std::size_t>(x)])];
      x = alias[static_cast<std::size_t>(x)];
    }
    return x;
  };

  auto best_placement = [&](int u, int w, double& cost_out) {
    const Eigen::Matrix4d q = quadric[static_cast<std::size_t>(u)] + quadric[static_cast<std::size_t>(w)];
    Vec3 best = (pos[static_cast<std::size_t>(u)] + pos[static_cast<std::size_t>(w)]) / 2.0;
    double best_cost = detail_qem::quadric_cost(q, best);
    for (const Vec3& c : {pos[static_cast<std::size_t>(u)], pos[static_cast<std::size_t>(w)]}) {
      const double cc = detail_qem::quadric_cost(q, c);
      if (cc < best_cost) {
        best_cost = cc;
        best = c;
      }
    }
    const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
    const Eigen::Vector3d b = -q.topRightCorner<3, 1>();
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
    if (lu.isInvertible()) {
      const Eigen::Vector3d x = lu.solve(b);
      const Vec3 v{x.x(), x.y(), x.z()};
      const double cc = detail_qem::quadric_cost(q, v);
      if (cc < best_cost) {
        best_cost = cc;
        best = v;
      }
    }
    cost_out = std::max(best_cost, 0.0);
    return best;
  };

  std::priority_queue<Candidate, std::vector<Candidate>, detail_qem::CandidateOrder> heap;
  auto push_edge = [&](int u, int w) {
    if (u == w) return;
    if (u > w) std::swap(u, w);
    Candidate c;
    c.u = u;
    c.w = w;
    c.pos = best_placement(u, w, c.cost);
    c.stamp_u = stamp[static_cast<std::size_t>(u)];
    c.stamp_w = stamp[static_cast<std::size_t>(w)];
    heap.push(c);
  };
  for (const auto& [edge, count] : edge_faces) push_edge(edge.first, edge.second);

  auto face_corners = [&](int fi, std::array<int, 3>& out) {
    const auto& f = faces[static_cast<std::size_t>(fi)];
    out = {find(f[0]), find(f[1]), find(f[2])};
  };

  while (alive_faces > target_faces && !heap.empty()) {
    Candidate c = heap.top();
    heap.pop();
    if (find(c.u) != c.u || find(c.w) != c.w) continue;  // stale endpoint
    if (c.stamp_u != stamp[static_cast<std::size_t>(c.u)] ||
        c.stamp_w != stamp[static_cast<std::size_t>(c.w)])
      continue;
    const int u = c.u, w = c.w;

    // Validity: simulate moving u and w to c.pos.
    bool valid = true;
    for (int vid : {u, w}) {
      for (int fi : vertex_faces[static_cast<std::size_t>(vid)]) {
        if (!face_alive[static_cast<std::size_t>(fi)]) continue;
        std::array<int, 3> cn;
        face_corners(fi, cn);
        const bool has_u = cn[0] == u || cn[1] == u || cn[2] == u;
        const bool has_w = cn[0] == w || cn[1] == w || cn[2] == w;
        if (has_u && has_w) continue;  // face dies with the edge
        Vec3 before[3], after[3];
        for (int k = 0; k < 3; ++k) {
          before[k] = pos[static_cast<std::size_t>(cn[k])];
          after[k] = (cn[k] == u || cn[k] == w) ? c.pos : before[k];
        }
        const Vec3 nb = geom::cross(before[1] - before[0], before[2] - before[0]);
        const Vec3 na = geom::cross(after[1] - after[0], after[2] - after[0]);
        if (0.5 * geom::norm(na) <= geom::kMinTriangleArea || geom::dot(nb, na) <= 0.0) {
          valid = false;
          break;
        }
      }
      if (!valid) break;
    }
    if (!valid) continue;

    // Contract: w merges into u at the optimal placement.
    pos[static_cast<std::size_t>(u)] = c.pos;
    quadric[static_cast<std::size_t>(u)] += quadric[static_cast<std::size_t>(w)];
    alias[static_cast<std::size_t>(w)] = u;
    ++stamp[static_cast<std::size_t>(u)];

    auto& uf = vertex_faces[static_cast<std::size_t>(u)];
    for (int fi : vertex_faces[static_cast<std::size_t>(w)]) {
      if (!face_alive[static_cast<std::size_t>(fi)]) continue;
      std::array<int, 3> cn;
      face_corners(fi, cn);
      if ((cn[0] == cn[1]) || (cn[1] == cn[2]) || (cn[0] == cn[2])) {
        face_alive[static_cast<std::size_t>(fi)] = 0;
        --alive_faces;
      } else {
        uf.push_back(fi);
      }
    }
    vertex_faces[static_cast<std::size_t>(w)].clear();

    // Drop any of u's faces that died, then refresh candidate edges around u.
    std::set<int> neighbors;
    std::vector<int> still;
    for (int fi : uf) {
      if (!face_alive[static_cast<std::size_t>(fi)]) continue;
      std::array<int, 3> cn;
      face_corners(fi, cn);
      if ((cn[0] == cn[1]) || (cn[1] == cn[2]) || (cn[0] == cn[2])) {
        face_alive[static_cast<std::size_t>(fi)] = 0;
        --alive_faces;
        continue;
      }
      still.push_back(fi);
      for (int v : cn)
        if (v != u) neighbors.insert(v);
    }
    uf = std::move(still);
    for (int v : neighbors) push_edge(u, v);
  }

  // Compact the result.
  TriMesh out;
  std::vector<int> remap(static_cast<std::size_t>(nv), -1);
  for (int fi = 0; fi < static_cast<int>(faces.size()); ++fi) {
    if (!face_alive[static_cast<std::size_t>(fi)]) continue;
    std::array<int, 3> cn;
    face_corners(fi, cn);
    std::array<int, 3> nf{};
    for (int k = 0; k < 3; ++k) {
      int& r = remap[static_cast<std::size_t>(cn[k])];
      if (r == -1) {
        r = static_cast<int>(out.vertices.size());
        out.vertices.push_back(pos[static_cast<std::size_t>(cn[k])]);
      }
      nf[static_cast<std::size_t>(k)] = r;
    }
    out.faces.push_back(nf);
  }
  return out;
}

}  // namespace vbsim::mesh
