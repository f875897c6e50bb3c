#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vbsim/delaunay.hpp"
#include "vbsim/geom.hpp"
#include "vbsim/rng.hpp"
#include "vbsim/scene.hpp"

// Triangle meshes reconstructed from clustered points: iterative planar-patch
// extraction, in-plane alpha-shape triangulation, outward normal orientation.

namespace vbsim::mesh {

using geom::Triangle;
using geom::Vec3;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  std::size_t face_count() const { return faces.size(); }

  /// Per-face reflector records (normal from vertex winding).
  std::vector<Triangle> triangles() const {
    std::vector<Triangle> out;
    out.reserve(faces.size());
    for (const auto& f : faces)
      out.push_back(Triangle::from_vertices(vertices[static_cast<std::size_t>(f[0])],
                                            vertices[static_cast<std::size_t>(f[1])],
                                            vertices[static_cast<std::size_t>(f[2])]));
    return out;
  }

  /// Appends another mesh; face indices are rebased.
  void append(const TriMesh& other) {
    const int base = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& f : other.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }

  double total_area() const {
    double a = 0.0;
    for (const auto& f : faces)
      a += 0.5 * geom::norm(geom::cross(vertices[static_cast<std::size_t>(f[1])] -
                                            vertices[static_cast<std::size_t>(f[0])],
                                        vertices[static_cast<std::size_t>(f[2])] -
                                            vertices[static_cast<std::size_t>(f[0])]));
    return a;
  }
};

struct Plane {
  Vec3 point;
  Vec3 normal;  // unit

  double signed_distance(const Vec3& p) const { return geom::dot(p - point, normal); }
};

/// Least-squares plane through a point set (centroid + smallest covariance
/// eigenvector). Requires at least 3 points.
inline Plane fit_plane(const std::vector<Vec3>& pts, const std::vector<int>& subset) {
  if (subset.size() < 3) throw std::invalid_argument("fit_plane: need at least 3 points");
  Vec3 c{0, 0, 0};
  for (int i : subset) c += pts[static_cast<std::size_t>(i)];
  c = c / static_cast<double>(subset.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : subset) {
    const Vec3 d = pts[static_cast<std::size_t>(i)] - c;
    const Eigen::Vector3d v(d.x, d.y, d.z);
    cov += v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d n = es.eigenvectors().col(0);  // smallest eigenvalue
  Plane pl;
  pl.point = c;
  pl.normal = geom::normalized({n.x(), n.y(), n.z()});
  return pl;
}

namespace detail_mesh {

// Orthonormal in-plane frame; the axis construction only depends on the
// normal so the frame is stable across runs.
inline void plane_frame(const Vec3& n, Vec3& e1, Vec3& e2) {
  const Vec3 ref = std::abs(n.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  e1 = geom::normalized(geom::cross(ref, n));
  e2 = geom::cross(n, e1);
}

inline std::vector<int> plane_inliers(const std::vector<Vec3>& pts,
                                      const std::vector<int>& active, const Plane& pl,
                                      double thresh) {
  std::vector<int> in;
  for (int i : active)
    if (std::abs(pl.signed_distance(pts[static_cast<std::size_t>(i)])) <= thresh) in.push_back(i);
  return in;
}

}  // namespace detail_mesh

struct ReconstructOptions {
  double plane_dist_thresh = 0.15;  // meters
  int min_inliers = 100;
  double alpha = 1.0;          // meters, alpha-shape radius
  int ransac_iterations = 256;
  int max_patch_points = 4000;  // triangulation budget per patch
};

/// Reconstructs a triangle mesh for one object's points: repeatedly extracts
/// the largest consensus plane (RANSAC + least-squares refinement), projects
/// its inliers into the plane, triangulates their 2D alpha shape, and orients
/// each patch so the normal points away from the object centroid. Returns an
/// empty mesh when no plane reaches min_inliers.
///
/// Deterministic and permutation-invariant: input points are canonicalized by
/// lexicographic sort and all randomness is internally seeded.
inline TriMesh reconstruct_object_mesh(std::vector<Vec3> points, double plane_dist_thresh,
                                       int min_inliers, double alpha,
                                       const ReconstructOptions* opts_in = nullptr) {
  ReconstructOptions opts = opts_in ? *opts_in : ReconstructOptions{};
  opts.plane_dist_thresh = plane_dist_thresh;
  opts.min_inliers = min_inliers;
  opts.alpha = alpha;
  if (min_inliers < 3) throw std::invalid_argument("reconstruct_object_mesh: min_inliers < 3");

  TriMesh out;
  if (points.size() < static_cast<std::size_t>(min_inliers)) return out;

  std::sort(points.begin(), points.end(), [](const Vec3& a, const Vec3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
  });

  Vec3 object_centroid{0, 0, 0};
  for (const Vec3& p : points) object_centroid += p;
  object_centroid = object_centroid / static_cast<double>(points.size());

  rng::Stream rng(0x9e3779b97f4a7c15ULL);
  std::vector<int> active(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) active[i] = static_cast<int>(i);

  while (static_cast<int>(active.size()) >= opts.min_inliers) {
    // RANSAC: largest consensus plane among the remaining points.
    std::vector<int> best_inliers;
    for (int it = 0; it < opts.ransac_iterations; ++it) {
      const int i0 = active[rng.uniform_index(active.size())];
      const int i1 = active[rng.uniform_index(active.size())];
      const int i2 = active[rng.uniform_index(active.size())];
      if (i0 == i1 || i1 == i2 || i0 == i2) continue;
      const Vec3 n = geom::cross(points[static_cast<std::size_t>(i1)] - points[static_cast<std::size_t>(i0)],
                                 points[static_cast<std::size_t>(i2)] - points[static_cast<std::size_t>(i0)]);
      const double nn = geom::norm(n);
      if (nn < 1e-12) continue;
      Plane pl{points[static_cast<std::size_t>(i0)], n / nn};
      auto in = detail_mesh::plane_inliers(points, active, pl, opts.plane_dist_thresh);
      if (in.size() > best_inliers.size()) best_inliers = std::move(in);
    }
    if (static_cast<int>(best_inliers.size()) < opts.min_inliers) break;

    // Refine with a least-squares fit and recollect.
    Plane pl = fit_plane(points, best_inliers);
    best_inliers = detail_mesh::plane_inliers(points, active, pl, opts.plane_dist_thresh);
    if (static_cast<int>(best_inliers.size()) < opts.min_inliers) break;
    pl = fit_plane(points, best_inliers);
    best_inliers = detail_mesh::plane_inliers(points, active, pl, opts.plane_dist_thresh);
    if (static_cast<int>(best_inliers.size()) < opts.min_inliers) break;

    // Patch points, capped for triangulation cost.
    std::vector<int> patch = best_inliers;
    if (static_cast<int>(patch.size()) > opts.max_patch_points) {
      rng::Stream sub(0xa5a5a5a5ULL + patch.size());
      sub.shuffle(patch);
      patch.resize(static_cast<std::size_t>(opts.max_patch_points));
      std::sort(patch.begin(), patch.end());
    }

    // Outward orientation: away from the object centroid; ambiguous (flat
    // object) keeps the lexicographically positive direction.
    Vec3 patch_centroid{0, 0, 0};
    for (int i : patch) patch_centroid += points[static_cast<std::size_t>(i)];
    patch_centroid = patch_centroid / static_cast<double>(patch.size());
    const double side = geom::dot(pl.normal, patch_centroid - object_centroid);
    if (side < -1e-9) pl.normal = -pl.normal;
    if (std::abs(side) <= 1e-9) {
      const Vec3& n = pl.normal;
      if (n.z < 0 || (n.z == 0 && (n.x < 0 || (n.x == 0 && n.y < 0)))) pl.normal = -pl.normal;
    }

    // Project to the plane, triangulate the alpha complex, lift back.
    Vec3 e1, e2;
    detail_mesh::plane_frame(pl.normal, e1, e2);
    std::vector<vbsim::detail::P2> uv;
    std::vector<int> kept;  // patch entries surviving dedupe
    uv.reserve(patch.size());
    {
      std::vector<std::pair<std::int64_t, std::int64_t>> keys;
      std::vector<std::pair<std::size_t, vbsim::detail::P2>> tmp;
      for (int i : patch) {
        const Vec3 d = points[static_cast<std::size_t>(i)] - pl.point;
        vbsim::detail::P2 q{geom::dot(d, e1), geom::dot(d, e2)};
        keys.emplace_back(static_cast<std::int64_t>(std::llround(q.x * 1e7)),
                          static_cast<std::int64_t>(std::llround(q.y * 1e7)));
        tmp.emplace_back(static_cast<std::size_t>(i), q);
      }
      std::vector<std::size_t> order(tmp.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&keys](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
      for (std::size_t oi = 0; oi < order.size(); ++oi) {
        if (oi > 0 && keys[order[oi]] == keys[order[oi - 1]]) continue;
        kept.push_back(static_cast<int>(order[oi]));
      }
      std::sort(kept.begin(), kept.end());  // original patch order
      for (int i : kept) uv.push_back(tmp[static_cast<std::size_t>(i)].second);
    }
    // Shuffled insertion order for triangulation robustness.
    std::vector<int> perm(uv.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    rng::Stream tri_rng(0xc0ffee ^ uv.size());
    tri_rng.shuffle(perm);
    std::vector<vbsim::detail::P2> shuffled(uv.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
      shuffled[i] = uv[static_cast<std::size_t>(perm[i])];
    const auto tris2d = vbsim::detail::alpha_complex(shuffled, opts.alpha);

    if (!tris2d.empty()) {
      const int base = static_cast<int>(out.vertices.size());
      for (const auto& q : shuffled) out.vertices.push_back(pl.point + e1 * q.x + e2 * q.y);
      for (const auto& t : tris2d) {
        std::array<int, 3> f = {base + t[0], base + t[1], base + t[2]};
        // Wind so the face normal matches the patch normal.
        const Vec3 fn = geom::cross(out.vertices[static_cast<std::size_t>(f[1])] -
                                        out.vertices[static_cast<std::size_t>(f[0])],
                                    out.vertices[static_cast<std::size_t>(f[2])] -
                                        out.vertices[static_cast<std::size_t>(f[0])]);
        if (geom::dot(fn, pl.normal) < 0.0) std::swap(f[1], f[2]);
        if (0.5 * geom::norm(fn) > geom::kMinTriangleArea) out.faces.push_back(f);
      }
    }

    // Remove consumed inliers from the active set.
    std::vector<char> is_inlier(points.size(), 0);
    for (int i : best_inliers) is_inlier[static_cast<std::size_t>(i)] = 1;
    std::vector<int> remaining;
    remaining.reserve(active.size() - best_inliers.size());
    for (int i : active)
      if (!is_inlier[static_cast<std::size_t>(i)]) remaining.push_back(i);
    active = std::move(remaining);
  }
  return out;
}

/// Two-triangle rectangle mesh for the ground plane, normals +z.
inline TriMesh ground_mesh(const scene::Region& region, double z) {
  TriMesh m;
  m.vertices = {{region.xmin, region.ymin, z},
                {region.xmax, region.ymin, z},
                {region.xmax, region.ymax, z},
                {region.xmin, region.ymax, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

// ---- file format --------------------------------------------------------
// Minimal OBJ subset: "v x y z" and "f i j k" (1-based) lines only.

inline void save_obj(const TriMesh& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[160];
  for (const Vec3& v : m.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9f %.9f %.9f\n", v.x, v.y, v.z);
    f << buf;
  }
  for (const auto& face : m.faces)
    f << "f " << face[0] + 1 << " " << face[1] + 1 << " " << face[2] + 1 << "\n";
}

inline TriMesh load_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  TriMesh m;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x >> v.y >> v.z))
        throw scene::ParseError(path + ":" + std::to_string(line_no) + ": bad vertex");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      int i, j, k;
      if (!(ss >> i >> j >> k))
        throw scene::ParseError(path + ":" + std::to_string(line_no) + ": bad face");
      const int n = static_cast<int>(m.vertices.size());
      if (i < 1 || j < 1 || k < 1 || i > n || j > n || k > n)
        throw scene::ParseError(path + ":" + std::to_string(line_no) + ": face index out of range");
      m.faces.push_back({i - 1, j - 1, k - 1});
    }
  }
  return m;
}

}  // namespace vbsim::mesh
