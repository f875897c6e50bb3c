#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

// Geometric primitives for specular-path construction: vectors, triangles,
// ray-triangle intersection, plane mirroring, reflection points, occlusion.
// All coordinates are meters, double precision throughout.

namespace vbsim::geom {

// Minimum ray parameter accepted as a hit; guards against self-intersection
// when a segment starts or ends on a reflector surface.
inline constexpr double kMinRayParam = 1e-6;
// Triangles with area at or below this are rejected as degenerate.
inline constexpr double kMinTriangleArea = 1e-8;
// Reflection-point denominators below this count as grazing geometry.
inline constexpr double kMinReflectionDen = 1e-9;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm_sq(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm_sq(v)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (n <= 0.0) throw std::invalid_argument("cannot normalize zero vector");
  return v / n;
}

inline bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// One reflector facet. `normal` is unit length and defines the outward side;
/// `centroid` is the exact vertex mean.
struct Triangle {
  Vec3 v1, v2, v3;
  Vec3 normal;
  Vec3 centroid;

  /// Builds a triangle with the normal implied by the vertex winding
  /// (right-hand rule on v1->v2->v3). Throws on degenerate input.
  static Triangle from_vertices(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n2 = cross(b - a, c - a);
    const double area = 0.5 * norm(n2);
    if (!(area > kMinTriangleArea)) throw std::invalid_argument("degenerate triangle");
    Triangle t;
    t.v1 = a;
    t.v2 = b;
    t.v3 = c;
    t.normal = n2 / (2.0 * area);
    t.centroid = (a + b + c) / 3.0;
    return t;
  }

  double area() const { return 0.5 * norm(cross(v2 - v1, v3 - v1)); }
};

/// Ray-triangle intersection record. Barycentric convention:
/// point = v1 + u*(v2-v1) + v*(v3-v1).
struct Hit {
  double t = 0.0;
  double u = 0.0;
  double v = 0.0;
  Vec3 point;
};

/// Moller-Trumbore intersection of the ray origin + t*direction with a
/// triangle. Hits require t >= kMinRayParam; boundary contact (u, v or u+v at
/// their limits) counts as a hit. Returns nullopt for misses and for rays
/// parallel to the triangle plane; throws on a degenerate triangle.
inline std::optional<Hit> ray_triangle_intersect(const Vec3& origin, const Vec3& direction,
                                                 const Triangle& tri) {
  const Vec3 e1 = tri.v2 - tri.v1;
  const Vec3 e2 = tri.v3 - tri.v1;
  if (0.5 * norm(cross(e1, e2)) <= kMinTriangleArea)
    throw std::invalid_argument("degenerate triangle");

  const Vec3 pvec = cross(direction, e2);
  const double det = dot(e1, pvec);
  // Normalized determinant is the cosine between the plane normal and the ray;
  // near zero means the ray runs parallel to the plane.
  const double scale = norm(cross(e1, e2)) * norm(direction);
  if (std::abs(det) <= 1e-12 * scale) return std::nullopt;

  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - tri.v1;
  const double u = dot(tvec, pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;

  const Vec3 qvec = cross(tvec, e1);
  const double v = dot(direction, qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;

  const double t = dot(e2, qvec) * inv_det;
  if (t < kMinRayParam) return std::nullopt;

  Hit h;
  h.t = t;
  h.u = u;
  h.v = v;
  h.point = origin + direction * t;
  return h;
}

/// Mirror image of p across the plane through plane_point with the given unit
/// normal. The tangential components are unchanged and the signed distance
/// flips sign. Throws unless the normal is unit length to 1e-9.
inline Vec3 mirror_point(const Vec3& p, const Vec3& plane_point, const Vec3& unit_normal) {
  if (std::abs(norm(unit_normal) - 1.0) > 1e-9)
    throw std::invalid_argument("mirror_point: normal must be unit length");
  const double d = dot(p - plane_point, unit_normal);
  return p - unit_normal * (2.0 * d);
}

/// Specular bounce point for the single-reflection path parameterized by a
/// mirror image: with o_vbs the image of o_bs across some plane, the returned
/// point lies on that plane and on the straight line from o_vbs to o_ue.
/// Returns nullopt for grazing geometry (denominator within
/// kMinReflectionDen of zero).
inline std::optional<Vec3> reflection_point(const Vec3& o_vbs, const Vec3& o_bs,
                                            const Vec3& o_ue) {
  const Vec3 b = o_bs - o_vbs;
  const Vec3 u = o_ue - o_vbs;
  const double den = 2.0 * dot(b, u);
  if (std::abs(den) <= kMinReflectionDen) return std::nullopt;
  return o_vbs + u * (norm_sq(b) / den);
}

/// True iff any triangle not listed in exclude_ids crosses the open segment
/// between p1 and p2 (ids are positions in the span). Endpoint contact within
/// kMinRayParam of either end does not count.
inline bool segment_occluded(const Vec3& p1, const Vec3& p2, std::span<const Triangle> triangles,
                             std::span<const int> exclude_ids = {}) {
  const Vec3 d = p2 - p1;
  const double len = norm(d);
  if (len <= 0.0) throw std::invalid_argument("segment_occluded: endpoints coincide");
  const Vec3 dir = d / len;
  for (int i = 0; i < static_cast<int>(triangles.size()); ++i) {
    bool skip = false;
    for (int id : exclude_ids)
      if (id == i) {
        skip = true;
        break;
      }
    if (skip) continue;
    const auto hit = ray_triangle_intersect(p1, dir, triangles[i]);
    if (hit && hit->t < len - kMinRayParam) return true;
  }
  return false;
}

}  // namespace vbsim::geom
