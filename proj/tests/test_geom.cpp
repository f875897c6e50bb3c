#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>

#include "vbsim/geom.hpp"
#include "vbsim/rng.hpp"

using namespace vbsim;
using geom::Triangle;
using geom::Vec3;

namespace {

// Independent intersection reference: plane crossing + barycentric
// containment via triple products. Shares no intermediate terms with the
// Moller-Trumbore route.
std::optional<geom::Hit> plane_barycentric_intersect(const Vec3& o, const Vec3& dir,
                                                     const Triangle& tri) {
  const Vec3 e1 = tri.v2 - tri.v1;
  const Vec3 e2 = tri.v3 - tri.v1;
  const Vec3 n = geom::cross(e1, e2);
  const double denom = geom::dot(n, dir);
  if (std::abs(denom) <= 1e-12 * geom::norm(n) * geom::norm(dir)) return std::nullopt;
  const double t = geom::dot(n, tri.v1 - o) / denom;
  if (t < geom::kMinRayParam) return std::nullopt;
  const Vec3 p = o + dir * t;
  const double inv = 1.0 / geom::norm_sq(n);
  const double u = geom::dot(geom::cross(p - tri.v1, e2), n) * inv;
  const double v = geom::dot(geom::cross(e1, p - tri.v1), n) * inv;
  if (u < 0.0 || v < 0.0 || u + v > 1.0) return std::nullopt;
  geom::Hit h;
  h.t = t;
  h.u = u;
  h.v = v;
  h.point = p;
  return h;
}

Vec3 random_unit(rng::Stream& r) {
  while (true) {
    const Vec3 v{r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1)};
    const double n = geom::norm(v);
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

}  // namespace

TEST_CASE("ray_triangle_intersect known hit") {
  const auto tri = Triangle::from_vertices({2, -1, -1}, {2, 1, -1}, {2, 0, 1});
  const auto hit = geom::ray_triangle_intersect({0, 0, 0}, {1, 0, 0}, tri);
  REQUIRE(hit.has_value());
  CHECK(hit->t == Catch::Approx(2.0).margin(1e-12));
  CHECK(hit->u == Catch::Approx(0.25).margin(1e-12));
  CHECK(hit->v == Catch::Approx(0.5).margin(1e-12));
  CHECK(geom::distance(hit->point, {2, 0, 0}) < 1e-9);
}

TEST_CASE("ray_triangle_intersect ray pointing away") {
  const auto tri = Triangle::from_vertices({2, -1, -1}, {2, 1, -1}, {2, 0, 1});
  CHECK_FALSE(geom::ray_triangle_intersect({0, 0, 0}, {-1, 0, 0}, tri).has_value());
}

TEST_CASE("ray_triangle_intersect plane crossed outside triangle") {
  const auto tri = Triangle::from_vertices({2, 1, 1}, {2, 2, 1}, {2, 1, 2});
  CHECK_FALSE(geom::ray_triangle_intersect({0, 0, 0}, {1, 0, 0}, tri).has_value());
}

TEST_CASE("degenerate triangle is rejected, not a miss") {
  CHECK_THROWS_AS(Triangle::from_vertices({0, 0, 0}, {1, 0, 0}, {2, 0, 0}),
                  std::invalid_argument);
  Triangle collapsed;  // bypass the factory
  collapsed.v1 = {0, 0, 0};
  collapsed.v2 = {1, 0, 0};
  collapsed.v3 = {2, 0, 0};
  collapsed.normal = {0, 0, 1};
  collapsed.centroid = {1, 0, 0};
  CHECK_THROWS_AS(geom::ray_triangle_intersect({0, 0, 5}, {0, 0, -1}, collapsed),
                  std::invalid_argument);
}

TEST_CASE("intersection agrees with plane+barycentric reference") {
  rng::Stream r(42);
  int compared = 0;
  for (int i = 0; i < 20000; ++i) {
    Vec3 a{r.uniform(-5, 5), r.uniform(-5, 5), r.uniform(-5, 5)};
    Vec3 b{r.uniform(-5, 5), r.uniform(-5, 5), r.uniform(-5, 5)};
    Vec3 c{r.uniform(-5, 5), r.uniform(-5, 5), r.uniform(-5, 5)};
    if (0.5 * geom::norm(geom::cross(b - a, c - a)) <= 1e-6) continue;
    const auto tri = Triangle::from_vertices(a, b, c);
    const Vec3 o{r.uniform(-10, 10), r.uniform(-10, 10), r.uniform(-10, 10)};
    const Vec3 dir = random_unit(r);

    const auto ref = plane_barycentric_intersect(o, dir, tri);
    const auto got = geom::ray_triangle_intersect(o, dir, tri);

    // Skip the decision band around boundaries where the two formulations
    // may legitimately differ in the last ulps.
    const Vec3 n = geom::cross(b - a, c - a);
    if (std::abs(geom::dot(geom::normalized(n), dir)) < 1e-7) continue;
    if (ref) {
      const double band = std::min({std::abs(ref->u), std::abs(ref->v),
                                    std::abs(1.0 - ref->u - ref->v),
                                    std::abs(ref->t - geom::kMinRayParam)});
      if (band < 1e-7) continue;
    }
    ++compared;
    REQUIRE(ref.has_value() == got.has_value());
    if (ref && got) CHECK(std::abs(ref->t - got->t) < 1e-9);
  }
  CHECK(compared > 1000);
}

TEST_CASE("mirror_point axis-aligned cases") {
  CHECK(geom::distance(geom::mirror_point({0, 0, 10}, {0, 0, 0}, {0, 0, 1}), {0, 0, -10}) <
        1e-12);
  CHECK(geom::distance(geom::mirror_point({0, 0, 0}, {5, 0, 0}, {-1, 0, 0}), {10, 0, 0}) <
        1e-12);
  CHECK_THROWS_AS(geom::mirror_point({0, 0, 0}, {0, 0, 0}, {0, 0, 2}), std::invalid_argument);
}

TEST_CASE("mirror_point involution and isometry") {
  rng::Stream r(7);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q{r.uniform(-50, 50), r.uniform(-50, 50), r.uniform(-50, 50)};
    const Vec3 n = random_unit(r);
    const Vec3 p1{r.uniform(-50, 50), r.uniform(-50, 50), r.uniform(-50, 50)};
    const Vec3 p2{r.uniform(-50, 50), r.uniform(-50, 50), r.uniform(-50, 50)};
    const Vec3 m1 = geom::mirror_point(p1, q, n);
    const Vec3 m2 = geom::mirror_point(p2, q, n);
    CHECK(geom::distance(geom::mirror_point(m1, q, n), p1) < 1e-9);
    const double d0 = geom::distance(p1, p2);
    CHECK(std::abs(geom::distance(m1, m2) - d0) < 1e-9 * std::max(1.0, d0));
  }
}

TEST_CASE("reflection_point symmetric wall case") {
  const auto p = geom::reflection_point({10, 0, 0}, {0, 0, 0}, {0, 10, 0});
  REQUIRE(p.has_value());
  CHECK(geom::distance(*p, {5, 5, 0}) < 1e-12);
}

TEST_CASE("reflection_point ground bounce lies on the ground") {
  const auto p = geom::reflection_point({0, 0, -10}, {0, 0, 10}, {20, 0, 1.5});
  REQUIRE(p.has_value());
  CHECK(p->z == Catch::Approx(0.0).margin(1e-12));
  CHECK(p->x == Catch::Approx(400.0 / 460.0 * 20.0).margin(1e-9));
  CHECK(p->y == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("reflection_point grazing geometry yields no point") {
  // UE in the plane through the VBS perpendicular to the BS-VBS axis: the
  // denominator vanishes and no finite bounce point exists.
  CHECK_FALSE(geom::reflection_point({0, 0, -10}, {0, 0, 10}, {5, 3, -10}).has_value());
}

TEST_CASE("reflection_point identities over random mirror setups") {
  rng::Stream r(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q{r.uniform(-20, 20), r.uniform(-20, 20), r.uniform(-20, 20)};
    const Vec3 n = random_unit(r);
    Vec3 bs{r.uniform(-50, 50), r.uniform(-50, 50), r.uniform(-50, 50)};
    Vec3 ue{r.uniform(-50, 50), r.uniform(-50, 50), r.uniform(-50, 50)};
    // Put both endpoints strictly on the front side of the plane.
    if (geom::dot(bs - q, n) < 0) bs = geom::mirror_point(bs, q, n);
    if (geom::dot(ue - q, n) < 0) ue = geom::mirror_point(ue, q, n);
    if (geom::dot(bs - q, n) < 0.5 || geom::dot(ue - q, n) < 0.5) continue;

    const Vec3 vbs = geom::mirror_point(bs, q, n);
    const auto refl = geom::reflection_point(vbs, bs, ue);
    REQUIRE(refl.has_value());

    // On the mirror plane.
    CHECK(std::abs(geom::dot(*refl - q, n)) < 1e-9 * 100.0);
    // Image-method path length identity.
    const double lhs = geom::distance(*refl, bs) + geom::distance(*refl, ue);
    const double rhs = geom::distance(vbs, ue);
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, rhs));
    // Specular law: the outgoing direction is the mirror of the incoming one.
    const Vec3 inc = geom::normalized(*refl - bs);
    const Vec3 ref_out = geom::normalized(ue - *refl);
    const Vec3 mirrored = inc - n * (2.0 * geom::dot(inc, n));
    CHECK(geom::distance(mirrored, ref_out) < 1e-9);
  }
}

TEST_CASE("segment_occluded wall between endpoints") {
  const auto wall_a = Triangle::from_vertices({5, -10, 0}, {5, 10, 0}, {5, 10, 10});
  const auto wall_b = Triangle::from_vertices({5, -10, 0}, {5, 10, 10}, {5, -10, 10});
  const std::vector<Triangle> tris{wall_a, wall_b};

  CHECK(geom::segment_occluded({0, 0, 5}, {10, 0, 5}, tris));
  const std::vector<int> exclude{0, 1};
  CHECK_FALSE(geom::segment_occluded({0, 0, 5}, {10, 0, 5}, tris, exclude));
}

TEST_CASE("segment_occluded wall beyond the segment") {
  const auto wall_a = Triangle::from_vertices({20, -10, 0}, {20, 10, 0}, {20, 10, 10});
  const auto wall_b = Triangle::from_vertices({20, -10, 0}, {20, 10, 10}, {20, -10, 10});
  const std::vector<Triangle> tris{wall_a, wall_b};
  CHECK_FALSE(geom::segment_occluded({0, 0, 5}, {10, 0, 5}, tris));
}

TEST_CASE("segment endpoints on a triangle do not self-occlude") {
  const auto wall_a = Triangle::from_vertices({5, -10, 0}, {5, 10, 0}, {5, 10, 10});
  const std::vector<Triangle> tris{wall_a};
  // Segment ends exactly on the wall plane.
  CHECK_FALSE(geom::segment_occluded({0, 0, 5}, {5, 0, 5}, tris));
}
