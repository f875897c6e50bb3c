#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vbsim/geom.hpp"

// Synthetic box-world environments: a flat ground plane plus axis-aligned
// boxes with per-box reflection coefficients. These scenes drive both the
// simulated LiDAR scan and the exact multipath reference.

namespace vbsim::scene {

using geom::Vec3;

/// Thrown on malformed scene/store/config files; message carries the file
/// and the offending field or line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Box {
  Vec3 min;
  Vec3 max;
  double gamma_db = 10.0;  // reflection loss of every face of this box
};

struct Region {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  bool contains_xy(double x, double y) const {
    return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
  }
};

struct Scene {
  double ground_z = 0.0;
  Region region;
  std::vector<Box> boxes;
};

/// One rectangular reflector: point = origin + s*edge_u + t*edge_v with
/// s,t in [0,1]. `box_index` is -1 for the ground rectangle.
struct RectFace {
  Vec3 origin;
  Vec3 edge_u;
  Vec3 edge_v;
  Vec3 normal;  // outward unit normal
  double gamma_db = 10.0;
  int box_index = -1;
  bool is_ground = false;

  double area() const { return geom::norm(geom::cross(edge_u, edge_v)); }
};

inline void validate(const Scene& s) {
  if (!(s.region.xmax > s.region.xmin) || !(s.region.ymax > s.region.ymin))
    throw std::invalid_argument("scene region is empty");
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    const Box& b = s.boxes[i];
    if (!(b.max.x > b.min.x && b.max.y > b.min.y && b.max.z > b.min.z))
      throw std::invalid_argument("box " + std::to_string(i) + " has non-positive extent");
    if (b.min.z < s.ground_z - 1e-9)
      throw std::invalid_argument("box " + std::to_string(i) + " extends below ground");
    for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
      const Box& c = s.boxes[j];
      const bool overlap = b.min.x < c.max.x && c.min.x < b.max.x && b.min.y < c.max.y &&
                           c.min.y < b.max.y && b.min.z < c.max.z && c.min.z < b.max.z;
      if (overlap)
        throw std::invalid_argument("boxes " + std::to_string(i) + " and " + std::to_string(j) +
                                    " overlap");
    }
  }
}

/// All reflector rectangles: four walls and the top of each box (bottoms sit
/// on the ground and cannot reflect), plus the ground rectangle over the
/// region. The ground face comes first.
inline std::vector<RectFace> faces(const Scene& s, double ground_gamma_db = 10.0) {
  std::vector<RectFace> out;
  const auto add = [&out](Vec3 o, Vec3 eu, Vec3 ev, Vec3 n, double g, int bi, bool ground) {
    RectFace f;
    f.origin = o;
    f.edge_u = eu;
    f.edge_v = ev;
    f.normal = n;
    f.gamma_db = g;
    f.box_index = bi;
    f.is_ground = ground;
    out.push_back(f);
  };
  add({s.region.xmin, s.region.ymin, s.ground_z}, {s.region.width(), 0, 0},
      {0, s.region.height(), 0}, {0, 0, 1}, ground_gamma_db, -1, true);
  for (int i = 0; i < static_cast<int>(s.boxes.size()); ++i) {
    const Box& b = s.boxes[i];
    const double dx = b.max.x - b.min.x, dy = b.max.y - b.min.y, dz = b.max.z - b.min.z;
    add({b.min.x, b.min.y, b.min.z}, {dx, 0, 0}, {0, 0, dz}, {0, -1, 0}, b.gamma_db, i, false);
    add({b.min.x, b.max.y, b.min.z}, {dx, 0, 0}, {0, 0, dz}, {0, 1, 0}, b.gamma_db, i, false);
    add({b.min.x, b.min.y, b.min.z}, {0, dy, 0}, {0, 0, dz}, {-1, 0, 0}, b.gamma_db, i, false);
    add({b.max.x, b.min.y, b.min.z}, {0, dy, 0}, {0, 0, dz}, {1, 0, 0}, b.gamma_db, i, false);
    add({b.min.x, b.min.y, b.max.z}, {dx, 0, 0}, {0, dy, 0}, {0, 0, 1}, b.gamma_db, i, false);
  }
  return out;
}

inline bool point_in_any_box_xy(const Scene& s, double x, double y, double margin = 0.0) {
  for (const Box& b : s.boxes)
    if (x >= b.min.x - margin && x <= b.max.x + margin && y >= b.min.y - margin &&
        y <= b.max.y + margin)
      return true;
  return false;
}

/// Open-interval segment vs box occlusion test (slab method). Contact within
/// `eps` of either endpoint does not count, so segments that start or end on
/// a box face are not blocked by that face.
inline bool segment_hits_box(const Vec3& p1, const Vec3& p2, const Box& b,
                             double eps = geom::kMinRayParam) {
  const Vec3 d = p2 - p1;
  double t0 = eps, t1 = 1.0 - eps;
  const double lo[3] = {b.min.x, b.min.y, b.min.z};
  const double hi[3] = {b.max.x, b.max.y, b.max.z};
  const double o[3] = {p1.x, p1.y, p1.z};
  const double dd[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dd[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / dd[a];
    double tb = (hi[a] - o[a]) / dd[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

inline bool segment_occluded_by_boxes(const Scene& s, const Vec3& p1, const Vec3& p2) {
  for (const Box& b : s.boxes)
    if (segment_hits_box(p1, p2, b)) return true;
  return false;
}

// ---- file format --------------------------------------------------------
// {"ground_z": 0.0, "region": [xmin, ymin, xmax, ymax],
//  "boxes": [{"min": [x,y,z], "max": [x,y,z], "gamma_db": 10.0}, ...]}

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(what + ": expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec3_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x, v.y, v.z});
}

}  // namespace detail

inline nlohmann::json to_json(const Scene& s) {
  nlohmann::json j;
  j["ground_z"] = s.ground_z;
  j["region"] = {s.region.xmin, s.region.ymin, s.region.xmax, s.region.ymax};
  j["boxes"] = nlohmann::json::array();
  for (const Box& b : s.boxes) {
    nlohmann::json jb;
    jb["min"] = detail::vec3_to_json(b.min);
    jb["max"] = detail::vec3_to_json(b.max);
    jb["gamma_db"] = b.gamma_db;
    j["boxes"].push_back(jb);
  }
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  try {
    s.ground_z = j.at("ground_z").get<double>();
    const auto& r = j.at("region");
    if (!r.is_array() || r.size() != 4) throw ParseError("region: expected [xmin,ymin,xmax,ymax]");
    s.region = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
    for (const auto& jb : j.at("boxes")) {
      Box b;
      b.min = detail::vec3_from_json(jb.at("min"), "box min");
      b.max = detail::vec3_from_json(jb.at("max"), "box max");
      b.gamma_db = jb.at("gamma_db").get<double>();
      s.boxes.push_back(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scene: ") + e.what());
  }
  validate(s);
  return s;
}

inline void save_scene(const Scene& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << to_json(s).dump(2) << "\n";
}

inline Scene load_scene(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace vbsim::scene
