#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vbsim/geom.hpp"
#include "vbsim/hdbscan.hpp"
#include "vbsim/parallel.hpp"
#include "vbsim/scene.hpp"

// Virtual base stations: mirror images of the physical BS across reflector
// triangles that face it with a clear path. Mirrors of one facade nearly
// coincide, so they are clustered into one record; a per-cell coverage grid
// then caches which VBSs can serve each location.

namespace vbsim::vbs {

using geom::Triangle;
using geom::Vec3;

struct VbsRecord {
  int order = 0;  // 0 = the BS itself, 1 = single reflection
  int index = 0;  // 1-based within the order; (1,1) is the ground image
  Vec3 location;
  std::vector<int> triangle_ids;  // sorted reflector triangles, empty for order 0
};

struct GridSpec {
  int dx = 40;
  int dy = 40;
  scene::Region bounds;
  double ue_height = 1.5;
};

struct CoverageGrid {
  GridSpec spec;
  // Row-major, index = iy * dx + ix; sorted record ids per cell.
  std::vector<std::vector<int>> cell_vbs;

  int cell_index(int ix, int iy) const { return iy * spec.dx + ix; }

  Vec3 cell_center(int ix, int iy) const {
    const double wx = spec.bounds.width() / spec.dx;
    const double wy = spec.bounds.height() / spec.dy;
    return {spec.bounds.xmin + (ix + 0.5) * wx, spec.bounds.ymin + (iy + 0.5) * wy,
            spec.ue_height};
  }

  /// Cell indices of the k nearest cell centers to (x, y) in the grid plane,
  /// ties broken by cell index.
  std::vector<int> k_nearest_cells(double x, double y, int k) const {
    std::vector<std::pair<double, int>> d;
    d.reserve(static_cast<std::size_t>(spec.dx * spec.dy));
    for (int iy = 0; iy < spec.dy; ++iy)
      for (int ix = 0; ix < spec.dx; ++ix) {
        const Vec3 c = cell_center(ix, iy);
        const double dx = c.x - x, dy = c.y - y;
        d.emplace_back(dx * dx + dy * dy, cell_index(ix, iy));
      }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    std::vector<int> out;
    out.reserve(kk);
    for (std::size_t i = 0; i < kk; ++i) out.push_back(d[i].second);
    return out;
  }
};

struct VbsStore {
  Vec3 bs_location;
  std::vector<VbsRecord> records;  // record id = position in this vector
  CoverageGrid grid;

  const VbsRecord* ground_record() const {
    for (const auto& r : records)
      if (r.order == 1 && r.index == 1) return &r;
    return nullptr;
  }
};

/// Orientation + unobstructed-path test for a reflector candidate. True iff
/// (a) the outward normal has a positive component toward the BS and (b) at
/// least one of the three BS-to-vertex segments is free of every other
/// triangle.
inline bool valid_reflector(std::span<const Triangle> all, int self_id, const Vec3& o_bs) {
  const Triangle& tri = all[static_cast<std::size_t>(self_id)];
  if (geom::dot(tri.normal, o_bs - tri.centroid) <= 0.0) return false;
  const int exclude[1] = {self_id};
  for (const Vec3* v : {&tri.v1, &tri.v2, &tri.v3}) {
    if (geom::distance(o_bs, *v) <= geom::kMinRayParam) return false;
    if (!geom::segment_occluded(o_bs, *v, all, exclude)) return true;
  }
  return false;
}

struct RawVbs {
  Vec3 location;
  int triangle_id = -1;
};

struct RawVbsSet {
  Vec3 ground_location;                 // BS mirrored across z = ground
  std::vector<int> ground_triangle_ids; // the ground reflector triangles
  std::vector<RawVbs> wall;             // one image per valid non-ground triangle
};

/// Mirrors the BS across every valid reflector triangle. Ground triangles are
/// excluded from the generic sweep and represented by the always-present
/// ground image instead.
inline RawVbsSet compute_raw_vbs(std::span<const Triangle> tris, const Vec3& o_bs,
                                 double z_ground, std::span<const int> ground_tri_ids = {}) {
  RawVbsSet out;
  out.ground_location = {o_bs.x, o_bs.y, 2.0 * z_ground - o_bs.z};
  out.ground_triangle_ids.assign(ground_tri_ids.begin(), ground_tri_ids.end());
  std::sort(out.ground_triangle_ids.begin(), out.ground_triangle_ids.end());

  std::vector<char> is_ground(tris.size(), 0);
  for (int id : ground_tri_ids) is_ground[static_cast<std::size_t>(id)] = 1;

  std::vector<char> valid(tris.size(), 0);
  parallel::parallel_for(tris.size(), [&](std::size_t i) {
    if (is_ground[i]) return;
    valid[i] = valid_reflector(tris, static_cast<int>(i), o_bs) ? 1 : 0;
  });
  for (std::size_t i = 0; i < tris.size(); ++i) {
    if (!valid[i]) continue;
    const Triangle& t = tris[i];
    out.wall.push_back({geom::mirror_point(o_bs, t.centroid, t.normal), static_cast<int>(i)});
  }
  return out;
}

struct ClusterVbsOptions {
  int min_cluster_size = 2;
  int min_samples = 1;
  bool keep_noise_as_singletons = true;
  int first_index = 2;  // (1,1) is reserved for the ground image
};

/// Groups raw single-reflection images into records: one record per cluster
/// at the member centroid with the union of member triangles. Depending on
/// options, unclustered images become singleton records or are dropped.
inline std::vector<VbsRecord> cluster_vbs(const std::vector<RawVbs>& raw,
                                          const ClusterVbsOptions& opts = {}) {
  std::vector<VbsRecord> out;
  if (raw.empty()) return out;

  std::vector<Vec3> pts;
  pts.reserve(raw.size());
  for (const auto& r : raw) pts.push_back(r.location);

  hdbscan::Params params;
  params.min_cluster_size = opts.min_cluster_size;
  params.min_samples = opts.min_samples;
  params.allow_single_cluster = true;
  const auto labels = hdbscan::cluster(pts, params);

  const int nc = labels.num_clusters();
  std::vector<VbsRecord> clusters(static_cast<std::size_t>(nc));
  std::vector<int> counts(static_cast<std::size_t>(nc), 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int l = labels.labels[i];
    if (l < 0) continue;
    clusters[static_cast<std::size_t>(l)].location += raw[i].location;
    clusters[static_cast<std::size_t>(l)].triangle_ids.push_back(raw[i].triangle_id);
    ++counts[static_cast<std::size_t>(l)];
  }
  int index = opts.first_index;
  for (int c = 0; c < nc; ++c) {
    auto& rec = clusters[static_cast<std::size_t>(c)];
    rec.order = 1;
    rec.index = index++;
    rec.location = rec.location / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    std::sort(rec.triangle_ids.begin(), rec.triangle_ids.end());
    out.push_back(std::move(rec));
  }
  if (opts.keep_noise_as_singletons) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (labels.labels[i] >= 0) continue;
      VbsRecord rec;
      rec.order = 1;
      rec.index = index++;
      rec.location = raw[i].location;
      rec.triangle_ids = {raw[i].triangle_id};
      out.push_back(std::move(rec));
    }
  }
  return out;
}

/// Assembles the record list: the BS itself (order 0), the ground image
/// (order 1, index 1), then the clustered wall images.
inline std::vector<VbsRecord> assemble_records(const Vec3& o_bs, const RawVbsSet& raw,
                                               const ClusterVbsOptions& opts = {}) {
  std::vector<VbsRecord> records;
  records.push_back({0, 1, o_bs, {}});
  records.push_back({1, 1, raw.ground_location, raw.ground_triangle_ids});
  for (auto& r : cluster_vbs(raw.wall, opts)) records.push_back(std::move(r));
  return records;
}

/// Per-cell serving sets. A cell holds the order-0 id iff the BS-to-cell
/// segment is unobstructed; a wall record iff one of its triangles contains
/// the bounce point of the cell-to-image line with both legs unobstructed
/// (the reflecting triangle itself excluded). The ground image shares the
/// order-0 cells by definition.
inline CoverageGrid compute_coverage(const std::vector<VbsRecord>& records,
                                     std::span<const Triangle> tris, const GridSpec& spec,
                                     const Vec3& o_bs) {
  CoverageGrid grid;
  grid.spec = spec;
  grid.cell_vbs.assign(static_cast<std::size_t>(spec.dx) * static_cast<std::size_t>(spec.dy), {});

  int bs_id = -1, ground_id = -1;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    if (records[static_cast<std::size_t>(i)].order == 0) bs_id = i;
    if (records[static_cast<std::size_t>(i)].order == 1 &&
        records[static_cast<std::size_t>(i)].index == 1)
      ground_id = i;
  }

  parallel::parallel_for(grid.cell_vbs.size(), [&](std::size_t cell) {
    const int ix = static_cast<int>(cell) % spec.dx;
    const int iy = static_cast<int>(cell) / spec.dx;
    const Vec3 p = grid.cell_center(ix, iy);
    auto& ids = grid.cell_vbs[cell];

    const bool los = !geom::segment_occluded(o_bs, p, tris);
    if (los && bs_id >= 0) ids.push_back(bs_id);
    if (los && ground_id >= 0) ids.push_back(ground_id);

    for (int ri = 0; ri < static_cast<int>(records.size()); ++ri) {
      const VbsRecord& rec = records[static_cast<std::size_t>(ri)];
      if (rec.order != 1 || rec.index == 1) continue;
      const Vec3 seg = rec.location - p;
      const double dist = geom::norm(seg);
      if (dist <= geom::kMinRayParam) continue;
      const Vec3 dir = seg / dist;
      bool served = false;
      for (int tid : rec.triangle_ids) {
        const auto hit = geom::ray_triangle_intersect(p, dir, tris[static_cast<std::size_t>(tid)]);
        if (!hit || hit->t >= dist - geom::kMinRayParam) continue;
        const Vec3 o_ref = hit->point;
        const int exclude[1] = {tid};
        if (geom::distance(o_bs, o_ref) <= geom::kMinRayParam) continue;
        if (geom::segment_occluded(o_bs, o_ref, tris, exclude)) continue;
        if (geom::segment_occluded(o_ref, p, tris, exclude)) continue;
        served = true;
        break;
      }
      if (served) ids.push_back(ri);
    }
    std::sort(ids.begin(), ids.end());
  });
  return grid;
}

// ---- file format --------------------------------------------------------
// {"bs_location": [x,y,z],
//  "records": [{"order": 0, "index": 1, "location": [x,y,z],
//               "triangle_ids": [..]}, ...],
//  "grid": {"dx": 40, "dy": 40, "bounds": [xmin,ymin,xmax,ymax],
//           "ue_height": 1.5, "cells": [[record ids...], ...]}}
// Cells are row-major with x fastest (index = iy*dx + ix).

inline nlohmann::json to_json(const VbsStore& store) {
  nlohmann::json j;
  j["bs_location"] = scene::detail::vec3_to_json(store.bs_location);
  j["records"] = nlohmann::json::array();
  for (const auto& r : store.records) {
    nlohmann::json jr;
    jr["order"] = r.order;
    jr["index"] = r.index;
    jr["location"] = scene::detail::vec3_to_json(r.location);
    jr["triangle_ids"] = r.triangle_ids;
    j["records"].push_back(jr);
  }
  nlohmann::json jg;
  jg["dx"] = store.grid.spec.dx;
  jg["dy"] = store.grid.spec.dy;
  jg["bounds"] = {store.grid.spec.bounds.xmin, store.grid.spec.bounds.ymin,
                  store.grid.spec.bounds.xmax, store.grid.spec.bounds.ymax};
  jg["ue_height"] = store.grid.spec.ue_height;
  jg["cells"] = store.grid.cell_vbs;
  j["grid"] = jg;
  return j;
}

inline VbsStore store_from_json(const nlohmann::json& j) {
  VbsStore s;
  try {
    s.bs_location = scene::detail::vec3_from_json(j.at("bs_location"), "bs_location");
    for (const auto& jr : j.at("records")) {
      VbsRecord r;
      r.order = jr.at("order").get<int>();
      r.index = jr.at("index").get<int>();
      r.location = scene::detail::vec3_from_json(jr.at("location"), "record location");
      r.triangle_ids = jr.at("triangle_ids").get<std::vector<int>>();
      s.records.push_back(std::move(r));
    }
    const auto& jg = j.at("grid");
    s.grid.spec.dx = jg.at("dx").get<int>();
    s.grid.spec.dy = jg.at("dy").get<int>();
    const auto& b = jg.at("bounds");
    if (!b.is_array() || b.size() != 4)
      throw scene::ParseError("grid.bounds: expected [xmin,ymin,xmax,ymax]");
    s.grid.spec.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                          b[3].get<double>()};
    s.grid.spec.ue_height = jg.at("ue_height").get<double>();
    s.grid.cell_vbs = jg.at("cells").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw scene::ParseError(std::string("vbs store: ") + e.what());
  }
  if (s.grid.spec.dx < 1 || s.grid.spec.dy < 1)
    throw scene::ParseError("vbs store: grid dimensions must be positive");
  if (s.grid.cell_vbs.size() !=
      static_cast<std::size_t>(s.grid.spec.dx) * static_cast<std::size_t>(s.grid.spec.dy))
    throw scene::ParseError("vbs store: cell count does not match dx*dy");
  for (const auto& cell : s.grid.cell_vbs)
    for (int id : cell)
      if (id < 0 || id >= static_cast<int>(s.records.size()))
        throw scene::ParseError("vbs store: cell references unknown record " +
                                std::to_string(id));
  return s;
}

inline void save_store(const VbsStore& store, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << to_json(store).dump(1) << "\n";
}

inline VbsStore load_store(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw scene::ParseError(path + ": " + e.what());
  }
  return store_from_json(j);
}

}  // namespace vbsim::vbs
