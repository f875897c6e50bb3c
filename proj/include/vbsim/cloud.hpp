#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vbsim/geom.hpp"
#include "vbsim/point_grid.hpp"
#include "vbsim/rng.hpp"
#include "vbsim/scene.hpp"

// Simulated LiDAR acquisition and point-cloud preprocessing.

namespace vbsim::cloud {

using geom::Vec3;

struct PointCloud {
  std::vector<Vec3> points;
  std::string scene_id;
  double noise_sigma = 0.0;  // meters
  double drop_rate = 0.0;    // [0,1)

  std::size_t size() const { return points.size(); }
};

/// Samples every scene surface (ground + box walls and tops) uniformly at
/// `density` points per square meter, adds isotropic Gaussian position noise,
/// and drops each point independently with probability `drop_rate`. The
/// per-surface point count is round(density * area). Fixed seed gives a
/// bit-identical cloud.
inline PointCloud simulate_scan(const scene::Scene& sc, double density, double noise_sigma,
                                double drop_rate, std::uint64_t seed) {
  if (!(density > 0.0)) throw std::invalid_argument("simulate_scan: density must be positive");
  if (drop_rate < 0.0 || drop_rate >= 1.0)
    throw std::invalid_argument("simulate_scan: drop_rate must be in [0,1)");

  rng::Stream rng(seed);
  PointCloud out;
  out.noise_sigma = noise_sigma;
  out.drop_rate = drop_rate;

  for (const scene::RectFace& f : scene::faces(sc)) {
    const auto count = static_cast<std::int64_t>(std::llround(density * f.area()));
    for (std::int64_t i = 0; i < count; ++i) {
      const double su = rng.uniform();
      const double sv = rng.uniform();
      Vec3 p = f.origin + f.edge_u * su + f.edge_v * sv;
      if (noise_sigma > 0.0)
        p += Vec3{rng.normal(0.0, noise_sigma), rng.normal(0.0, noise_sigma),
                  rng.normal(0.0, noise_sigma)};
      const double keep = rng.uniform();
      if (keep >= drop_rate) out.points.push_back(p);
    }
  }
  return out;
}

/// Statistical outlier removal: a point is kept iff its mean distance to its
/// k nearest neighbors is within (global mean + std_ratio * global std) of
/// the per-point statistic. Clouds with at most k points pass through
/// unchanged.
inline PointCloud preprocess(const PointCloud& in, int k_neighbors, double std_ratio) {
  if (k_neighbors < 1) throw std::invalid_argument("preprocess: k_neighbors must be >= 1");
  PointCloud out = in;
  if (in.points.size() < static_cast<std::size_t>(k_neighbors) + 1) return out;

  std::vector<std::vector<int>> idx;
  std::vector<std::vector<double>> d2;
  detail::all_knn(in.points, k_neighbors, idx, d2);

  std::vector<double> mean_dist(in.points.size(), 0.0);
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    double s = 0.0;
    for (double dd : d2[i]) s += std::sqrt(dd);
    mean_dist[i] = s / static_cast<double>(d2[i].size());
  }
  const double n = static_cast<double>(mean_dist.size());
  const double mu = std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / n;
  double var = 0.0;
  for (double m : mean_dist) var += (m - mu) * (m - mu);
  const double sigma = std::sqrt(var / n);
  const double cutoff = mu + std_ratio * sigma;

  out.points.clear();
  for (std::size_t i = 0; i < in.points.size(); ++i)
    if (mean_dist[i] <= cutoff) out.points.push_back(in.points[i]);
  return out;
}

/// Keeps one representative point per cubic voxel (the first in input
/// order). `labels_out`, when non-null, receives for every input point the
/// index of its voxel representative in the returned vector.
inline std::vector<Vec3> voxel_downsample(const std::vector<Vec3>& points, double voxel,
                                          std::vector<int>* labels_out = nullptr) {
  if (!(voxel > 0.0)) throw std::invalid_argument("voxel_downsample: voxel must be positive");
  std::vector<Vec3> reps;
  std::unordered_map<std::uint64_t, int> seen;
  if (labels_out) labels_out->assign(points.size(), -1);
  auto cell = [voxel](double v) { return static_cast<std::int64_t>(std::floor(v / voxel)); };
  auto pack = [](std::int64_t x, std::int64_t y, std::int64_t z) {
    auto m = [](std::int64_t v) {
      return static_cast<std::uint64_t>(v + (1LL << 20)) & ((1ULL << 21) - 1);
    };
    return (m(x) << 42) | (m(y) << 21) | m(z);
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto key = pack(cell(points[i].x), cell(points[i].y), cell(points[i].z));
    auto [it, inserted] = seen.try_emplace(key, static_cast<int>(reps.size()));
    if (inserted) reps.push_back(points[i]);
    if (labels_out) (*labels_out)[i] = it->second;
  }
  return reps;
}

// ---- file format --------------------------------------------------------
// ASCII, one "x y z" triple per line (meters); '#' starts a comment line.

inline void save_xyz(const PointCloud& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "# point cloud: " << c.points.size() << " points\n";
  char buf[128];
  for (const Vec3& p : c.points) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", p.x, p.y, p.z);
    f << buf;
  }
}

inline PointCloud load_xyz(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  PointCloud c;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p.x >> p.y >> p.z))
      throw scene::ParseError(path + ":" + std::to_string(line_no) + ": expected 'x y z'");
    c.points.push_back(p);
  }
  return c;
}

}  // namespace vbsim::cloud
