#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "vbsim/hdbscan.hpp"
#include "vbsim/rng.hpp"

using namespace vbsim;
using geom::Vec3;

namespace {

std::vector<Vec3> two_blobs(int per_blob, double sigma, double separation, std::uint64_t seed) {
  rng::Stream r(seed);
  std::vector<Vec3> pts;
  for (int i = 0; i < per_blob; ++i)
    pts.push_back({r.normal(0, sigma), r.normal(0, sigma), r.normal(0, sigma)});
  for (int i = 0; i < per_blob; ++i)
    pts.push_back({separation + r.normal(0, sigma), r.normal(0, sigma), r.normal(0, sigma)});
  return pts;
}

// Canonical partition signature: sets of member indices per cluster.
std::set<std::set<int>> partition_of(const hdbscan::ClusterLabels& l) {
  std::map<int, std::set<int>> by_label;
  for (int i = 0; i < static_cast<int>(l.labels.size()); ++i)
    if (l.labels[static_cast<std::size_t>(i)] >= 0)
      by_label[l.labels[static_cast<std::size_t>(i)]].insert(i);
  std::set<std::set<int>> out;
  for (auto& [k, v] : by_label) out.insert(v);
  return out;
}

}  // namespace

TEST_CASE("two well-separated blobs resolve to exactly two clusters") {
  const auto pts = two_blobs(500, 0.5, 100.0, 1234);
  const auto labels = hdbscan::cluster(pts, 20, 10);
  REQUIRE(labels.num_clusters() == 2);
  // Membership exact: the first 500 points are one cluster, the rest the other.
  for (int i = 0; i < 500; ++i) CHECK(labels.labels[static_cast<std::size_t>(i)] == labels.labels[0]);
  for (int i = 500; i < 1000; ++i) CHECK(labels.labels[static_cast<std::size_t>(i)] == labels.labels[500]);
  CHECK(labels.labels[0] != labels.labels[500]);
}

TEST_CASE("fewer points than min_cluster_size are all noise") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({static_cast<double>(i), 0, 0});
  const auto labels = hdbscan::cluster(pts, 20, 5);
  for (int l : labels.labels) CHECK(l == -1);
}

TEST_CASE("partition is invariant under input permutation") {
  const auto pts = two_blobs(150, 0.5, 80.0, 55);
  const auto reference = partition_of(hdbscan::cluster(pts, 15, 7));
  rng::Stream r(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> perm(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    r.shuffle(perm);
    std::vector<Vec3> shuffled(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
      shuffled[i] = pts[static_cast<std::size_t>(perm[i])];
    const auto labels = hdbscan::cluster(shuffled, 15, 7);
    // Map the shuffled partition back to original indices.
    std::map<int, std::set<int>> by_label;
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      if (labels.labels[i] >= 0) by_label[labels.labels[i]].insert(perm[i]);
    std::set<std::set<int>> got;
    for (auto& [k, v] : by_label) got.insert(v);
    REQUIRE(got == reference);
  }
}

TEST_CASE("partition is invariant under rigid translation") {
  const auto pts = two_blobs(120, 0.4, 60.0, 777);
  const auto reference = partition_of(hdbscan::cluster(pts, 10, 5));
  std::vector<Vec3> moved;
  for (const auto& p : pts) moved.push_back(p + Vec3{1000.0, -500.0, 250.0});
  CHECK(partition_of(hdbscan::cluster(moved, 10, 5)) == reference);
}

TEST_CASE("three blobs with noise points") {
  rng::Stream r(4321);
  std::vector<Vec3> pts;
  const Vec3 centers[3] = {{0, 0, 0}, {50, 0, 0}, {0, 50, 0}};
  for (const auto& c : centers)
    for (int i = 0; i < 100; ++i)
      pts.push_back(c + Vec3{r.normal(0, 0.5), r.normal(0, 0.5), r.normal(0, 0.5)});
  // A handful of isolated strays far from everything.
  for (int i = 0; i < 5; ++i) pts.push_back({200.0 + 30.0 * i, 200.0, 100.0});
  const auto labels = hdbscan::cluster(pts, 20, 10);
  CHECK(labels.num_clusters() == 3);
  for (int i = 300; i < 305; ++i) CHECK(labels.labels[static_cast<std::size_t>(i)] == -1);
}

TEST_CASE("single tight group needs allow_single_cluster") {
  rng::Stream r(9);
  std::vector<Vec3> pts;
  for (int i = 0; i < 60; ++i)
    pts.push_back({r.normal(0, 0.02), r.normal(0, 0.02), r.normal(0, 0.02)});
  pts.push_back({70, 0, 0});  // lone stray

  hdbscan::Params params;
  params.min_cluster_size = 5;
  params.min_samples = 3;
  params.allow_single_cluster = true;
  const auto labels = hdbscan::cluster(pts, params);
  REQUIRE(labels.num_clusters() == 1);
  int members = 0;
  for (int i = 0; i < 60; ++i) members += labels.labels[static_cast<std::size_t>(i)] == 0;
  CHECK(members == 60);
  CHECK(labels.labels[60] == -1);
}

TEST_CASE("coincident points cluster without overflow") {
  std::vector<Vec3> pts(30, Vec3{2.0, 3.0, 4.0});
  pts.push_back({90, 0, 0});
  hdbscan::Params params;
  params.min_cluster_size = 2;
  params.min_samples = 1;
  params.allow_single_cluster = true;
  const auto labels = hdbscan::cluster(pts, params);
  REQUIRE(labels.num_clusters() >= 1);
  for (int i = 0; i < 30; ++i) CHECK(labels.labels[static_cast<std::size_t>(i)] == 0);
  CHECK(labels.labels[30] == -1);
}

TEST_CASE("parameter validation") {
  std::vector<Vec3> pts(10, Vec3{0, 0, 0});
  CHECK_THROWS_AS(hdbscan::cluster(pts, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(hdbscan::cluster(pts, 2, 0), std::invalid_argument);
}
